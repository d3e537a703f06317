import itertools

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tempsynth.longterm.families import RULES, apply, invert, prefix_states, replay, rewind, rules
from tempsynth.longterm.scripts import (
    DistractorError,
    answer_historical_query,
    generate_longterm_sample,
    generate_script,
    make_distractors,
)
from tempsynth.model import Family, Operation, QuestionMode, ScenarioScript, SpecError, StateSnapshot
from tempsynth.rng import new_rng

FAMILIES = [f.value for f in Family]
MODES = [m.value for m in QuestionMode]


def shell(*names):
    return StateSnapshot("shell_game", tuple(names))


def test_shell_swap():
    out = apply(shell("A", "B", "C"), Operation("swap", {"a": 0, "b": 1}))
    assert out.entities == ("B", "A", "C")


def test_symbol_multiply():
    assert apply(StateSnapshot("symbol_arithmetic", (5,)), Operation("mul", {"k": 3})).entities == (15,)


def test_insufficient_chips():
    with pytest.raises(SpecError, match="insufficient"):
        apply(StateSnapshot("chip_containers", (3, 2)), Operation("transfer", {"amount": 4, "src": 0, "dst": 1}))


def test_indivisible_register_rejected():
    with pytest.raises(SpecError):
        apply(StateSnapshot("symbol_arithmetic", (7,)), Operation("div", {"k": 3}))


def test_inverses():
    swap = Operation("swap", {"a": 0, "b": 2})
    assert invert(swap) == swap
    inv = invert(Operation("mul", {"k": 3}))
    assert (inv.kind, inv.params) == ("div", {"k": 3})
    assert apply(apply(StateSnapshot("symbol_arithmetic", (4,)), Operation("mul", {"k": 3})), inv).entities == (4,)
    with pytest.raises(SpecError):
        invert(Operation("teleport", {}))


@pytest.mark.parametrize("family", FAMILIES)
def test_round_trip_random_pairs(family):
    r = rules(family)
    rng = new_rng(1000 + FAMILIES.index(family))
    for _ in range(1000 // len(FAMILIES) + 1):
        s = r.random_initial(rng)
        op = r.random_op(s, rng)
        assert r.apply(r.apply(s, op), r.invert(op)) == s


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), family=st.sampled_from(FAMILIES), mode=st.sampled_from(MODES),
       T=st.integers(1, 12))
def test_script_replay_and_rewind(seed, family, mode, T):
    script = generate_script(family, mode, T, new_rng(seed), seed=seed)
    assert replay(script.initial, script.operations) == script.final
    assert rewind(script.final, script.operations) == script.initial
    assert oracles.oracle_replay(script.to_dict()) == oracles.as_lists(script.final.to_dict()["entities"])
    assert ScenarioScript.from_dict(script.to_dict()) == script


def test_visibility_per_mode():
    for seed in range(20):
        fwd = generate_script("card_stack", "forward_prediction", 5, new_rng(seed))
        assert fwd.visible_state == "initial_only"
        back = generate_script("sliding_puzzle", "retrodictive_inference", 6, new_rng(seed))
        assert back.visible_state == "final_only"
        # the answer S_0 is recovered by playing the inverted moves backwards
        s = back.final
        for op in reversed(back.operations):
            s = apply(s, invert(op))
        assert s == back.initial
        assert oracles.oracle_replay(back.to_dict()) == list(back.final.entities)


def test_zero_operations_rejected():
    with pytest.raises(ValueError):
        generate_script("shell_game", "forward_prediction", 0, new_rng(0))


def test_inconsistent_script_rejected():
    good = generate_script("shell_game", "forward_prediction", 3, new_rng(0))
    d = good.to_dict()
    d["final"]["entities"] = list(reversed(d["final"]["entities"]))
    if d["final"]["entities"] != good.to_dict()["final"]["entities"]:
        with pytest.raises(SpecError):
            ScenarioScript.from_dict(d)
    with pytest.raises(SpecError):
        ScenarioScript.from_dict({**good.to_dict(), "visible_state": "final_only"})


def test_shell_distractors_are_distinct_permutations():
    correct = shell("B", "A", "C")
    out = make_distractors(correct, None, 3, new_rng(0))
    perms = {"; ".join(f"cup {i + 1}: {n}" for i, n in enumerate(p)) for p in itertools.permutations("ABC")}
    view = rules("shell_game").view
    assert len(out) == len(set(out)) == 3
    assert view(correct) not in out
    assert set(out) <= perms


def test_two_state_space_forces_the_other_state():
    correct = shell("A", "B")
    assert make_distractors(correct, None, 1, new_rng(0)) == [rules("shell_game").view(shell("B", "A"))]
    with pytest.raises(DistractorError):
        make_distractors(correct, None, 2, new_rng(0))


@pytest.mark.parametrize("family", FAMILIES)
def test_distractors_never_equal_truth(family):
    r = rules(family)
    for seed in range(30):
        rng = new_rng(seed)
        s = r.random_initial(rng)
        out = make_distractors(s, None, 3, rng)
        assert r.view(s) not in out and len(set(out)) == 3


def test_historical_query_endpoints():
    script = generate_script("chip_containers", "historical_query", 6, new_rng(3))
    r = rules("chip_containers")
    for prop in r.properties(script.initial):
        assert answer_historical_query(script, 0, prop) == r.property_value(script.initial, prop)
        assert answer_historical_query(script, script.T, prop) == r.property_value(script.final, prop)
    with pytest.raises(IndexError):
        answer_historical_query(script, script.T + 1, "count:0")


@pytest.mark.parametrize("seed", range(20))
def test_mid_sequence_chip_count_matches_prefix_oracle(seed):
    script = generate_script("chip_containers", "historical_query", 8, new_rng(seed))
    d = script.to_dict()
    for k in range(script.T + 1):
        prefix = {**d, "operations": d["operations"][:k]}
        want = oracles.oracle_replay(prefix)
        for i in range(len(want)):
            assert answer_historical_query(script, k, f"count:{i}") == str(want[i])


def test_prefix_states_length():
    script = generate_script("file_system", "forward_prediction", 7, new_rng(2))
    states = prefix_states(script.initial, script.operations)
    assert len(states) == 8 and states[0] == script.initial and states[-1] == script.final


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("mode", MODES)
def test_samples_have_sound_truth(family, mode):
    for seed in range(5):
        s = generate_longterm_sample(family, mode, new_rng(seed), seed=seed)
        assert s.truth.answer not in s.truth.options
        assert len(set(s.truth.options)) == len(s.truth.options) >= 1
        hidden = s.script.final if s.script.visible_state == "initial_only" else s.script.initial
        assert s.truth.hidden == rules(family).render(hidden)


def test_all_families_registered():
    assert sorted(RULES) == sorted(FAMILIES)
