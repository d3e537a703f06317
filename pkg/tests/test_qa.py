from collections import Counter

import pytest

from conftest import GROUPS, make_sample
from tempsynth.model import GroundTruth
from tempsynth.qa import (
    MCQ_FRACTION,
    LeakError,
    TemplateError,
    TemplateStore,
    choose_choices,
    default_store,
    format_prompt,
    instantiate,
    placeholders,
)
from tempsynth.rng import new_rng

META = {"seed": 1, "kind": "shortterm"}


def test_every_group_has_two_templates():
    store = default_store()
    for group, mode in GROUPS:
        assert len(store.templates(group, mode)) >= 2


def minimal_doc():
    store = default_store()
    short = {g: {"fields": sorted(store.groups[(g, None)].fields), "templates": list(store.templates(g))}
             for g, m in GROUPS if m is None}
    long_: dict = {}
    for g, m in GROUPS:
        if m is not None:
            long_.setdefault(g, {})[m] = {"fields": sorted(store.groups[(g, m)].fields),
                                          "templates": list(store.templates(g, m))}
    return {"shortterm": short, "longterm": long_}


def test_store_rebuilds_from_its_own_groups():
    TemplateStore(minimal_doc())


@pytest.mark.parametrize("breakage,match", [
    (lambda d: d["shortterm"].pop("trajectory_shape"), "no templates"),
    (lambda d: d["shortterm"]["trajectory_shape"].update(templates=["Only {subject}?"]), "at least 2"),
    (lambda d: d["shortterm"]["trajectory_shape"].update(fields=["subject", "secret"]), "not available"),
    (lambda d: d["shortterm"]["trajectory_shape"]["templates"].append("Where is {reference}?"), "undeclared"),
    (lambda d: d["shortterm"]["trajectory_shape"]["templates"].append("Broken {subject"), "malformed"),
    (lambda d: d["shortterm"].update(juggling={"fields": [], "templates": ["a", "b"]}), "unknown"),
    (lambda d: d["longterm"]["shell_game"]["forward_prediction"].update(fields=["count", "moment"]), "not available"),
])
def test_store_validation(breakage, match):
    doc = minimal_doc()
    breakage(doc)
    with pytest.raises(TemplateError, match=match):
        TemplateStore(doc)


def test_collision_question_fill():
    store = default_store()
    templates = store.templates("collision_counting")
    assert templates[0].format(subject="circle") == "How many times does the circle hit the walls?"
    truth = GroundTruth("3", ("1", "2", "4", "5"), {"subject": "circle"}, numeric=True)
    seen = set()
    for seed in range(40):
        q = instantiate("collision_counting", truth, META, new_rng(seed), sample_id="x", video_path="v",
                        metadata_path="m")
        assert q.answer == "3"
        seen.add(q.question)
    assert "How many times does the circle hit the walls?" in seen
    assert seen <= {t.format(subject="circle") for t in templates}


@pytest.mark.parametrize("seed", range(10))
def test_collision_answer_matches_sidecar_count(seed):
    q, s = make_sample("collision_counting", None, seed, mcq=None)
    assert q.answer == str(len(s.trace.events_for(s.spec.query["subject"], "wall_contact")))


@pytest.mark.parametrize("seed", range(20))
def test_retrodictive_shell_game_does_not_leak(seed):
    q, s = make_sample("shell_game", "retrodictive_inference", seed)
    assert q.answer == s.truth.answer
    assert s.truth.hidden not in q.question
    assert q.question_mode == "retrodictive_inference"


def test_leak_is_refused():
    doc = minimal_doc()
    doc["shortterm"]["direction_identification"]["templates"] = ["Where does the {subject} go?", "And the {subject}?"]
    store = TemplateStore(doc)
    truth = GroundTruth("up", ("down",), {"subject": "cup 1: red star"}, hidden="cup 1: red star")
    with pytest.raises(LeakError):
        instantiate("direction_identification", truth, META, new_rng(0), sample_id="x", video_path="v",
                    metadata_path="m", store=store)


def test_missing_field_is_an_error():
    with pytest.raises(TemplateError):
        instantiate("collision_counting", GroundTruth("3", ("1",)), META, new_rng(0), sample_id="x",
                    video_path="v", metadata_path="m")


def test_index_law():
    choices, idx = choose_choices("c", ["a", "b", "d"], new_rng(0))
    assert choices[idx] == "c" and sorted(choices) == ["a", "b", "c", "d"]
    for seed in range(200):
        choices, idx = choose_choices("c", ["a", "b", "d", "e", "f", "c", "a"], new_rng(seed))
        assert len(choices) == 4 and len(set(choices)) == 4
        assert choices.count("c") == 1 and choices[idx] == "c"


def test_no_distractors_is_an_error():
    with pytest.raises(ValueError):
        choose_choices("a", ["a"], new_rng(0))


def test_shuffle_is_fair():
    rng = new_rng(2024)
    counts = Counter(choose_choices("x", ["a", "b", "c", "d", "e"], rng)[1] for _ in range(10_000))
    for pos in range(4):
        assert abs(counts[pos] / 10_000 - 0.25) <= 0.25 * 0.05, counts


def test_numeric_mcq_fraction():
    truth = GroundTruth("3", ("1", "2", "4"), {"subject": "circle"}, numeric=True)
    rng = new_rng(5)
    n = 2000
    mcq = sum(instantiate("collision_counting", truth, META, rng, sample_id="x", video_path="v",
                          metadata_path="m").is_mcq for _ in range(n))
    assert abs(mcq / n - MCQ_FRACTION) < 0.04
    non_numeric = GroundTruth("up", ("down", "left"), {"subject": "circle"})
    assert all(instantiate("direction_identification", non_numeric, META, new_rng(s), sample_id="x",
                           video_path="v", metadata_path="m").is_mcq for s in range(50))


def test_generated_samples_obey_choice_laws(mcq_samples):
    for q in mcq_samples:
        assert q.is_mcq and 2 <= len(q.choices) <= 4
        assert q.choices[q.answer_index] == q.answer


def test_prompt_lists_lettered_options(mcq_samples):
    q = mcq_samples[0]
    text = format_prompt(q)
    for i, c in enumerate(q.choices):
        assert f"{'ABCD'[i]}. {c}" in text
    assert placeholders("a {x} b {y}") == {"x", "y"}
