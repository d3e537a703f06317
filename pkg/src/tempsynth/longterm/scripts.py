"""Scenario scripts, historical queries and distractor generation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..model import (
    AmbiguousScene,
    Family,
    GenerationError,
    GroundTruth,
    Operation,
    QuestionMode,
    RetriesExhausted,
    ScenarioScript,
    SpecError,
    StateSnapshot,
    VisibleState,
)
from .families import prefix_states, replay, rules

DEFAULT_RETRIES = 20
DISTRACTOR_COUNT = 3
OP_FRAMES = (15, 30)  # per-op animation length at the 30 fps reference rate
ORDINALS = (
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth", "seventeenth",
    "eighteenth", "nineteenth", "twentieth",
)


class DistractorError(GenerationError):
    pass


def op_count_range(profile: str = "standard") -> tuple[int, int]:
    return (8, 20) if profile == "hard" else (4, 10)


def generate_script(
    family: str | Family,
    question_mode: str | QuestionMode,
    T: int,
    rng: np.random.Generator,
    *,
    seed: int = 0,
    profile: str = "standard",
    reveal_duration_s: float = 2.0,
    max_retries: int = DEFAULT_RETRIES,
) -> ScenarioScript:
    """Random S_0 plus T applicable operations, with visibility set per mode."""
    if T < 1:
        raise ValueError("a scenario needs T >= 1 operations")
    family, mode = Family(family), QuestionMode(question_mode)
    r = rules(family)
    last_error: Exception | None = None
    for _ in range(max_retries + 1):
        try:
            initial = r.random_initial(rng, profile)
            per_op = int(rng.integers(OP_FRAMES[0], OP_FRAMES[1] + 1)) / 30.0
            ops: list[Operation] = []
            state, previous = initial, None
            for i in range(T):
                op = r.random_op(state, rng, previous)
                op = Operation(op.kind, op.params, i + 1, per_op)
                state = r.apply(state, op)
                ops.append(op)
                previous = op
        except SpecError as exc:
            last_error = exc
            continue

        if mode is QuestionMode.FORWARD:
            visible, query = VisibleState.INITIAL_ONLY, {}
        elif mode is QuestionMode.RETRODICTIVE:
            visible, query = VisibleState.FINAL_ONLY, {}
        else:
            visible = VisibleState.INITIAL_ONLY if rng.random() < 0.5 else VisibleState.FINAL_ONLY
            op_index = int(rng.integers(1, T)) if T > 1 else 1
            mid = prefix_states(initial, ops)[op_index]
            props = r.properties(mid)
            query = {"op_index": op_index, "property": props[int(rng.integers(len(props)))]}
        if mode is not QuestionMode.HISTORICAL and r.view(initial) == r.view(state):
            last_error = AmbiguousScene("final state looks identical to the initial state")
            continue
        return ScenarioScript(
            seed=seed, family=family.value, initial=initial, operations=tuple(ops), final=state,
            visible_state=visible.value, question_mode=mode.value, per_op_duration_s=per_op,
            reveal_duration_s=reveal_duration_s, query=query,
        )
    raise RetriesExhausted(f"{family.value}/{mode.value} seed {seed}", max_retries + 1, None, last_error)


def answer_historical_query(script: ScenarioScript, op_index: int, prop: str) -> str:
    """Property of S_{op_index}, or of o_{op_index} when ``prop`` is ``op:<param>``."""
    if not 0 <= op_index <= script.T:
        raise IndexError(f"op_index {op_index} outside [0, {script.T}]")
    if prop.startswith("op:"):
        if op_index == 0:
            raise IndexError("operation properties are numbered from 1")
        op = script.operations[op_index - 1]
        key = prop[3:]
        return op.kind if key == "kind" else str(op.params[key])
    state = replay(script.initial, script.operations[:op_index])
    return rules(script.family).property_value(state, prop)


def make_distractors(
    correct: StateSnapshot,
    script: ScenarioScript | None,
    k: int,
    rng: np.random.Generator,
    value: Callable[[StateSnapshot], str] | None = None,
    max_attempts: int | None = None,
) -> list[str]:
    """k wrong answers, each read off ``correct`` after 1-2 random operations.

    ``value`` maps a state to the answer text being asked about (the family's
    view by default). Perturbations that cancel out or repeat an earlier
    distractor are redrawn.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    r = rules(correct.family)
    value = value or r.view
    truth = value(correct)
    out: list[str] = []
    attempts = max_attempts or 60 * k
    for _ in range(attempts):
        state, previous = correct, None
        try:
            for _ in range(1 + int(rng.integers(2))):
                previous = r.random_op(state, rng, previous)
                state = r.apply(state, previous)
        except SpecError:
            continue
        candidate = value(state)
        if candidate != truth and candidate not in out:
            out.append(candidate)
            if len(out) == k:
                return out
    raise DistractorError(f"found only {len(out)} of {k} distinct distractors for {truth!r}")


@dataclass(frozen=True)
class LongTermSample:
    script: ScenarioScript
    truth: GroundTruth
    retries: int


def script_ground_truth(script: ScenarioScript, rng: np.random.Generator, k: int = DISTRACTOR_COUNT) -> GroundTruth:
    r = rules(script.family)
    mode = QuestionMode(script.question_mode)
    hidden_state = script.final if script.visible_state == VisibleState.INITIAL_ONLY else script.initial
    fields: dict = {"count": str(script.T)}
    if mode is QuestionMode.FORWARD:
        answer = r.view(script.final)
        options = make_distractors(script.final, script, k, rng)
    elif mode is QuestionMode.RETRODICTIVE:
        answer = r.view(script.initial)
        options = make_distractors(script.initial, script, k, rng)
    else:
        op_index, prop = script.query["op_index"], script.query["property"]
        answer = answer_historical_query(script, op_index, prop)
        state = replay(script.initial, script.operations[:op_index])
        domain = r.property_domain(state, prop)
        k = k if domain is None else min(k, domain - 1)
        options = make_distractors(state, script, k, rng, value=lambda s: r.property_value(s, prop))
        fields.update(r.property_fields(prop))
        fields["moment"] = (
            "before the first operation" if op_index == 0 else f"right after the {ORDINALS[op_index - 1]} operation"
        )
    numeric = r.family is Family.SYMBOL_ARITHMETIC or prop_is_count(script)
    return GroundTruth(answer=answer, options=tuple(options), fields=fields, numeric=numeric,
                       hidden=r.render(hidden_state))


def prop_is_count(script: ScenarioScript) -> bool:
    return script.question_mode == QuestionMode.HISTORICAL and str(script.query.get("property", "")).startswith("count:")


def generate_longterm_sample(
    family: str | Family,
    question_mode: str | QuestionMode,
    rng: np.random.Generator,
    *,
    seed: int = 0,
    profile: str = "standard",
    T: int | None = None,
    max_retries: int = DEFAULT_RETRIES,
) -> LongTermSample:
    last_error: Exception | None = None
    for attempt in range(max_retries + 1):
        n_ops = T if T is not None else int(rng.integers(op_count_range(profile)[0], op_count_range(profile)[1] + 1))
        try:
            script = generate_script(family, question_mode, n_ops, rng, seed=seed, profile=profile)
            truth = script_ground_truth(script, rng)
        except (GenerationError, SpecError) as exc:
            last_error = exc
            continue
        return LongTermSample(script, truth, attempt)
    raise RetriesExhausted(f"{Family(family).value}/{QuestionMode(question_mode).value} seed {seed}",
                           max_retries + 1, None, last_error)
