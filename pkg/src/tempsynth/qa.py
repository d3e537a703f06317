"""Question instantiation from the YAML template store."""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

import numpy as np
import yaml

from .model import Family, GroundTruth, QASample, QuestionMode, ShortTask

MAX_CHOICES = 4
MCQ_FRACTION = 0.7  # for answers that also make sense free-form
LETTERS = "ABCDEFGH"

_SHORT_FIELDS = {"subject", "reference", "objects", "t1", "t2"}
_FAMILY_FIELDS = {
    Family.CARD_STACK.value: {"stack"},
    Family.CHIP_CONTAINERS.value: {"container"},
    Family.SHELL_GAME.value: {"object"},
}


class TemplateError(ValueError):
    pass


class LeakError(ValueError):
    pass


def placeholders(template: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(template) if name}


def _known_fields(group: str, mode: str | None) -> set[str]:
    if mode is None:
        return _SHORT_FIELDS
    known = {"count"}
    if mode == QuestionMode.HISTORICAL.value:
        known |= {"moment"} | _FAMILY_FIELDS.get(group, set())
    return known


@dataclass(frozen=True)
class TemplateGroup:
    fields: frozenset[str]
    templates: tuple[str, ...]


class TemplateStore:
    """Templates keyed by task type, or by (family, question mode)."""

    def __init__(self, doc: Mapping):
        self.groups: dict[tuple[str, str | None], TemplateGroup] = {}
        for task, body in (doc.get("shortterm") or {}).items():
            self._add(task, None, body)
        for family, modes in (doc.get("longterm") or {}).items():
            for mode, body in (modes or {}).items():
                self._add(family, mode, body)
        missing = [t.value for t in ShortTask if (t.value, None) not in self.groups]
        missing += [f"{f.value}/{m.value}" for f in Family for m in QuestionMode if (f.value, m.value) not in self.groups]
        if missing:
            raise TemplateError(f"no templates for: {', '.join(missing)}")

    def _add(self, group: str, mode: str | None, body: Mapping) -> None:
        where = group if mode is None else f"{group}/{mode}"
        valid = {t.value for t in ShortTask} if mode is None else {f.value for f in Family}
        if group not in valid or (mode is not None and mode not in {m.value for m in QuestionMode}):
            raise TemplateError(f"{where}: unknown task type or question mode")
        declared = set(body.get("fields") or ())
        unknown = declared - _known_fields(group, mode)
        if unknown:
            raise TemplateError(f"{where}: fields {sorted(unknown)} are not available for this group")
        templates = tuple(body.get("templates") or ())
        if len(templates) < 2:
            raise TemplateError(f"{where}: needs at least 2 templates, found {len(templates)}")
        for t in templates:
            try:
                used = placeholders(t)
            except ValueError as exc:
                raise TemplateError(f"{where}: malformed template {t!r}: {exc}") from exc
            if used - declared:
                raise TemplateError(f"{where}: template {t!r} uses undeclared fields {sorted(used - declared)}")
        self.groups[(group, mode)] = TemplateGroup(frozenset(declared), templates)

    @classmethod
    def from_yaml(cls, text: str) -> "TemplateStore":
        return cls(yaml.safe_load(text) or {})

    def templates(self, group: str, mode: str | None = None) -> tuple[str, ...]:
        return self.groups[(group, mode)].templates


@lru_cache(maxsize=1)
def default_store() -> TemplateStore:
    text = resources.files("tempsynth").joinpath("data/templates.yaml").read_text(encoding="utf-8")
    return TemplateStore.from_yaml(text)


def choose_choices(answer: str, options, rng: np.random.Generator, max_choices: int = MAX_CHOICES):
    """Answer plus up to ``max_choices - 1`` distractors, uniformly shuffled."""
    pool = [o for o in dict.fromkeys(options) if o != answer]
    k = min(max_choices - 1, len(pool))
    if k == 0:
        raise ValueError(f"no distractors available for {answer!r}")
    picked = [pool[int(i)] for i in rng.choice(len(pool), size=k, replace=False)]
    choices = [answer] + picked
    order = rng.permutation(len(choices))
    choices = tuple(choices[int(i)] for i in order)
    return choices, choices.index(answer)


def instantiate(
    group: str,
    truth: GroundTruth,
    metadata: Mapping,
    rng: np.random.Generator,
    *,
    sample_id: str,
    video_path: str,
    metadata_path: str,
    store: TemplateStore | None = None,
    mcq: bool | None = None,
) -> QASample:
    """Fill a random template for ``group`` (task type or family) and attach choices.

    Numeric answers become MCQ with probability ``MCQ_FRACTION`` unless
    ``mcq`` forces the format; everything else is always MCQ.
    """
    store = store or default_store()
    mode = metadata.get("question_mode")
    templates = store.templates(group, mode)
    template = templates[int(rng.integers(len(templates)))]
    missing = placeholders(template) - set(truth.fields)
    if missing:
        raise TemplateError(f"{group}: ground truth lacks fields {sorted(missing)}")
    question = template.format(**truth.fields)
    if truth.hidden and truth.hidden in question:
        raise LeakError(f"{sample_id}: question text reveals the hidden state")

    if mcq is None:
        mcq = not truth.numeric or rng.random() < MCQ_FRACTION
    choices = answer_index = None
    if mcq:
        choices, answer_index = choose_choices(truth.answer, truth.options, rng)
    return QASample(
        id=sample_id,
        video_path=video_path,
        metadata_path=metadata_path,
        task=group,
        question=question,
        answer=truth.answer,
        question_mode=mode,
        choices=choices,
        answer_index=answer_index,
        provenance={"seed": metadata.get("seed"), "kind": metadata.get("kind"),
                    "generator_version": metadata.get("generator_version")},
    )


def format_prompt(sample: QASample) -> str:
    """Question text as shown to a model, with lettered options for MCQ."""
    if not sample.is_mcq:
        return sample.question + "\nAnswer with a short phrase or number."
    lines = [sample.question] + [f"{LETTERS[i]}. {c}" for i, c in enumerate(sample.choices)]
    return "\n".join(lines) + "\nAnswer with the option letter."
