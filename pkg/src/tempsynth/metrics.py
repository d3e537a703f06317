"""Answer extraction, binary accuracy reward and temporal-grounding metrics."""

from __future__ import annotations

import re
from decimal import Decimal, InvalidOperation
from typing import Iterable, Sequence

from .model import QASample

THRESHOLDS = (0.3, 0.5, 0.7)
KINDS = ("mcq_letter", "free_text", "interval")

_TAG = re.compile(r"<answer>(.*?)</answer>", re.IGNORECASE | re.DOTALL)
_NUMBER = re.compile(r"^[-+]?(?:\d+(?:\.\d*)?|\.\d+)$")
_LETTER_ONLY = re.compile(r"^\(?([A-H])[.)]?(?:\s|$)")
_LETTER_PHRASE = re.compile(r"\b(?i:answer|option|choice)\s*(?:(?i:is)\s*:?|:|=)?\s*\(?([A-H])\)?(?![A-Za-z0-9])")
_LETTER_PAREN = re.compile(r"\(([A-H])\)")
_ANSWER_PHRASE = re.compile(r"\banswer\s*(?:is\s*:?|:|=)\s*([^\n]+)", re.IGNORECASE)
_ANY_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?")

_POINT = r"(\d+:\d{1,2}(?:\.\d+)?|[-+]?\d+(?:\.\d+)?)"
_UNIT = r"\s*(?:s\b|secs?\b|seconds?\b)?"
_SEP = "\\s*(?:-|\u2013|\u2014|~|to|and|,)\\s*"
_INTERVAL = re.compile(_POINT + _UNIT + _SEP + _POINT, re.IGNORECASE)


def canonical_number(text: str) -> str | None:
    if not _NUMBER.match(text):
        return None
    try:
        d = Decimal(text).normalize()
    except InvalidOperation:
        return None
    if d == 0:
        return "0"
    return format(d, "f")


def normalize(text: str) -> str:
    t = " ".join(text.strip().lower().split())
    t = t.rstrip(".!?;:").strip()
    if t.startswith("the "):
        t = t[4:]
    num = canonical_number(t)
    return num if num is not None else t


def _seconds(token: str) -> float:
    if ":" in token:
        mm, ss = token.split(":")
        return int(mm) * 60 + float(ss)
    return float(token)


def _region(text: str) -> tuple[str, bool]:
    tags = _TAG.findall(text)
    if tags:
        return tags[-1].strip(), True
    return text, False


def extract_answer(output: str | None, kind: str = "free_text", *, require_tag: bool = False):
    """Final answer in canonical form, or None when nothing parses.

    A ``<answer>...</answer>`` span wins; otherwise the last matching
    pattern in the text is used, unless ``require_tag`` is set. Intervals
    come back as ``(start, end)``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown answer kind {kind!r}")
    if not output or not output.strip():
        return None
    region, tagged = _region(output)
    if require_tag and not tagged:
        return None

    if kind == "mcq_letter":
        m = _LETTER_ONLY.match(region.strip())
        if m and (tagged or len(region.strip()) <= 4):
            return m.group(1)
        for pattern in (_LETTER_PHRASE, _LETTER_PAREN):
            hits = pattern.findall(region)
            if hits:
                return hits[-1].upper()
        return None

    if kind == "interval":
        hits = _INTERVAL.findall(region)
        if not hits:
            return None
        start, end = (_seconds(t) for t in hits[-1])
        return (start, end) if end >= start else None

    if tagged:
        return normalize(region) or None
    phrases = _ANSWER_PHRASE.findall(region)
    if phrases:
        return normalize(re.split(r"\.\s|\.$", phrases[-1].strip())[0]) or None
    if canonical_number(normalize(region)) is not None:
        return normalize(region)
    numbers = _ANY_NUMBER.findall(region)
    if numbers:
        return canonical_number(numbers[-1])
    return normalize(region) or None


def accuracy_reward(output: str | None, sample: QASample, *, require_tag: bool = False) -> float:
    """1.0 iff the extracted answer matches; MCQ accepts the letter or the option text."""
    truth = normalize(sample.answer)
    if sample.is_mcq:
        letter = extract_answer(output, "mcq_letter", require_tag=require_tag)
        if letter is not None:
            return 1.0 if letter == sample.answer_letter else 0.0
    got = extract_answer(output, "free_text", require_tag=require_tag)
    return 1.0 if got is not None and got == truth else 0.0


def _check(interval: Sequence[float]) -> tuple[float, float]:
    s, e = float(interval[0]), float(interval[1])
    if e < s:
        raise ValueError(f"malformed interval [{s}, {e}]: end before start")
    return s, e


def _overlap(pred, gt) -> tuple[float, float, float, float]:
    ps, pe = _check(pred)
    gs, ge = _check(gt)
    inter = max(0.0, min(pe, ge) - max(ps, gs))
    return inter, pe - ps, ge - gs, (pe - ps) + (ge - gs) - inter


def interval_iou(pred: Sequence[float], gt: Sequence[float]) -> float:
    inter, _, _, union = _overlap(pred, gt)
    return inter / union if union > 0 else 0.0


def interval_iop(pred: Sequence[float], gt: Sequence[float]) -> float:
    inter, plen, _, _ = _overlap(pred, gt)
    return inter / plen if plen > 0 else 0.0


def grounding_report(pairs: Iterable[tuple[Sequence[float], Sequence[float]]], thresholds=THRESHOLDS) -> dict:
    pairs = list(pairs)
    if not pairs:
        raise ValueError("grounding_report needs at least one (pred, gt) pair")
    ious = [interval_iou(p, g) for p, g in pairs]
    iops = [interval_iop(p, g) for p, g in pairs]
    n = len(pairs)
    report = {f"R@{t}": sum(1 for v in ious if v >= t) / n for t in thresholds}
    report["mIoU"] = sum(ious) / n
    report["mIoP"] = sum(iops) / n
    report["n"] = n
    return report
