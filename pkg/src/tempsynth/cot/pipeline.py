"""Generate, verify, reflect and polish reasoning chains for QA samples."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from string import Template
from typing import Callable, Mapping, Sequence

from ..metrics import accuracy_reward
from ..model import QASample
from ..qa import format_prompt
from .backends import BackendError, ChatBackend, VideoRef

MAX_ITERS = 5
STATUSES = ("verified", "filtered", "backend_error")
_VERDICT = re.compile(r"VERDICT:\s*(PASS|FAIL)", re.IGNORECASE)
_FEEDBACK = re.compile(r"FEEDBACK:\s*(.*)", re.IGNORECASE | re.DOTALL)


@lru_cache(maxsize=None)
def prompt_template(name: str) -> Template:
    text = resources.files("tempsynth").joinpath(f"data/prompts/{name}.txt").read_text(encoding="utf-8")
    return Template(text)


def _names(doc: Mapping) -> dict[str, str]:
    if doc.get("kind") != "shortterm":
        return {}
    return {o["id"]: f"{o['color']} {o['shape']}" for o in doc["params"]["objects"]}


def describe_event(event: Mapping, names: Mapping[str, str]) -> str:
    p = event["payload"]
    who = "the " + names.get(event["subject"], event["subject"])
    kind = event["kind"]
    if kind == "wall_contact":
        return f"{who} hits the {p['wall']} wall"
    if kind == "direction_change":
        return {"start": f"{who} starts moving", "stop": f"{who} stops"}.get(p["reason"], f"{who} changes direction")
    if kind == "attribute_change":
        if p["attribute"] == "size":
            return f"{who} {'grows' if p['new'] > p['old'] else 'shrinks'}"
        return f"{who} changes {p['attribute']} from {p['old']} to {p['new']}"
    if kind == "rotation_complete":
        return f"{who} completes rotation {p['count']}"
    if kind == "operation_applied":
        return f"step {p['op_index']}: {p['description']}"
    if kind == "phase_boundary":
        return {"initial_reveal": "the starting scene is shown", "operation": "the operations begin",
                "final_reveal": "the final scene is shown"}.get(p["phase"], p["phase"])
    return kind


def timeline_lines(doc: Mapping) -> list[str]:
    """One line per logged event, in log order."""
    names = _names(doc)
    return [f"{e['timestamp']} {describe_event(e, names)}" for e in doc["events"]]


def timeline_block(doc: Mapping) -> str:
    return "\n".join(timeline_lines(doc))


def scene_summary(doc: Mapping) -> str:
    lines = [f"duration {doc['duration']}"]
    names = _names(doc)
    if names:
        lines.append("objects: " + ", ".join(names.values()))
    if doc.get("kind") == "longterm":
        if doc["visible_state"] == "initial_only":
            lines.append("shown at the start: " + doc["initial_state"]["rendering"])
        else:
            lines.append("shown at the end: " + doc["final_state"]["rendering"])
    return "\n".join(lines)


def _video(sample: QASample, root: Path | None, doc: Mapping) -> VideoRef:
    path = Path(sample.video_path)
    if root is not None and not path.is_absolute():
        path = root / path
    render = doc.get("render") or {}
    return VideoRef(str(path), render.get("width", 448), render.get("height", 448))


def generate_cot(
    sample: QASample,
    doc: Mapping,
    backend: ChatBackend,
    *,
    feedback: str | None = None,
    previous: str | None = None,
    root: Path | None = None,
) -> tuple[str, str]:
    """(prompt, raw backend text). BackendError propagates to the caller."""
    prompt = prompt_template("generate").substitute(
        video=Path(sample.video_path).name,
        question=format_prompt(sample),
        answer=sample.answer,
        scene=scene_summary(doc),
        timeline=timeline_block(doc),
    )
    if feedback:
        prompt += prompt_template("reflect").substitute(previous=previous or "", feedback=feedback)
    return prompt, backend.send(prompt, _video(sample, root, doc))


@dataclass(frozen=True)
class Verdict:
    status: str  # pass | fail | inconclusive
    feedback: str = ""
    judged: bool = False

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def verify_cot(candidate: str, sample: QASample, doc: Mapping, judge: ChatBackend) -> Verdict:
    """Local answer check first; only candidates with the right answer reach the judge."""
    if not candidate or not candidate.strip():
        return Verdict("fail", "empty output")
    if accuracy_reward(candidate, sample) != 1.0:
        return Verdict("fail", f"the final answer is wrong; the correct answer is {sample.answer!r}")
    prompt = prompt_template("judge").substitute(
        question=format_prompt(sample), answer=sample.answer,
        timeline=timeline_block(doc), candidate=candidate,
    )
    try:
        reply = judge.send(prompt)
    except BackendError as exc:
        return Verdict("inconclusive", f"judge unavailable: {exc}", judged=True)
    m = _VERDICT.search(reply or "")
    if not m:
        return Verdict("inconclusive", "judge reply had no verdict", judged=True)
    fb = _FEEDBACK.search(reply)
    text = fb.group(1).strip() if fb else ""
    return Verdict("pass" if m.group(1).upper() == "PASS" else "fail", text, judged=True)


@dataclass(frozen=True)
class Iteration:
    candidate: str
    verdict: str
    feedback: str

    def to_dict(self) -> dict:
        return {"candidate": self.candidate, "verdict": self.verdict, "feedback": self.feedback}


@dataclass(frozen=True)
class CotRecord:
    sample_id: str
    iterations: tuple[Iteration, ...]
    final_status: str
    polished_cot: str | None = None
    polish_rejected: bool = False
    error: str | None = None

    def __post_init__(self) -> None:
        if self.final_status not in STATUSES:
            raise ValueError(f"unknown status {self.final_status!r}")
        verified = any(i.verdict == "pass" for i in self.iterations)
        if (self.final_status == "verified") != verified:
            raise ValueError("final_status must be verified exactly when an iteration passed")
        if (self.polished_cot is not None) != (self.final_status == "verified"):
            raise ValueError("polished_cot is present exactly for verified records")

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id, "final_status": self.final_status,
            "iterations": [i.to_dict() for i in self.iterations], "polished_cot": self.polished_cot,
            "polish_rejected": self.polish_rejected, "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CotRecord":
        return cls(
            d["sample_id"], tuple(Iteration(**i) for i in d["iterations"]), d["final_status"],
            d.get("polished_cot"), d.get("polish_rejected", False), d.get("error"),
        )


def process_sample(
    sample: QASample,
    doc: Mapping,
    generator: ChatBackend,
    judge: ChatBackend,
    polisher: ChatBackend | None,
    max_iters: int = MAX_ITERS,
    root: Path | None = None,
) -> CotRecord:
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    iterations: list[Iteration] = []
    feedback = previous = None
    for _ in range(max_iters):
        try:
            _, candidate = generate_cot(sample, doc, generator, feedback=feedback, previous=previous, root=root)
        except BackendError as exc:
            return CotRecord(sample.id, tuple(iterations), "backend_error", error=str(exc))
        verdict = verify_cot(candidate or "", sample, doc, judge)
        iterations.append(Iteration(candidate or "", verdict.status, verdict.feedback))
        if verdict.passed:
            break
        feedback, previous = verdict.feedback, candidate
    else:
        if all(i.verdict == "inconclusive" for i in iterations):
            return CotRecord(sample.id, tuple(iterations), "backend_error", error=iterations[-1].feedback)
        return CotRecord(sample.id, tuple(iterations), "filtered")

    chain = iterations[-1].candidate
    polished, rejected = chain, False
    if polisher is not None:
        try:
            text = polisher.send(prompt_template("polish").substitute(candidate=chain))
        except BackendError:
            text = ""
        if text and text.strip() and accuracy_reward(text, sample) == 1.0:
            polished = text
        else:
            rejected = True
    return CotRecord(sample.id, tuple(iterations), "verified", polished, rejected)


def run_pipeline(
    items: Sequence[tuple[QASample, Mapping]],
    generator: ChatBackend,
    judge: ChatBackend,
    polisher: ChatBackend | None = None,
    *,
    max_iters: int = MAX_ITERS,
    workers: int = 1,
    root: Path | None = None,
    on_record: Callable[[CotRecord], None] | None = None,
) -> list[CotRecord]:
    """Records come back in input order whatever the worker count."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    def one(item):
        rec = process_sample(item[0], item[1], generator, judge, polisher, max_iters, root)
        if on_record is not None:
            on_record(rec)
        return rec

    if workers <= 1:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, items))


def pipeline_stats(records: Sequence[CotRecord]) -> dict:
    n = len(records)
    count = {s: sum(1 for r in records if r.final_status == s) for s in STATUSES}
    return {
        "samples": n,
        **count,
        "verified_rate": count["verified"] / n if n else 0.0,
        "filter_rate": count["filtered"] / n if n else 0.0,
        "mean_iterations": sum(len(r.iterations) for r in records) / n if n else 0.0,
        "polish_rejected": sum(1 for r in records if r.polish_rejected),
    }


def load_records(path: str | Path) -> dict[str, CotRecord]:
    out: dict[str, CotRecord] = {}
    p = Path(path)
    if not p.exists():
        return out
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            rec = CotRecord.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError):
            continue  # a line cut short by an interrupt
        out[rec.sample_id] = rec
    return out
