"""Manifest validation: schema, files, choice invariants and replay soundness."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .dataset import SEED_RANGES
from .export import probe_video, read_metadata
from .longterm.families import rewind, rules
from .longterm.scripts import answer_historical_query
from .model import GenerationError, QASample, QuestionMode, ScenarioScript, SceneSpec, SpecError
from .shortterm.sim import simulate
from .shortterm.tasks import derive_answer

RULES = (
    "schema", "duplicate_id", "missing_video", "missing_metadata", "corrupt_video",
    "bad_choices", "answer_mismatch", "replay_mismatch", "seed_range",
)


@dataclass(frozen=True)
class Violation:
    sample_id: str
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"{self.sample_id}: [{self.rule}] {self.detail}"


def check_choices(rec: dict) -> str | None:
    choices, answer, idx = rec.get("choices"), rec.get("answer"), rec.get("answer_index")
    if choices is None:
        return "answer_index given without choices" if idx is not None else None
    if len(set(choices)) != len(choices):
        return "choices are not pairwise distinct"
    if choices.count(answer) != 1:
        return "answer does not appear exactly once among the choices"
    if not isinstance(idx, int) or not 0 <= idx < len(choices) or choices[idx] != answer:
        return "answer_index does not point at the answer"
    return None


def replay_answer(doc: dict) -> str:
    """Recompute the answer from the sidecar's parameters alone."""
    if doc["kind"] == "shortterm":
        spec = SceneSpec.from_dict(doc["params"])
        return derive_answer(spec, simulate(spec))
    script = ScenarioScript.from_dict(doc["params"])  # replays S_0 -> S_T on construction
    if rewind(script.final, script.operations) != script.initial:
        raise SpecError("inverse replay does not recover the initial state")
    r = rules(script.family)
    mode = QuestionMode(script.question_mode)
    if mode is QuestionMode.FORWARD:
        return r.view(script.final)
    if mode is QuestionMode.RETRODICTIVE:
        return r.view(script.initial)
    return answer_historical_query(script, script.query["op_index"], script.query["property"])


def _check_video(path: Path, doc: dict) -> str | None:
    try:
        info = probe_video(path)
    except (ValueError, OSError) as exc:
        return str(exc)
    render = doc.get("render") or {}
    if info.frames != doc.get("total_frames"):
        return f"{info.frames} frames, sidecar says {doc.get('total_frames')}"
    if (info.width, info.height) != (render.get("width", info.width), render.get("height", info.height)):
        return f"resolution {info.width}x{info.height} does not match the render config"
    if info.fps is not None and abs(info.fps - doc["fps"]) > 1e-6:
        return f"{info.fps} fps, sidecar says {doc['fps']}"
    return None


def validate_manifest(path: str | Path, *, check_videos: bool = True, purpose: str | None = None) -> list[Violation]:
    """Every violation found, each tagged with a rule from ``RULES``."""
    path = Path(path)
    root = path.parent
    out: list[Violation] = []
    records: list[dict] = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            for key in ("id", "video_path", "metadata_path", "task", "question", "answer"):
                if not isinstance(rec.get(key), str):
                    raise ValueError(f"field {key!r} missing or not a string")
        except ValueError as exc:
            out.append(Violation(f"line {n}", "schema", str(exc)))
            continue
        records.append(rec)

    counts = Counter(r["id"] for r in records)
    for sid, c in sorted(counts.items()):
        if c > 1:
            out.append(Violation(sid, "duplicate_id", f"id appears {c} times"))

    for rec in records:
        sid = rec["id"]
        problem = check_choices(rec)
        if problem:
            out.append(Violation(sid, "bad_choices", problem))
        else:
            try:
                QASample.from_dict(rec)
            except (SpecError, KeyError, TypeError) as exc:
                out.append(Violation(sid, "schema", str(exc)))

        video, meta = root / rec["video_path"], root / rec["metadata_path"]
        if not video.exists():
            out.append(Violation(sid, "missing_video", rec["video_path"]))
        if not meta.exists():
            out.append(Violation(sid, "missing_metadata", rec["metadata_path"]))
            continue
        try:
            doc = read_metadata(meta)
        except ValueError as exc:
            out.append(Violation(sid, "schema", f"unreadable sidecar: {exc}"))
            continue

        if check_videos and video.exists():
            problem = _check_video(video, doc)
            if problem:
                out.append(Violation(sid, "corrupt_video", problem))
        if doc.get("answer") != rec["answer"]:
            out.append(Violation(sid, "answer_mismatch", f"manifest {rec['answer']!r} vs sidecar {doc.get('answer')!r}"))
        try:
            replayed = replay_answer(doc)
        except (SpecError, GenerationError, KeyError, IndexError, TypeError, ValueError) as exc:
            out.append(Violation(sid, "replay_mismatch", f"replay failed: {exc}"))
        else:
            if replayed != doc.get("answer"):
                out.append(Violation(sid, "replay_mismatch", f"replay gives {replayed!r}, sidecar says {doc.get('answer')!r}"))

        declared = purpose or rec.get("provenance", {}).get("purpose")
        seed = doc.get("seed")
        if declared is not None:
            if declared not in SEED_RANGES:
                out.append(Violation(sid, "seed_range", f"unknown purpose {declared!r}"))
            else:
                lo, hi = SEED_RANGES[declared]
                if not isinstance(seed, int) or not lo <= seed < hi:
                    out.append(Violation(sid, "seed_range", f"seed {seed} outside the {declared} range [{lo}, {hi})"))
    return out


def seed_overlap(manifests: Iterable[str | Path]) -> list[Violation]:
    """Seeds shared between manifests (RL and CoT data must be disjoint)."""
    owner: dict[int, str] = {}
    out = []
    for m in manifests:
        for line in Path(m).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            seed = rec.get("provenance", {}).get("seed")
            if seed in owner and owner[seed] != str(m):
                out.append(Violation(rec["id"], "seed_range", f"seed {seed} also used in {owner[seed]}"))
            owner.setdefault(seed, str(m))
    return out
