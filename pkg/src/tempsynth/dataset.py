"""Batch dataset generation: config -> jobs -> videos, sidecars and a manifest."""

from __future__ import annotations

import json
import multiprocessing as mp
import os
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Mapping

import yaml

from .export import (
    EncoderConfig,
    ManifestWriter,
    build_metadata,
    encode_video,
    sidecar_path,
    write_image_sequence,
    write_metadata,
)
from .longterm.scripts import generate_longterm_sample
from .model import Family, GenerationError, QASample, QuestionMode, ShortTask, SpecError
from .qa import instantiate
from .render.plan import RenderConfig, longterm_events, plan_longterm, plan_shortterm
from .render.raster import rasterize
from .rng import new_rng
from .shortterm.tasks import generate_shortterm_sample

# RL-destined and CoT-destined data never share seeds
SEED_RANGES = {"rl": (0, 1_000_000_000), "cot": (1_000_000_000, 2_000_000_000)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GenerateConfig:
    output: str = "dataset"
    purpose: str = "rl"  # rl | cot; picks the seed range
    seed: int = 0  # offset inside the purpose's seed range
    profile: str = "standard"
    width: int = 448
    height: int = 448
    fps: int = 30
    image_sequence: bool = False
    workers: int = 1
    max_retries: int = 20
    crf: int = 18
    preset: str = "veryfast"
    encoder: str | None = None
    timestamp_longterm: bool = True
    timestamp_shortterm: bool = False
    # {task: count}; "all" applies to every task
    shortterm: Mapping[str, int] = field(default_factory=dict)
    # {family: count} split over modes, or {family: {mode: count}}
    longterm: Mapping[str, Any] = field(default_factory=dict)
    # {total, shortterm_fraction}: round-robin over tasks and (family, mode) pairs
    mix: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.purpose not in SEED_RANGES:
            raise ConfigError(f"purpose must be one of {sorted(SEED_RANGES)}")
        if self.profile not in ("standard", "hard"):
            raise ConfigError("profile must be 'standard' or 'hard'")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for task in self.shortterm:
            if task != "all" and task not in {t.value for t in ShortTask}:
                raise ConfigError(f"unknown short-term task {task!r}")
        for fam, spec in self.longterm.items():
            if fam != "all" and fam not in {f.value for f in Family}:
                raise ConfigError(f"unknown family {fam!r}")
            if isinstance(spec, Mapping):
                for mode in spec:
                    if mode not in {m.value for m in QuestionMode}:
                        raise ConfigError(f"unknown question mode {mode!r}")
        if self.mix and not 0.0 <= float(self.mix.get("shortterm_fraction", 0.5)) <= 1.0:
            raise ConfigError("mix.shortterm_fraction must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d: Mapping) -> "GenerateConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | os.PathLike | None, overrides: Mapping[str, Any] | None = None) -> "GenerateConfig":
        doc = {}
        if path is not None:
            doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        for key, value in (overrides or {}).items():
            _set_path(doc, key.split("."), value)
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @property
    def render(self) -> RenderConfig:
        return RenderConfig(self.width, self.height, self.fps, timestamp_longterm=self.timestamp_longterm,
                            timestamp_shortterm=self.timestamp_shortterm)

    @property
    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(binary=self.encoder, crf=self.crf, preset=self.preset)


def _set_path(doc: dict, keys: list[str], value: Any) -> None:
    for k in keys[:-1]:
        doc = doc.setdefault(k, {})
    doc[keys[-1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    """``key.sub=value`` with the value parsed as YAML (so 3 -> int, true -> bool)."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not key=value")
    return key.strip(), yaml.safe_load(raw)


@dataclass(frozen=True)
class Job:
    index: int
    kind: str  # shortterm | longterm
    group: str  # task type or family
    mode: str | None
    seed: int

    @property
    def sample_id(self) -> str:
        if self.kind == "shortterm":
            return f"{self.group}-{self.seed:010d}"
        return f"{self.group}-{self.mode}-{self.seed:010d}"


def plan_jobs(cfg: GenerateConfig) -> list[Job]:
    """Deterministic job list; sample k gets seed range_start + cfg.seed + k."""
    specs: list[tuple[str, str, str | None]] = []
    tasks = [t.value for t in ShortTask]
    for task in tasks:
        n = int(cfg.shortterm.get(task, cfg.shortterm.get("all", 0)))
        specs += [("shortterm", task, None)] * n
    modes = [m.value for m in QuestionMode]
    for fam in (f.value for f in Family):
        spec = cfg.longterm.get(fam, cfg.longterm.get("all", 0))
        if isinstance(spec, Mapping):
            for mode in modes:
                specs += [("longterm", fam, mode)] * int(spec.get(mode, 0))
        else:
            for k in range(int(spec)):
                specs.append(("longterm", fam, modes[k % len(modes)]))
    if cfg.mix:
        total = int(cfg.mix.get("total", 0))
        n_short = int(round(total * float(cfg.mix.get("shortterm_fraction", 0.5))))
        pairs = [(f.value, m) for f in Family for m in modes]
        specs += [("shortterm", tasks[k % len(tasks)], None) for k in range(n_short)]
        specs += [("longterm", *pairs[k % len(pairs)]) for k in range(total - n_short)]
    lo, hi = SEED_RANGES[cfg.purpose]
    if lo + cfg.seed + len(specs) > hi:
        raise ConfigError("seed offset plus sample count overflows the seed range")
    return [Job(k, kind, group, mode, lo + cfg.seed + k) for k, (kind, group, mode) in enumerate(specs)]


@dataclass(frozen=True)
class JobResult:
    job: Job
    sample: dict | None
    retries: int = 0
    frames: int = 0
    error: str | None = None


def produce(job: Job, cfg: GenerateConfig, root: Path) -> JobResult:
    """Generate, render, export and phrase one sample; pure in (job, cfg)."""
    rng = new_rng(job.seed)
    rcfg = cfg.render
    try:
        if job.kind == "shortterm":
            s = generate_shortterm_sample(job.group, rng, seed=job.seed, width=cfg.width, height=cfg.height,
                                          fps=cfg.fps, profile=cfg.profile, max_retries=cfg.max_retries)
            source, truth, retries = s.spec, s.truth, s.retries
            plan, events = plan_shortterm(s.trace, rcfg), list(s.trace.events)
        else:
            s = generate_longterm_sample(job.group, job.mode, rng, seed=job.seed, profile=cfg.profile,
                                         max_retries=cfg.max_retries)
            source, truth, retries = s.script, s.truth, s.retries
            plan, events = plan_longterm(s.script, rcfg), longterm_events(s.script, cfg.fps)

        rel_video = Path("videos") / (job.sample_id + (".frames" if cfg.image_sequence else ".mp4"))
        rel_meta = sidecar_path(rel_video)
        frames = rasterize(plan, rcfg.antialias)
        if cfg.image_sequence:
            n = write_image_sequence(frames, cfg.width, cfg.height, root / rel_video)
            encoding = {"format": "png-sequence"}
        else:
            n = encode_video(frames, cfg.width, cfg.height, cfg.fps, root / rel_video, cfg.encoder_config)
            encoding = {"format": "mp4", **cfg.encoder_config.to_dict()}
        doc = build_metadata(
            source, events, truth, fps=cfg.fps, total_frames=len(plan), phases=plan.phases,
            render=rcfg.to_dict(), encoding=encoding,
            extra={"sample_id": job.sample_id, "purpose": cfg.purpose, "profile": cfg.profile},
        )
        write_metadata(doc, root / rel_meta)
        sample = instantiate(job.group, truth, doc, rng, sample_id=job.sample_id,
                             video_path=rel_video.as_posix(), metadata_path=rel_meta.as_posix())
        sample = replace(sample, provenance={**sample.provenance, "purpose": cfg.purpose, "profile": cfg.profile})
        return JobResult(job, sample.to_dict(), retries, n)
    except (GenerationError, SpecError, ValueError, OSError) as exc:
        return JobResult(job, None, error=f"{type(exc).__name__}: {exc}")


def _worker(args) -> JobResult:
    job, cfg, root = args
    return produce(job, cfg, root)


def iter_results(jobs: list[Job], cfg: GenerateConfig, root: Path) -> Iterator[JobResult]:
    """Results in job order, produced by ``cfg.workers`` processes."""
    work = [(j, cfg, root) for j in jobs]
    if cfg.workers == 1 or len(jobs) < 2:
        for w in work:
            yield _worker(w)
        return
    with mp.get_context("spawn" if os.name == "nt" else "fork").Pool(cfg.workers) as pool:
        yield from pool.imap(_worker, work, chunksize=1)


@dataclass
class GenerateReport:
    requested: int
    produced: int
    failures: list[dict]
    summary: dict

    @property
    def ok(self) -> bool:
        return not self.failures and self.produced == self.requested


def generate_dataset(cfg: GenerateConfig, progress=None) -> GenerateReport:
    root = Path(cfg.output)
    root.mkdir(parents=True, exist_ok=True)
    jobs = plan_jobs(cfg)
    start = time.perf_counter()
    failures: list[dict] = []
    per_type: Counter = Counter()
    retries: Counter = Counter()
    frames = 0
    with ManifestWriter(root / "manifest.jsonl") as manifest:
        for k, res in enumerate(iter_results(jobs, cfg, root), 1):
            if res.sample is None:
                failures.append({"id": res.job.sample_id, "seed": res.job.seed, "kind": res.job.kind,
                                 "group": res.job.group, "mode": res.job.mode, "error": res.error})
            else:
                manifest.append(QASample.from_dict(res.sample))
                per_type[res.job.group if res.job.mode is None else f"{res.job.group}/{res.job.mode}"] += 1
                retries[res.retries] += 1
                frames += res.frames
            if progress is not None:
                progress(k, len(jobs), res)
    wall = time.perf_counter() - start
    (root / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8")
    summary = {
        "requested": len(jobs),
        "produced": len(jobs) - len(failures),
        "failed": failures,
        "per_type": dict(sorted(per_type.items())),
        "retry_histogram": {str(k): v for k, v in sorted(retries.items())},
        "frames": frames,
        "wall_time_s": round(wall, 3),
        "purpose": cfg.purpose,
        "seed_range": list(SEED_RANGES[cfg.purpose]),
    }
    (root / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return GenerateReport(len(jobs), len(jobs) - len(failures), failures, summary)
