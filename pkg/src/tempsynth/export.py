"""Video encoding, metadata sidecars and JSONL manifests."""

from __future__ import annotations

import io
import json
import os
import re
import shutil
import subprocess
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from PIL import Image

from . import GENERATOR_VERSION
from .model import (
    METADATA_SCHEMA_VERSION,
    EventRecord,
    GenerationError,
    GroundTruth,
    QASample,
    ScenarioScript,
    SceneSpec,
    format_timestamp,
    sort_events,
)


class EncoderMissing(GenerationError):
    pass


class EncoderFailed(GenerationError):
    pass


class ManifestError(ValueError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class EncoderConfig:
    binary: str | None = None  # None: ffmpeg on PATH, then the imageio-ffmpeg build
    codec: str = "libx264"
    preset: str = "veryfast"
    crf: int = 18
    pix_fmt: str = "yuv420p"

    def to_dict(self) -> dict:
        return {"codec": self.codec, "preset": self.preset, "crf": self.crf, "pix_fmt": self.pix_fmt}


def find_encoder(binary: str | None = None) -> str:
    if binary:
        found = shutil.which(binary) or (binary if os.path.isfile(binary) else None)
        if not found:
            raise EncoderMissing(f"encoder {binary!r} not found")
        return found
    found = shutil.which("ffmpeg")
    if found:
        return found
    try:
        import imageio_ffmpeg

        return imageio_ffmpeg.get_ffmpeg_exe()
    except (ImportError, RuntimeError):
        pass
    raise EncoderMissing(
        "ffmpeg is required to write MP4 files; install ffmpeg (or `pip install imageio-ffmpeg`), "
        "or pass --image-sequence to write numbered PNG frames instead"
    )


def encoder_available(binary: str | None = None) -> bool:
    try:
        find_encoder(binary)
    except EncoderMissing:
        return False
    return True


def _check_dims(width: int, height: int) -> None:
    if width % 2 or height % 2:
        raise ValueError(f"H.264 output needs even dimensions, got {width}x{height}")


def encode_video(
    frames: Iterable[bytes],
    width: int,
    height: int,
    fps: int,
    out_path: str | os.PathLike,
    enc: EncoderConfig = EncoderConfig(),
) -> int:
    """Pipe raw RGB24 frames into ffmpeg; returns the number of frames written."""
    _check_dims(width, height)
    exe = find_encoder(enc.binary)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    cmd = [
        exe, "-y", "-loglevel", "error",
        "-f", "rawvideo", "-pix_fmt", "rgb24", "-s", f"{width}x{height}", "-r", str(fps), "-i", "-",
        "-an", "-c:v", enc.codec, "-preset", enc.preset, "-crf", str(enc.crf), "-pix_fmt", enc.pix_fmt,
        "-r", str(fps), str(out_path),
    ]
    frame_size = width * height * 3
    count = 0
    with tempfile.TemporaryFile() as errlog:
        proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.DEVNULL, stderr=errlog)
        error: Exception | None = None
        try:
            for buf in frames:
                if len(buf) != frame_size:
                    raise ValueError(f"frame {count} has {len(buf)} bytes, expected {frame_size}")
                proc.stdin.write(buf)
                count += 1
        except (BrokenPipeError, ValueError) as exc:
            error = exc
        finally:
            try:
                proc.stdin.close()
            except BrokenPipeError:
                pass
            code = proc.wait()
        errlog.seek(0)
        diagnostics = errlog.read().decode("utf-8", "replace").strip()
    if error is None and count == 0:
        error = ValueError("no frames to encode")
    if error is not None or code != 0:
        out_path.unlink(missing_ok=True)
        if isinstance(error, ValueError):
            raise error
        raise EncoderFailed(f"encoder exited with status {code}: {diagnostics[-2000:] or 'no diagnostics'}")
    return count


def write_image_sequence(frames: Iterable[bytes], width: int, height: int, out_dir: str | os.PathLike) -> int:
    """Numbered PNG fallback: ``frame_00000.png``, ``frame_00001.png``, ..."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    last, png = None, b""
    count = 0
    for buf in frames:
        if buf is not last and buf != last:
            out = io.BytesIO()
            Image.frombytes("RGB", (width, height), buf).save(out, format="PNG", compress_level=1)
            png = out.getvalue()
            last = buf
        (out_dir / f"frame_{count:05d}.png").write_bytes(png)
        count += 1
    if count == 0:
        raise ValueError("no frames to write")
    return count


@dataclass(frozen=True)
class VideoInfo:
    width: int
    height: int
    fps: float | None
    frames: int
    codec: str

    @property
    def duration_s(self) -> float | None:
        return None if not self.fps else self.frames / self.fps


_STREAM = re.compile(r"Video: (\w+).*?, (\d{2,5})x(\d{2,5})")
_FPS = re.compile(r"([\d.]+) fps")
_FRAMES = re.compile(r"frame=\s*(\d+)")


def probe_video(path: str | os.PathLike, binary: str | None = None) -> VideoInfo:
    """Stream facts for an MP4 (full decode) or a PNG frame directory."""
    path = Path(path)
    if path.is_dir():
        pngs = sorted(path.glob("frame_*.png"))
        if not pngs:
            raise ValueError(f"{path}: no frames")
        with Image.open(pngs[0]) as im:
            w, h = im.size
        return VideoInfo(w, h, None, len(pngs), "png")
    if not path.is_file():
        raise FileNotFoundError(path)
    exe = find_encoder(binary)
    proc = subprocess.run(
        [exe, "-hide_banner", "-i", str(path), "-map", "0:v:0", "-f", "null", "-"],
        capture_output=True, text=True,
    )
    err = proc.stderr
    stream = _STREAM.search(err)
    frames = _FRAMES.findall(err)
    if proc.returncode != 0 or not stream or not frames:
        raise ValueError(f"{path}: unreadable video ({err.strip()[-300:]})")
    fps = _FPS.search(err[stream.start():])
    return VideoInfo(
        width=int(stream.group(2)),
        height=int(stream.group(3)),
        fps=float(fps.group(1)) if fps else None,
        frames=int(frames[-1]),
        codec=stream.group(1),
    )


# --------------------------------------------------------------------------
# Sidecars


def sidecar_path(video_path: str | os.PathLike) -> Path:
    p = Path(video_path)
    if p.name.endswith(".frames"):
        return p.with_name(p.name[: -len(".frames")] + ".json")
    return p.with_suffix(".json")


def build_metadata(
    source: SceneSpec | ScenarioScript,
    events: Sequence[EventRecord],
    truth: GroundTruth,
    *,
    fps: int,
    total_frames: int,
    phases: Sequence = (),
    render: Mapping | None = None,
    encoding: Mapping | None = None,
    extra: Mapping | None = None,
) -> dict:
    ordered = sort_events(events)
    if list(events) != ordered:
        raise ValueError("events must be sorted by (frame_index, subject, kind)")
    doc: dict = {
        "schema_version": METADATA_SCHEMA_VERSION,
        "generator_version": GENERATOR_VERSION,
        "seed": source.seed,
        "fps": fps,
        "total_frames": total_frames,
        "duration": format_timestamp(total_frames / fps),
        "phases": [{"name": p.name, "start": p.start, "end": p.end} for p in phases],
        "events": [e.to_dict() for e in ordered],
        "answer": truth.answer,
        "ground_truth": truth.to_dict(),
        "render": dict(render or {}),
        "encoding": dict(encoding or {}),
    }
    if isinstance(source, SceneSpec):
        doc.update(kind="shortterm", task=source.task_type, params=source.to_dict())
    else:
        from .longterm.families import rules

        r = rules(source.family)
        doc.update(
            kind="longterm", task=source.family, question_mode=source.question_mode,
            visible_state=source.visible_state, params=source.to_dict(),
            initial_state={**source.initial.to_dict(), "rendering": r.render(source.initial)},
            final_state={**source.final.to_dict(), "rendering": r.render(source.final)},
            operations=[{"op_index": op.op_index, "description": r.describe(op)} for op in source.operations],
        )
    if extra:
        doc.update(extra)
    return doc


def write_metadata(doc: Mapping, out_path: str | os.PathLike) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_name(out_path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, out_path)
    return out_path


def read_metadata(path: str | os.PathLike) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != METADATA_SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported metadata schema {doc.get('schema_version')!r}")
    return doc


def metadata_source(doc: Mapping) -> SceneSpec | ScenarioScript:
    if doc["kind"] == "shortterm":
        return SceneSpec.from_dict(doc["params"])
    return ScenarioScript.from_dict(doc["params"])


def metadata_events(doc: Mapping) -> list[EventRecord]:
    return [EventRecord.from_dict(e) for e in doc["events"]]


# --------------------------------------------------------------------------
# Manifests


@dataclass
class ManifestWriter:
    """Single appender for JSONL manifests; rejects duplicate ids as they arrive."""

    path: Path
    seen: set = field(default_factory=set)

    def __post_init__(self) -> None:
        self.path = Path(self.path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")

    def append(self, sample: QASample) -> None:
        if sample.id in self.seen:
            raise ManifestError([f"duplicate id {sample.id!r}"])
        self.seen.add(sample.id)
        self._fh.write(json.dumps(sample.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "ManifestWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def dangling_refs(samples: Iterable[QASample], root: Path) -> list[str]:
    problems = []
    for s in samples:
        for key in ("video_path", "metadata_path"):
            if not (root / getattr(s, key)).exists():
                problems.append(f"{s.id}: {key} {getattr(s, key)} does not exist")
    return problems


def write_manifest(samples: Sequence[QASample], out_path: str | os.PathLike, *, check_files: bool = True) -> Path:
    """One JSON record per line; paths are resolved relative to the manifest."""
    out_path = Path(out_path)
    counts = Counter(s.id for s in samples)
    problems = [f"duplicate id {i!r}" for i, n in sorted(counts.items()) if n > 1]
    if check_files:
        problems += dangling_refs(samples, out_path.parent)
    if problems:
        raise ManifestError(problems)
    with ManifestWriter(out_path) as w:
        for s in samples:
            w.append(s)
    return out_path


def read_manifest(path: str | os.PathLike) -> list[QASample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(QASample.from_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ManifestError([f"line {n}: {exc}"]) from exc
    return out
