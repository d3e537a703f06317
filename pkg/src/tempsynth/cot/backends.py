"""Chat backends: an OpenAI-compatible HTTP client and deterministic mocks."""

from __future__ import annotations

import base64
import io
import os
import re
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx
from PIL import Image

TIMESTAMP = re.compile(r"\b(\d{2}:\d{2}(?:\.\d{3})?)\b")


class BackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class VideoRef:
    path: str
    width: int = 448
    height: int = 448


class ChatBackend(Protocol):
    def send(self, prompt: str, video: VideoRef | None = None) -> str: ...


def section(prompt: str, name: str) -> str:
    """Text between ``### NAME`` and the next ``###`` marker."""
    m = re.search(rf"^### {name}\n(.*?)^###", prompt, re.MULTILINE | re.DOTALL)
    return m.group(1).strip() if m else ""


# --------------------------------------------------------------------------
# HTTP


@dataclass
class BackendConfig:
    endpoint: str = "http://localhost:8000/v1"
    model: str = "default"
    api_key_env: str = "OPENAI_API_KEY"
    timeout_s: float = 120.0
    retries: int = 2
    backoff_s: float = 1.0
    max_concurrent: int = 4
    video_mode: str = "path"  # path | frames
    frame_stride: int = 15
    temperature: float = 0.7

    @classmethod
    def from_dict(cls, d: dict) -> "BackendConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def sample_frames(video: VideoRef, stride: int) -> list[bytes]:
    """Every ``stride``-th frame as PNG bytes, from an MP4 or a PNG frame directory."""
    path = Path(video.path)
    if path.is_dir():
        return [p.read_bytes() for p in sorted(path.glob("frame_*.png"))[::stride]]
    from ..export import find_encoder

    raw = subprocess.run(
        [find_encoder(), "-loglevel", "error", "-i", str(path), "-f", "rawvideo", "-pix_fmt", "rgb24", "-"],
        capture_output=True, check=True,
    ).stdout
    size = video.width * video.height * 3
    out = []
    for i in range(0, len(raw) // size, stride):
        buf = io.BytesIO()
        Image.frombytes("RGB", (video.width, video.height), raw[i * size: (i + 1) * size]).save(buf, format="PNG")
        out.append(buf.getvalue())
    return out


class OpenAIBackend:
    """POSTs to ``{endpoint}/chat/completions``; retries transport errors and 5xx."""

    def __init__(self, cfg: BackendConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        headers = {}
        key = os.environ.get(cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = client or httpx.Client(timeout=cfg.timeout_s, headers=headers)
        self._slots = threading.BoundedSemaphore(max(1, cfg.max_concurrent))

    def _content(self, prompt: str, video: VideoRef | None) -> list[dict]:
        parts: list[dict] = []
        if video is not None:
            if self.cfg.video_mode == "frames":
                for png in sample_frames(video, self.cfg.frame_stride):
                    url = "data:image/png;base64," + base64.b64encode(png).decode("ascii")
                    parts.append({"type": "image_url", "image_url": {"url": url}})
            else:
                parts.append({"type": "video_url", "video_url": {"url": Path(video.path).resolve().as_uri()}})
        parts.append({"type": "text", "text": prompt})
        return parts

    def send(self, prompt: str, video: VideoRef | None = None) -> str:
        body = {
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": self._content(prompt, video)}],
        }
        url = self.cfg.endpoint.rstrip("/") + "/chat/completions"
        last = "no attempt made"
        for attempt in range(self.cfg.retries + 1):
            if attempt:
                time.sleep(self.cfg.backoff_s * attempt)
            try:
                with self._slots:
                    resp = self.client.post(url, json=body)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"malformed response from {url}: {exc}") from exc
        raise BackendError(f"{url} failed after {self.cfg.retries + 1} attempts: {last}")


# --------------------------------------------------------------------------
# Mocks


@dataclass
class MockGenerator:
    """Narrates the reference timeline and ends with the answer from the prompt.

    ``mode``: ``echo`` (faithful), ``wrong`` (bad final answer),
    ``bad_timestamps`` (every time shifted by 3 s) or ``empty``.
    ``fail_first`` makes the first n calls raise BackendError.
    ``fix_on_feedback`` switches to ``echo`` once the prompt carries feedback.
    """

    mode: str = "echo"
    fail_first: int = 0
    fix_on_feedback: bool = False
    calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def send(self, prompt: str, video: VideoRef | None = None) -> str:
        with self._lock:
            self.calls += 1
            n = self.calls
        if n <= self.fail_first:
            raise BackendError("mock generator unavailable")
        mode = self.mode
        if self.fix_on_feedback and section(prompt, "FEEDBACK"):
            mode = "echo"
        if mode == "empty":
            return ""
        lines = ["Watching the video from the start:"]
        for line in section(prompt, "TIMELINE").splitlines():
            if mode == "bad_timestamps":
                line = TIMESTAMP.sub(lambda m: _shift(m.group(1), 3.0), line)
            lines.append(f"- At {line}.")
        answer = "none of these" if mode == "wrong" else section(prompt, "ANSWER")
        lines.append(f"So the final answer is <answer>{answer}</answer>")
        return "\n".join(lines)


def _shift(stamp: str, seconds: float) -> str:
    mm, ss = stamp.split(":")
    total = int(mm) * 60 + float(ss) + seconds
    out = f"{int(total // 60):02d}:{total % 60:06.3f}"
    return out if "." in stamp else out[:5]


@dataclass
class MockJudge:
    """``pass`` / ``fail`` unconditionally, or ``strict``: every time cited in
    the candidate must appear in the reference timeline."""

    mode: str = "pass"
    fail_first: int = 0
    calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def send(self, prompt: str, video: VideoRef | None = None) -> str:
        with self._lock:
            self.calls += 1
            n = self.calls
        if n <= self.fail_first:
            raise BackendError("mock judge unavailable")
        if self.mode == "fail":
            return "VERDICT: FAIL\nFEEDBACK: the reasoning does not follow the event sequence."
        if self.mode == "strict":
            logged = set(TIMESTAMP.findall(section(prompt, "TIMELINE")))
            logged |= {t[:5] for t in logged}
            cited = TIMESTAMP.findall(section(prompt, "CANDIDATE"))
            bad = [t for t in cited if t not in logged]
            if bad:
                return f"VERDICT: FAIL\nFEEDBACK: no event is logged at {bad[0]}; check the timeline."
        return "VERDICT: PASS\nFEEDBACK: consistent with the timeline."


@dataclass
class MockPolisher:
    """Light rewording; ``flip`` replaces the final answer to exercise the safety check."""

    flip: bool = False
    calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def send(self, prompt: str, video: VideoRef | None = None) -> str:
        with self._lock:
            self.calls += 1
        text = section(prompt, "CANDIDATE").replace("Watching the video from the start:", "Here is what I see.")
        text = text.replace("- At ", "At ")
        if self.flip:
            text = re.sub(r"<answer>.*?</answer>", "<answer>something else</answer>", text, flags=re.DOTALL)
        return text


def make_backend(spec: str | dict) -> ChatBackend:
    """``mock-generator:<mode>``, ``mock-judge:<mode>`` or ``mock-polisher[:flip]``
    build mocks; dicts configure the HTTP client."""
    if isinstance(spec, str):
        kind, _, mode = spec.partition(":")
        if kind == "mock-generator":
            return MockGenerator(mode or "echo")
        if kind == "mock-judge":
            return MockJudge(mode or "pass")
        if kind == "mock-polisher":
            return MockPolisher(flip=mode == "flip")
        raise ValueError(f"unknown backend {spec!r}")
    return OpenAIBackend(BackendConfig.from_dict(spec))
