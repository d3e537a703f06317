"""Domain types shared by every stage of the generator.

All records are frozen dataclasses. Each has ``to_dict``/``from_dict`` that
map to plain JSON-compatible structures; ``from_dict(to_dict(x)) == x`` holds
for every type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Sequence


class SpecError(ValueError):
    """A record violates one of its construction invariants."""


class GenerationError(RuntimeError):
    """A randomly drawn scene cannot be turned into an unambiguous sample."""


class AmbiguousScene(GenerationError):
    pass


class RetriesExhausted(GenerationError):
    def __init__(self, what: str, attempts: int, last_params: Any, last_error: Exception | None):
        super().__init__(f"{what}: no unambiguous sample after {attempts} attempts; last error: {last_error}")
        self.attempts = attempts
        self.last_params = last_params
        self.last_error = last_error


class Shape(str, Enum):
    CIRCLE = "circle"
    SQUARE = "square"
    TRIANGLE = "triangle"
    STAR = "star"


# Names must stay unambiguous inside question text.
PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (220, 40, 40),
    "green": (40, 160, 60),
    "blue": (40, 80, 220),
    "yellow": (230, 190, 20),
    "purple": (140, 60, 190),
    "orange": (245, 130, 20),
    "cyan": (20, 180, 200),
    "pink": (240, 110, 170),
}
COLORS = tuple(PALETTE)


class ShortTask(str, Enum):
    COLLISION_COUNTING = "collision_counting"
    DIRECTION_IDENTIFICATION = "direction_identification"
    TRAJECTORY_SHAPE = "trajectory_shape"
    SPEED_PERCEPTION = "speed_perception"
    MOTION_COUNTING = "motion_counting"
    ATTRIBUTE_CHANGE = "attribute_change"
    ROTATION_COUNTING = "rotation_counting"
    RELATIVE_POSITION = "relative_position"
    ACCELERATION_DETECTION = "acceleration_detection"
    VELOCITY_COMPARISON = "velocity_comparison"
    DISTANCE_ESTIMATION = "distance_estimation"
    SEQUENTIAL_ORDERING = "sequential_ordering"


class Family(str, Enum):
    CARD_STACK = "card_stack"
    CHIP_CONTAINERS = "chip_containers"
    FILE_SYSTEM = "file_system"
    SYMBOL_ARITHMETIC = "symbol_arithmetic"
    SHELL_GAME = "shell_game"
    SLIDING_PUZZLE = "sliding_puzzle"


class QuestionMode(str, Enum):
    FORWARD = "forward_prediction"
    RETRODICTIVE = "retrodictive_inference"
    HISTORICAL = "historical_query"


class VisibleState(str, Enum):
    INITIAL_ONLY = "initial_only"
    FINAL_ONLY = "final_only"


class EventKind(str, Enum):
    WALL_CONTACT = "wall_contact"
    DIRECTION_CHANGE = "direction_change"
    ATTRIBUTE_CHANGE = "attribute_change"
    ROTATION_COMPLETE = "rotation_complete"
    OPERATION_APPLIED = "operation_applied"
    PHASE_BOUNDARY = "phase_boundary"


PATHS = ("linear", "circular", "zigzag", "hops")
ATTRIBUTES = ("color", "size", "shape")

MIN_CANVAS = 64
MAX_SPEED = 600.0  # px/s
MAX_ANGULAR_SPEED = 1080.0  # deg/s


def frame_count(duration_s: float, fps: float) -> int:
    """``ceil(duration * fps)``, robust to float noise such as 4.1 * 30."""
    return math.ceil(round(duration_s * fps, 9))


def format_timestamp(seconds: float) -> str:
    """``MM:SS.mmm``."""
    ms = int(round(seconds * 1000))
    minutes, rem = divmod(ms, 60_000)
    return f"{minutes:02d}:{rem // 1000:02d}.{rem % 1000:03d}"


def format_clock(seconds: float) -> str:
    """``MM:SS`` with the seconds floored, as shown on the overlay."""
    whole = int(math.floor(seconds + 1e-9))
    return f"{whole // 60:02d}:{whole % 60:02d}"


def deep_tuple(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return tuple(deep_tuple(v) for v in value)
    return value


def deep_list(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return [deep_list(v) for v in value]
    if isinstance(value, Mapping):
        return {k: deep_list(v) for k, v in value.items()}
    return value


# --------------------------------------------------------------------------
# Short-term scenes


@dataclass(frozen=True)
class AttributeChange:
    time_s: float
    attribute: str
    value: Any  # color/shape name or size in px

    def __post_init__(self) -> None:
        if self.attribute not in ATTRIBUTES:
            raise SpecError(f"unknown attribute {self.attribute!r}")
        if self.attribute == "color" and self.value not in PALETTE:
            raise SpecError(f"color {self.value!r} not in palette")
        if self.attribute == "shape" and self.value not in {s.value for s in Shape}:
            raise SpecError(f"unknown shape {self.value!r}")
        if self.attribute == "size" and not float(self.value) > 0:
            raise SpecError("size must be positive")

    def to_dict(self) -> dict:
        return {"time_s": self.time_s, "attribute": self.attribute, "value": self.value}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributeChange":
        return cls(d["time_s"], d["attribute"], d["value"])


@dataclass(frozen=True)
class ObjectSpec:
    """One moving glyph.

    ``path`` selects the motion template. ``linear`` objects move at
    ``velocity`` (changed only by ``acceleration`` along the heading) and
    reflect off walls. ``circular`` objects turn at ``turn_rate`` deg/s.
    ``zigzag`` objects alternate their heading +/-45 degrees around the
    velocity direction every ``zigzag_period_s``. ``hops`` objects move only
    inside the ``hops`` windows and rest otherwise.
    """

    id: str
    shape: str
    color: str
    size: float
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    angular_velocity: float = 0.0
    acceleration: float = 0.0
    path: str = "linear"
    turn_rate: float = 0.0
    zigzag_period_s: float = 0.0
    hops: tuple[tuple[float, float], ...] = ()
    attribute_schedule: tuple[AttributeChange, ...] = ()

    def __post_init__(self) -> None:
        if self.shape not in {s.value for s in Shape}:
            raise SpecError(f"{self.id}: unknown shape {self.shape!r}")
        if self.color not in PALETTE:
            raise SpecError(f"{self.id}: color {self.color!r} not in palette")
        if not self.size > 0:
            raise SpecError(f"{self.id}: size must be > 0")
        if self.path not in PATHS:
            raise SpecError(f"{self.id}: unknown path template {self.path!r}")
        if math.hypot(*self.velocity) > MAX_SPEED:
            raise SpecError(f"{self.id}: speed exceeds {MAX_SPEED} px/s")
        if abs(self.angular_velocity) > MAX_ANGULAR_SPEED:
            raise SpecError(f"{self.id}: angular velocity exceeds {MAX_ANGULAR_SPEED} deg/s")
        if self.acceleration and self.velocity == (0.0, 0.0):
            raise SpecError(f"{self.id}: acceleration acts along the heading, so velocity must be non-zero")
        if self.path == "circular" and self.turn_rate == 0:
            raise SpecError(f"{self.id}: circular path needs a non-zero turn_rate")
        if self.path == "zigzag" and not self.zigzag_period_s > 0:
            raise SpecError(f"{self.id}: zigzag path needs zigzag_period_s > 0")
        times = [c.time_s for c in self.attribute_schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SpecError(f"{self.id}: attribute_schedule times must be strictly increasing")
        for start, end in self.hops:
            if not end > start:
                raise SpecError(f"{self.id}: empty hop window ({start}, {end})")

    @property
    def name(self) -> str:
        """Human-readable handle used in question text."""
        return f"{self.color} {self.shape}"

    @property
    def extent(self) -> float:
        """Largest size the object ever takes; used for wall bounds."""
        sizes = [self.size] + [float(c.value) for c in self.attribute_schedule if c.attribute == "size"]
        return max(sizes)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "shape": self.shape,
            "color": self.color,
            "size": self.size,
            "position": list(self.position),
            "velocity": list(self.velocity),
            "angular_velocity": self.angular_velocity,
            "acceleration": self.acceleration,
            "path": self.path,
            "turn_rate": self.turn_rate,
            "zigzag_period_s": self.zigzag_period_s,
            "hops": [list(h) for h in self.hops],
            "attribute_schedule": [c.to_dict() for c in self.attribute_schedule],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ObjectSpec":
        return cls(
            id=d["id"],
            shape=d["shape"],
            color=d["color"],
            size=d["size"],
            position=tuple(d["position"]),
            velocity=tuple(d.get("velocity", (0.0, 0.0))),
            angular_velocity=d.get("angular_velocity", 0.0),
            acceleration=d.get("acceleration", 0.0),
            path=d.get("path", "linear"),
            turn_rate=d.get("turn_rate", 0.0),
            zigzag_period_s=d.get("zigzag_period_s", 0.0),
            hops=tuple(tuple(h) for h in d.get("hops", ())),
            attribute_schedule=tuple(AttributeChange.from_dict(c) for c in d.get("attribute_schedule", ())),
        )


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    task_type: str
    width: int
    height: int
    duration_s: float
    objects: tuple[ObjectSpec, ...]
    fps: int = 30
    # task-specific question parameters, e.g. {"subject": "obj0"}
    query: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task_type not in {t.value for t in ShortTask}:
            raise SpecError(f"unknown short-term task {self.task_type!r}")
        if not self.duration_s > 0:
            raise SpecError("duration_s must be > 0")
        if not self.fps > 0:
            raise SpecError("fps must be > 0")
        if self.width < MIN_CANVAS or self.height < MIN_CANVAS:
            raise SpecError(f"canvas must be at least {MIN_CANVAS}x{MIN_CANVAS}")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SpecError("object ids must be unique")
        for obj in self.objects:
            x, y = obj.position
            if not (0 < x < self.width and 0 < y < self.height):
                raise SpecError(f"{obj.id}: initial position {obj.position} outside canvas")
            for change in obj.attribute_schedule:
                if not 0 <= change.time_s < self.duration_s:
                    raise SpecError(f"{obj.id}: attribute change at {change.time_s}s outside the clip")

    @property
    def total_frames(self) -> int:
        return frame_count(self.duration_s, self.fps)

    def object(self, object_id: str) -> ObjectSpec:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "task_type": self.task_type,
            "width": self.width,
            "height": self.height,
            "duration_s": self.duration_s,
            "fps": self.fps,
            "objects": [o.to_dict() for o in self.objects],
            "query": deep_list(dict(self.query)),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SceneSpec":
        return cls(
            seed=d["seed"],
            task_type=d["task_type"],
            width=d["width"],
            height=d["height"],
            duration_s=d["duration_s"],
            fps=d.get("fps", 30),
            objects=tuple(ObjectSpec.from_dict(o) for o in d["objects"]),
            query=dict(d.get("query", {})),
        )


@dataclass(frozen=True)
class EventRecord:
    frame_index: int
    time_s: float
    kind: str
    subject: str
    payload: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def at(cls, frame_index: int, fps: float, kind: EventKind | str, subject: str, **payload: Any) -> "EventRecord":
        return cls(frame_index, frame_index / fps, EventKind(kind).value, subject, payload)

    def sort_key(self) -> tuple:
        return (self.frame_index, self.subject, self.kind)

    def to_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "time_s": self.time_s,
            "timestamp": format_timestamp(self.time_s),
            "kind": self.kind,
            "subject": self.subject,
            "payload": deep_list(dict(self.payload)),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EventRecord":
        return cls(d["frame_index"], d["time_s"], d["kind"], d["subject"], dict(d.get("payload", {})))


def sort_events(events: Sequence[EventRecord]) -> list[EventRecord]:
    return sorted(events, key=EventRecord.sort_key)


def check_event_log(events: Sequence[EventRecord], total_frames: int, fps: float) -> None:
    """Raise SpecError unless the log is in range, exactly timed and sorted."""
    for ev in events:
        if not 0 <= ev.frame_index < total_frames:
            raise SpecError(f"event frame {ev.frame_index} outside [0, {total_frames})")
        if ev.time_s != ev.frame_index / fps:
            raise SpecError(f"event at frame {ev.frame_index} has time {ev.time_s}, expected {ev.frame_index / fps}")
    keys = [ev.sort_key() for ev in events]
    if keys != sorted(keys):
        raise SpecError("event log is not sorted by (frame, subject, kind)")


# --------------------------------------------------------------------------
# Long-term scenarios


@dataclass(frozen=True)
class StateSnapshot:
    """Family state as nested tuples; see ``longterm.families`` for layouts."""

    family: str
    entities: Any

    def to_dict(self) -> dict:
        return {"family": self.family, "entities": deep_list(self.entities)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StateSnapshot":
        return cls(d["family"], deep_tuple(d["entities"]))


@dataclass(frozen=True)
class Operation:
    kind: str
    params: Mapping[str, Any]
    op_index: int = 0
    duration_s: float = 0.5

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "op_index": self.op_index, "duration_s": self.duration_s}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Operation":
        return cls(d["kind"], dict(d["params"]), d.get("op_index", 0), d.get("duration_s", 0.5))


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    family: str
    initial: StateSnapshot
    operations: tuple[Operation, ...]
    final: StateSnapshot
    visible_state: str
    question_mode: str
    per_op_duration_s: float
    reveal_duration_s: float = 2.0
    # historical queries: {"op_index": int, "property": str}
    query: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        from .longterm.families import replay

        if self.family not in {f.value for f in Family}:
            raise SpecError(f"unknown family {self.family!r}")
        if self.question_mode not in {m.value for m in QuestionMode}:
            raise SpecError(f"unknown question mode {self.question_mode!r}")
        if self.visible_state not in {v.value for v in VisibleState}:
            raise SpecError(f"unknown visible state {self.visible_state!r}")
        if self.visible_state == VisibleState.FINAL_ONLY and self.question_mode == QuestionMode.FORWARD:
            raise SpecError("forward prediction requires the initial state to be visible")
        if self.visible_state == VisibleState.INITIAL_ONLY and self.question_mode == QuestionMode.RETRODICTIVE:
            raise SpecError("retrodictive inference requires the final state to be visible")
        if not self.operations:
            raise SpecError("a scenario needs at least one operation")
        if not 0.5 <= self.per_op_duration_s <= 1.0:
            raise SpecError("per_op_duration_s must lie in [0.5, 1.0]")
        for op in self.operations:
            if not 0.5 <= op.duration_s <= 1.0:
                raise SpecError(f"operation {op.op_index} duration {op.duration_s} outside [0.5, 1.0]")
        if not self.reveal_duration_s > 0:
            raise SpecError("reveal_duration_s must be > 0")
        if replay(self.initial, self.operations) != self.final:
            raise SpecError("replaying the operations from the initial state does not yield the final state")

    @property
    def T(self) -> int:
        return len(self.operations)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "family": self.family,
            "initial": self.initial.to_dict(),
            "operations": [op.to_dict() for op in self.operations],
            "final": self.final.to_dict(),
            "visible_state": self.visible_state,
            "question_mode": self.question_mode,
            "per_op_duration_s": self.per_op_duration_s,
            "reveal_duration_s": self.reveal_duration_s,
            "query": dict(self.query),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioScript":
        return cls(
            seed=d["seed"],
            family=d["family"],
            initial=StateSnapshot.from_dict(d["initial"]),
            operations=tuple(Operation.from_dict(o) for o in d["operations"]),
            final=StateSnapshot.from_dict(d["final"]),
            visible_state=d["visible_state"],
            question_mode=d["question_mode"],
            per_op_duration_s=d["per_op_duration_s"],
            reveal_duration_s=d.get("reveal_duration_s", 2.0),
            query=dict(d.get("query", {})),
        )


# --------------------------------------------------------------------------
# QA records


@dataclass(frozen=True)
class GroundTruth:
    """Canonical answer plus what the QA layer needs to phrase a question.

    ``options`` holds wrong answers distractors may be drawn from, ``fields``
    the template placeholders, and ``hidden`` the canonical rendering of any
    state the video never shows (question text must not contain it).
    """

    answer: str
    options: tuple[str, ...] = ()
    fields: Mapping[str, Any] = field(default_factory=dict)
    numeric: bool = False
    hidden: str | None = None

    def to_dict(self) -> dict:
        return {
            "answer": self.answer,
            "options": list(self.options),
            "fields": dict(self.fields),
            "numeric": self.numeric,
            "hidden": self.hidden,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruth":
        return cls(d["answer"], tuple(d.get("options", ())), dict(d.get("fields", {})), d.get("numeric", False), d.get("hidden"))


@dataclass(frozen=True)
class QASample:
    id: str
    video_path: str
    metadata_path: str
    task: str
    question: str
    answer: str
    question_mode: str | None = None
    choices: tuple[str, ...] | None = None
    answer_index: int | None = None
    cot: str | None = None
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.choices is not None:
            if len(set(self.choices)) != len(self.choices):
                raise SpecError(f"{self.id}: choices are not pairwise distinct")
            if self.choices.count(self.answer) != 1:
                raise SpecError(f"{self.id}: answer must appear exactly once among the choices")
            if self.answer_index is None or not 0 <= self.answer_index < len(self.choices):
                raise SpecError(f"{self.id}: answer_index missing or out of range")
            if self.choices[self.answer_index] != self.answer:
                raise SpecError(f"{self.id}: answer_index does not point at the answer")
        elif self.answer_index is not None:
            raise SpecError(f"{self.id}: answer_index given without choices")

    @property
    def is_mcq(self) -> bool:
        return self.choices is not None

    @property
    def answer_letter(self) -> str | None:
        return None if self.answer_index is None else chr(ord("A") + self.answer_index)

    def with_cot(self, cot: str | None) -> "QASample":
        return replace(self, cot=cot)

    def to_dict(self) -> dict:
        return {
            "format_version": MANIFEST_FORMAT_VERSION,
            "id": self.id,
            "video_path": self.video_path,
            "metadata_path": self.metadata_path,
            "task": self.task,
            "question_mode": self.question_mode,
            "question": self.question,
            "answer": self.answer,
            "choices": None if self.choices is None else list(self.choices),
            "answer_index": self.answer_index,
            "cot": self.cot,
            "provenance": deep_list(dict(self.provenance)),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "QASample":
        choices = d.get("choices")
        return cls(
            id=d["id"],
            video_path=d["video_path"],
            metadata_path=d["metadata_path"],
            task=d["task"],
            question=d["question"],
            answer=d["answer"],
            question_mode=d.get("question_mode"),
            choices=None if choices is None else tuple(choices),
            answer_index=d.get("answer_index"),
            cot=d.get("cot"),
            provenance=dict(d.get("provenance", {})),
        )


MANIFEST_FORMAT_VERSION = 1
METADATA_SCHEMA_VERSION = 1
