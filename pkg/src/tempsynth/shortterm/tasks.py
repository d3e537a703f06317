"""Scene generators and ground-truth derivation for the 12 short-term tasks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..model import (
    COLORS,
    AmbiguousScene,
    AttributeChange,
    EventKind,
    GroundTruth,
    ObjectSpec,
    RetriesExhausted,
    SceneSpec,
    Shape,
    ShortTask,
    SpecError,
    format_clock,
)
from .classify import UnclassifiableTrajectory, classify_trajectory
from .sim import SimulationTrace, simulate

DEFAULT_RETRIES = 20

# Eight compass buckets, counter-clockwise from +x with y pointing up.
DIRECTIONS = ("right", "up-right", "up", "up-left", "left", "down-left", "down", "down-right")
DIRECTION_MARGIN_DEG = 10.0
TRAJECTORIES = ("linear", "circular", "zigzag")
ACCELERATION_LABELS = ("accelerating", "decelerating", "constant")
ACCELERATION_GAIN = 1.5
RELATIVE_LABELS = ("left", "right", "above", "below")
DISTANCE_LABELS = ("closer", "farther", "same")
SPEED_RATIO = 1.25
MIN_CONTACT_GAP = 3  # frames between two wall contacts of one object
MIN_EVENT_GAP_S = 0.4
ROTATION_FRACTION = (0.15, 0.85)


def heading_degrees(dx: float, dy: float) -> float:
    """Compass heading of a screen-space displacement, in [0, 360)."""
    return math.degrees(math.atan2(-dy, dx)) % 360.0


def quantize_heading(theta: float) -> tuple[str, float]:
    """(bucket label, distance in degrees to the nearest bucket boundary)."""
    bucket = int(math.floor(theta / 45.0 + 0.5)) % 8
    offset = abs((theta - bucket * 45.0 + 180.0) % 360.0 - 180.0)
    return DIRECTIONS[bucket], 22.5 - offset


def _names(spec: SceneSpec, ids) -> list[str]:
    return [spec.object(i).name for i in ids]


def _mean_speed(trace: SimulationTrace, object_id: str) -> float:
    return float(trace.speeds(object_id).mean())


def _rank_by_speed(spec, trace, ids) -> list[str]:
    speeds = sorted(((_mean_speed(trace, i), i) for i in ids), reverse=True)
    for (fast, _), (slow, _) in zip(speeds, speeds[1:]):
        if slow <= 0 or fast / slow < SPEED_RATIO:
            raise AmbiguousScene(f"speeds {fast:.1f} and {slow:.1f} are too close to rank")
    return [i for _, i in speeds]


def _answer_collision(spec, trace):
    subject = spec.query["subject"]
    frames = [e.frame_index for e in trace.events_for(subject, EventKind.WALL_CONTACT)]
    if any(b - a < MIN_CONTACT_GAP for a, b in zip(frames, frames[1:])):
        raise AmbiguousScene("two wall contacts too close together to count separately")
    return str(len(frames))


def _answer_direction(spec, trace):
    subject = spec.query["subject"]
    if trace.events_for(subject, EventKind.WALL_CONTACT):
        raise AmbiguousScene("object bounces, so it has no single heading")
    j = trace.index(subject)
    dx, dy = trace.positions[-1, j] - trace.positions[0, j]
    if dx == 0 and dy == 0:
        raise AmbiguousScene("object does not move")
    label, margin = quantize_heading(heading_degrees(dx, dy))
    if margin < DIRECTION_MARGIN_DEG:
        raise AmbiguousScene(f"heading lies {margin:.1f} deg from a bucket boundary")
    return label


def _answer_trajectory(spec, trace):
    subject = spec.query["subject"]
    if trace.events_for(subject, EventKind.WALL_CONTACT):
        raise AmbiguousScene("wall bounce distorts the trajectory shape")
    try:
        return classify_trajectory(trace, subject)
    except UnclassifiableTrajectory as exc:
        raise AmbiguousScene(str(exc)) from exc


def _answer_speed(spec, trace):
    fastest = _rank_by_speed(spec, trace, spec.query["objects"])[0]
    return spec.object(fastest).name


def _answer_motion_count(spec, trace):
    subject = spec.query["subject"]
    changes = trace.events_for(subject, EventKind.DIRECTION_CHANGE)
    gap = MIN_EVENT_GAP_S * spec.fps - 1e-9
    frames = [0] + [e.frame_index for e in changes] + [trace.total_frames - 1]
    if any(b - a < gap for a, b in zip(frames, frames[1:])):
        raise AmbiguousScene("a movement burst or pause is too short to see")
    return str(sum(1 for e in changes if e.payload.get("reason") == "start"))


def _answer_attribute(spec, trace):
    changes = trace.events_for(spec.query["subject"], EventKind.ATTRIBUTE_CHANGE)
    if len(changes) != 1:
        raise AmbiguousScene(f"expected exactly one attribute change, found {len(changes)}")
    return changes[0].payload["attribute"]


def _answer_rotation(spec, trace):
    subject = spec.query["subject"]
    obj = spec.object(subject)
    if obj.angular_velocity == 0:
        raise AmbiguousScene("rotation task on an object that does not spin")
    if obj.shape == Shape.CIRCLE:
        raise AmbiguousScene("a spinning circle looks stationary")
    turns = abs(trace.cumulative_rotation(subject)) / 360.0
    full = math.floor(turns)
    lo, hi = ROTATION_FRACTION
    if not lo <= turns - full <= hi:
        raise AmbiguousScene(f"{turns:.2f} turns is too close to a whole number")
    return str(full)


def _answer_relative(spec, trace):
    a, b = spec.query["subject"], spec.query["reference"]
    dx, dy = trace.positions[-1, trace.index(a)] - trace.positions[-1, trace.index(b)]
    major, minor = max(abs(dx), abs(dy)), min(abs(dx), abs(dy))
    if major < 1.5 * minor or major < spec.object(a).extent + spec.object(b).extent + 8:
        raise AmbiguousScene("final positions do not have a dominant direction")
    if abs(dx) >= abs(dy):
        return "right" if dx > 0 else "left"
    return "below" if dy > 0 else "above"


def _answer_acceleration(spec, trace):
    s = trace.speeds(spec.query["subject"])
    d = np.diff(s)
    if np.all(d > 0) and s[-1] >= ACCELERATION_GAIN * s[0]:
        return "accelerating"
    if np.all(d < 0) and s[0] >= ACCELERATION_GAIN * s[-1]:
        return "decelerating"
    if np.all(np.abs(d) <= 1e-9 * s[0]) and s[0] > 0:
        return "constant"
    raise AmbiguousScene("speed change is neither clearly monotone nor absent")


def _answer_velocity_rank(spec, trace):
    return ", ".join(_names(spec, _rank_by_speed(spec, trace, spec.query["objects"])))


def _answer_distance(spec, trace):
    a, b = spec.query["subject"], spec.query["reference"]
    ja, jb = trace.index(a), trace.index(b)
    floor_dist = spec.object(a).extent + spec.object(b).extent
    dists = []
    for t in spec.query["times"]:
        f = int(round(t * spec.fps))
        dists.append(float(np.hypot(*(trace.positions[f, ja] - trace.positions[f, jb]))))
    d1, d2 = dists
    if min(d1, d2) < floor_dist:
        raise AmbiguousScene("objects overlap at a query time")
    ratio = d2 / d1
    if ratio <= 0.75:
        return "closer"
    if ratio >= 1 / 0.75:
        return "farther"
    if abs(ratio - 1) <= 0.05:
        return "same"
    raise AmbiguousScene(f"distance ratio {ratio:.2f} is in the ambiguous band")


def _answer_sequence(spec, trace):
    firsts = []
    for oid in spec.query["objects"]:
        changes = trace.events_for(oid, EventKind.ATTRIBUTE_CHANGE)
        if len(changes) != 1:
            raise AmbiguousScene(f"{oid} changes {len(changes)} times")
        firsts.append((changes[0].frame_index, oid))
    firsts.sort()
    gap = MIN_EVENT_GAP_S * spec.fps - 1e-9
    if any(b[0] - a[0] < gap for a, b in zip(firsts, firsts[1:])):
        raise AmbiguousScene("two changes happen too close together to order")
    return ", ".join(_names(spec, [oid for _, oid in firsts]))


_DERIVERS: dict[str, Callable[[SceneSpec, SimulationTrace], str]] = {
    ShortTask.COLLISION_COUNTING: _answer_collision,
    ShortTask.DIRECTION_IDENTIFICATION: _answer_direction,
    ShortTask.TRAJECTORY_SHAPE: _answer_trajectory,
    ShortTask.SPEED_PERCEPTION: _answer_speed,
    ShortTask.MOTION_COUNTING: _answer_motion_count,
    ShortTask.ATTRIBUTE_CHANGE: _answer_attribute,
    ShortTask.ROTATION_COUNTING: _answer_rotation,
    ShortTask.RELATIVE_POSITION: _answer_relative,
    ShortTask.ACCELERATION_DETECTION: _answer_acceleration,
    ShortTask.VELOCITY_COMPARISON: _answer_velocity_rank,
    ShortTask.DISTANCE_ESTIMATION: _answer_distance,
    ShortTask.SEQUENTIAL_ORDERING: _answer_sequence,
}

COUNTING_TASKS = frozenset(
    {ShortTask.COLLISION_COUNTING.value, ShortTask.MOTION_COUNTING.value, ShortTask.ROTATION_COUNTING.value}
)


def derive_answer(spec: SceneSpec, trace: SimulationTrace) -> str:
    """Canonical answer for ``spec.task_type``, read off the simulation.

    Raises AmbiguousScene when the scene does not support a single clear
    answer; generators treat that as a signal to redraw.
    """
    return _DERIVERS[ShortTask(spec.task_type)](spec, trace)


def _ranking_options(names: list[str], answer: str) -> tuple[str, ...]:
    perms = [", ".join(p) for p in itertools.permutations(names)]
    return tuple(p for p in perms if p != answer)


def ground_truth(spec: SceneSpec, trace: SimulationTrace) -> GroundTruth:
    answer = derive_answer(spec, trace)
    task = ShortTask(spec.task_type)
    q = spec.query
    fields: dict = {}
    if "subject" in q:
        fields["subject"] = spec.object(q["subject"]).name
    if "reference" in q:
        fields["reference"] = spec.object(q["reference"]).name
    if "objects" in q:
        names = _names(spec, q["objects"])
        fields["objects"] = ", ".join(f"the {n}" for n in names[:-1]) + f" and the {names[-1]}"
    if "times" in q:
        fields["t1"], fields["t2"] = (format_clock(t) for t in q["times"])

    numeric = task.value in COUNTING_TASKS
    if numeric:
        n = int(answer)
        options = tuple(str(v) for v in range(max(0, n - 3), n + 4) if v != n)
    elif task is ShortTask.DIRECTION_IDENTIFICATION:
        options = tuple(d for d in DIRECTIONS if d != answer)
    elif task is ShortTask.TRAJECTORY_SHAPE:
        options = tuple(t for t in TRAJECTORIES if t != answer)
    elif task is ShortTask.SPEED_PERCEPTION:
        options = tuple(n for n in _names(spec, q["objects"]) if n != answer)
    elif task is ShortTask.ATTRIBUTE_CHANGE:
        options = tuple(a for a in ("color", "size", "shape") if a != answer)
    elif task is ShortTask.RELATIVE_POSITION:
        options = tuple(r for r in RELATIVE_LABELS if r != answer)
    elif task is ShortTask.ACCELERATION_DETECTION:
        options = tuple(a for a in ACCELERATION_LABELS if a != answer)
    elif task is ShortTask.DISTANCE_ESTIMATION:
        options = tuple(d for d in DISTANCE_LABELS if d != answer)
    else:  # rankings and orderings
        options = _ranking_options(_names(spec, q["objects"]), answer)
    return GroundTruth(answer=answer, options=options, fields=fields, numeric=numeric)


# --------------------------------------------------------------------------
# Scene builders


@dataclass(frozen=True)
class BuildContext:
    seed: int
    width: int
    height: int
    fps: int
    duration_s: float


def _appearances(rng, k: int, shapes=None) -> list[tuple[str, str]]:
    colors = rng.choice(len(COLORS), size=k, replace=False)
    pool = shapes or [s.value for s in Shape]
    return [(COLORS[int(c)], pool[int(rng.integers(len(pool)))]) for c in colors]


def _size(rng) -> float:
    return float(rng.uniform(12.0, 22.0))


def _position(rng, ctx: BuildContext, ext: float, margin: float = 2.0) -> tuple[float, float]:
    return (
        float(rng.uniform(ext + margin, ctx.width - ext - margin)),
        float(rng.uniform(ext + margin, ctx.height - ext - margin)),
    )


def _velocity(speed: float, compass_deg: float) -> tuple[float, float]:
    r = math.radians(compass_deg)
    return (speed * math.cos(r), -speed * math.sin(r))


def _random_velocity(rng, lo: float, hi: float) -> tuple[float, float]:
    return _velocity(float(rng.uniform(lo, hi)), float(rng.uniform(0.0, 360.0)))


def _steps_time(ctx: BuildContext) -> float:
    """Time covered by the frame steps, (frames - 1) / fps."""
    return (math.ceil(round(ctx.duration_s * ctx.fps, 9)) - 1) / ctx.fps


def _straight_runner(rng, ctx, oid, color, shape, compass_deg, max_speed=90.0):
    size = _size(rng)
    room = min(ctx.width, ctx.height) - 2 * size
    speed = min(float(rng.uniform(50.0, max_speed)), 0.6 * room / ctx.duration_s)
    vx, vy = _velocity(speed, compass_deg)
    cx = ctx.width / 2 - vx * ctx.duration_s / 2 + float(rng.uniform(-20, 20))
    cy = ctx.height / 2 - vy * ctx.duration_s / 2 + float(rng.uniform(-20, 20))
    return ObjectSpec(oid, shape, color, size, (cx, cy), (vx, vy))


def _scene(ctx, task, objects, query) -> SceneSpec:
    return SceneSpec(
        seed=ctx.seed, task_type=task.value, width=ctx.width, height=ctx.height,
        duration_s=ctx.duration_s, fps=ctx.fps, objects=tuple(objects), query=query,
    )


def build_collision(rng, ctx):
    (color, shape), = _appearances(rng, 1)
    size = _size(rng)
    obj = ObjectSpec("obj0", shape, color, size, _position(rng, ctx, size), _random_velocity(rng, 150.0, 320.0))
    return _scene(ctx, ShortTask.COLLISION_COUNTING, [obj], {"subject": "obj0"})


def build_direction(rng, ctx):
    (color, shape), = _appearances(rng, 1)
    compass = int(rng.integers(8)) * 45.0 + float(rng.uniform(-12.0, 12.0))
    obj = _straight_runner(rng, ctx, "obj0", color, shape, compass)
    return _scene(ctx, ShortTask.DIRECTION_IDENTIFICATION, [obj], {"subject": "obj0"})


def build_trajectory(rng, ctx):
    (color, shape), = _appearances(rng, 1)
    template = TRAJECTORIES[int(rng.integers(3))]
    if template == "linear":
        obj = _straight_runner(rng, ctx, "obj0", color, shape, float(rng.uniform(0, 360)))
    elif template == "circular":
        size = _size(rng)
        max_r = min(140.0, min(ctx.width, ctx.height) / 2 - size - 10)
        radius = float(rng.uniform(min(60.0, max_r * 0.6), max_r))
        sweep = float(rng.uniform(300.0, 420.0))
        turn = sweep / _steps_time(ctx) * (1 if rng.random() < 0.5 else -1)
        speed = radius * math.radians(abs(turn))
        cx = float(rng.uniform(radius + size + 2, ctx.width - radius - size - 2))
        cy = float(rng.uniform(radius + size + 2, ctx.height - radius - size - 2))
        phi = float(rng.uniform(0.0, 2 * math.pi))
        heading = phi + (math.pi / 2 if turn > 0 else -math.pi / 2)
        obj = ObjectSpec(
            "obj0", shape, color, size,
            (cx + radius * math.cos(phi), cy + radius * math.sin(phi)),
            (speed * math.cos(heading), speed * math.sin(heading)),
            path="circular", turn_rate=turn,
        )
    else:
        size = _size(rng)
        n = math.ceil(round(ctx.duration_s * ctx.fps, 9))
        period = int(rng.integers(8, max(9, (n - 1) // 5) + 1))
        room = min(ctx.width, ctx.height) - 2 * size
        speed = min(float(rng.uniform(60.0, 100.0)), 0.55 * room / (0.7071 * ctx.duration_s))
        compass = float(rng.uniform(0, 360))
        vx, vy = _velocity(speed, compass)
        drift = 0.7071 * ctx.duration_s
        start = (ctx.width / 2 - vx * drift / 2, ctx.height / 2 - vy * drift / 2)
        obj = ObjectSpec(
            "obj0", shape, color, size, start, (vx, vy),
            path="zigzag", zigzag_period_s=period / ctx.fps,
        )
    return _scene(ctx, ShortTask.TRAJECTORY_SHAPE, [obj], {"subject": "obj0", "template": template})


def build_speed(rng, ctx):
    looks = _appearances(rng, 2)
    slow = float(rng.uniform(60.0, 140.0))
    speeds = [slow, slow * float(rng.uniform(1.5, 2.5))]
    rng.shuffle(speeds)
    objs = []
    for j, ((color, shape), speed) in enumerate(zip(looks, speeds)):
        size = _size(rng)
        objs.append(ObjectSpec(f"obj{j}", shape, color, size, _position(rng, ctx, size),
                               _velocity(speed, float(rng.uniform(0, 360)))))
    return _scene(ctx, ShortTask.SPEED_PERCEPTION, objs, {"objects": ["obj0", "obj1"]})


def build_motion_count(rng, ctx):
    (color, shape), = _appearances(rng, 1)
    size = _size(rng)
    fps = ctx.fps
    n = math.ceil(round(ctx.duration_s * fps, 9))
    wanted = int(rng.integers(2, 6 if ctx.duration_s <= 5 else 9))
    frame = int(rng.integers(int(0.4 * fps), int(0.7 * fps) + 1))
    hops = []
    for _ in range(wanted):
        move = int(rng.integers(int(0.4 * fps), int(0.7 * fps) + 1))
        if frame + move > n - 1 - int(0.4 * fps):
            break
        hops.append((frame / fps, (frame + move) / fps))
        frame += move + int(rng.integers(int(0.4 * fps), int(0.7 * fps) + 1))
    if not hops:
        raise AmbiguousScene("no room for a single hop")
    obj = ObjectSpec("obj0", shape, color, size, _position(rng, ctx, size),
                     _random_velocity(rng, 120.0, 220.0), path="hops", hops=tuple(hops))
    return _scene(ctx, ShortTask.MOTION_COUNTING, [obj], {"subject": "obj0"})


def build_attribute(rng, ctx):
    (color, shape), = _appearances(rng, 1)
    size = _size(rng)
    attribute = ("color", "size", "shape")[int(rng.integers(3))]
    if attribute == "color":
        value = str(rng.choice([c for c in COLORS if c != color]))
    elif attribute == "shape":
        value = str(rng.choice([s.value for s in Shape if s.value != shape]))
    else:
        factor = float(rng.uniform(1.6, 1.9)) if rng.random() < 0.5 else float(rng.uniform(0.5, 0.6))
        value = round(size * factor, 3)
    n = math.ceil(round(ctx.duration_s * ctx.fps, 9))
    frame = int(rng.integers(ctx.fps, n - ctx.fps))
    change = AttributeChange(frame / ctx.fps, attribute, value)
    ext = max(size, float(value) if attribute == "size" else size)
    obj = ObjectSpec("obj0", shape, color, size, _position(rng, ctx, ext),
                     _random_velocity(rng, 30.0, 80.0), attribute_schedule=(change,))
    return _scene(ctx, ShortTask.ATTRIBUTE_CHANGE, [obj], {"subject": "obj0"})


def build_rotation(rng, ctx):
    (color, shape), = _appearances(rng, 1, shapes=["square", "triangle", "star"])
    size = float(rng.uniform(20.0, 32.0))
    omega = float(rng.uniform(120.0, 400.0)) * (1 if rng.random() < 0.5 else -1)
    obj = ObjectSpec("obj0", shape, color, size, _position(rng, ctx, size),
                     _random_velocity(rng, 0.0, 30.0), angular_velocity=omega)
    return _scene(ctx, ShortTask.ROTATION_COUNTING, [obj], {"subject": "obj0"})


def build_relative(rng, ctx):
    looks = _appearances(rng, 2)
    objs = []
    for j, (color, shape) in enumerate(looks):
        size = _size(rng)
        objs.append(ObjectSpec(f"obj{j}", shape, color, size, _position(rng, ctx, size),
                               _random_velocity(rng, 40.0, 120.0)))
    return _scene(ctx, ShortTask.RELATIVE_POSITION, objs, {"subject": "obj0", "reference": "obj1"})


def build_acceleration(rng, ctx):
    (color, shape), = _appearances(rng, 1)
    size = _size(rng)
    label = ACCELERATION_LABELS[int(rng.integers(3))]
    span = _steps_time(ctx)
    if label == "accelerating":
        s0 = float(rng.uniform(50.0, 90.0))
        accel = s0 * float(rng.uniform(0.7, 1.2)) / span
    elif label == "decelerating":
        s0 = float(rng.uniform(200.0, 300.0))
        accel = -s0 * float(rng.uniform(0.45, 0.6)) / span
    else:
        s0, accel = float(rng.uniform(80.0, 200.0)), 0.0
    obj = ObjectSpec("obj0", shape, color, size, _position(rng, ctx, size),
                     _velocity(s0, float(rng.uniform(0, 360))), acceleration=accel)
    return _scene(ctx, ShortTask.ACCELERATION_DETECTION, [obj], {"subject": "obj0", "template": label})


def build_velocity(rng, ctx):
    looks = _appearances(rng, 3)
    base = float(rng.uniform(50.0, 90.0))
    speeds = [base, base * float(rng.uniform(1.4, 1.8))]
    speeds.append(speeds[1] * float(rng.uniform(1.4, 1.8)))
    rng.shuffle(speeds)
    objs = []
    for j, ((color, shape), speed) in enumerate(zip(looks, speeds)):
        size = _size(rng)
        objs.append(ObjectSpec(f"obj{j}", shape, color, size, _position(rng, ctx, size),
                               _velocity(speed, float(rng.uniform(0, 360)))))
    return _scene(ctx, ShortTask.VELOCITY_COMPARISON, objs, {"objects": ["obj0", "obj1", "obj2"]})


def build_distance(rng, ctx):
    looks = _appearances(rng, 2)
    target = DISTANCE_LABELS[int(rng.integers(3))]
    sizes = [_size(rng), _size(rng)]
    t1, t2 = 1.0, float(math.floor(ctx.duration_s) - 1)
    pa = _position(rng, ctx, sizes[0], margin=40)
    pb = _position(rng, ctx, sizes[1], margin=40)
    dx, dy = pb[0] - pa[0], pb[1] - pa[1]
    dist = math.hypot(dx, dy) or 1.0
    ux, uy = dx / dist, dy / dist
    if target == "same":
        va = vb = _random_velocity(rng, 30.0, 80.0)
    else:
        rate = float(rng.uniform(25.0, 60.0)) * (1 if target == "closer" else -1)
        va = (ux * rate, uy * rate)
        vb = _random_velocity(rng, 0.0, 20.0)
    objs = [
        ObjectSpec("obj0", looks[0][1], looks[0][0], sizes[0], pa, va),
        ObjectSpec("obj1", looks[1][1], looks[1][0], sizes[1], pb, vb),
    ]
    return _scene(ctx, ShortTask.DISTANCE_ESTIMATION, objs,
                  {"subject": "obj0", "reference": "obj1", "times": [t1, t2], "template": target})


def build_sequence(rng, ctx):
    looks = _appearances(rng, 3)
    n = math.ceil(round(ctx.duration_s * ctx.fps, 9))
    lo, hi = ctx.fps // 2, n - ctx.fps // 2
    gap = int(math.ceil(0.5 * ctx.fps))
    while True:
        frames = sorted(int(f) for f in rng.choice(np.arange(lo, hi), size=3, replace=False))
        if all(b - a >= gap for a, b in zip(frames, frames[1:])):
            break
    order = rng.permutation(3)
    objs = []
    for j, (color, shape) in enumerate(looks):
        size = float(rng.uniform(12.0, 18.0))
        change = AttributeChange(frames[int(order[j])] / ctx.fps, "size", round(size * 1.6, 3))
        objs.append(ObjectSpec(f"obj{j}", shape, color, size, _position(rng, ctx, size * 1.6),
                               _random_velocity(rng, 0.0, 40.0), attribute_schedule=(change,)))
    return _scene(ctx, ShortTask.SEQUENTIAL_ORDERING, objs, {"objects": ["obj0", "obj1", "obj2"]})


BUILDERS: dict[str, Callable] = {
    ShortTask.COLLISION_COUNTING: build_collision,
    ShortTask.DIRECTION_IDENTIFICATION: build_direction,
    ShortTask.TRAJECTORY_SHAPE: build_trajectory,
    ShortTask.SPEED_PERCEPTION: build_speed,
    ShortTask.MOTION_COUNTING: build_motion_count,
    ShortTask.ATTRIBUTE_CHANGE: build_attribute,
    ShortTask.ROTATION_COUNTING: build_rotation,
    ShortTask.RELATIVE_POSITION: build_relative,
    ShortTask.ACCELERATION_DETECTION: build_acceleration,
    ShortTask.VELOCITY_COMPARISON: build_velocity,
    ShortTask.DISTANCE_ESTIMATION: build_distance,
    ShortTask.SEQUENTIAL_ORDERING: build_sequence,
}


def _acceptable(spec: SceneSpec, trace: SimulationTrace, answer: str) -> None:
    """Task-level rejection rules on top of derive_answer's ambiguity checks."""
    task = ShortTask(spec.task_type)
    template = spec.query.get("template")
    if template is not None and answer != template:
        raise AmbiguousScene(f"scene built as {template!r} reads as {answer!r}")
    if task is ShortTask.COLLISION_COUNTING and answer == "0":
        raise AmbiguousScene("no wall contact")
    if task is ShortTask.ROTATION_COUNTING and answer == "0":
        raise AmbiguousScene("no complete rotation")


@dataclass(frozen=True)
class ShortTermSample:
    spec: SceneSpec
    trace: SimulationTrace
    truth: GroundTruth
    retries: int


def generate_shortterm_sample(
    task_type: str | ShortTask,
    rng: np.random.Generator,
    *,
    seed: int = 0,
    width: int = 448,
    height: int = 448,
    fps: int = 30,
    profile: str = "standard",
    max_retries: int = DEFAULT_RETRIES,
) -> ShortTermSample:
    """Draw scenes for ``task_type`` until one has an unambiguous answer."""
    task = ShortTask(task_type)
    build = BUILDERS[task]
    last_error: Exception | None = None
    last_params = None
    for attempt in range(max_retries + 1):
        duration = float(rng.choice([3.0, 4.0, 5.0])) * (2.0 if profile == "hard" else 1.0)
        ctx = BuildContext(seed, width, height, fps, duration)
        try:
            spec = build(rng, ctx)
            last_params = spec.to_dict()
            trace = simulate(spec)
            truth = ground_truth(spec, trace)
            _acceptable(spec, trace, truth.answer)
        except (AmbiguousScene, SpecError) as exc:
            last_error = exc
            continue
        return ShortTermSample(spec, trace, truth, attempt)
    raise RetriesExhausted(f"{task.value} seed {seed}", max_retries + 1, last_params, last_error)
