"""Frame-stepped 2D kinematics with exact wall reflection.

Positions advance by explicit Euler at dt = 1/fps. A step that crosses a wall
is mirrored about that wall and the normal velocity component is negated, so
every contact lands on a frame boundary and is logged at that frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..model import EventKind, EventRecord, ObjectSpec, SceneSpec, SpecError, sort_events


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    fps: int
    width: int
    height: int
    object_ids: tuple[str, ...]
    positions: np.ndarray  # (frames, objects, 2)
    velocities: np.ndarray  # (frames, objects, 2); velocity leaving each frame
    angles: np.ndarray  # (frames, objects); cumulative degrees, angles[0] == 0
    events: tuple[EventRecord, ...]
    initial_attributes: Mapping[str, Mapping[str, object]]

    @property
    def total_frames(self) -> int:
        return int(self.positions.shape[0])

    def index(self, object_id: str) -> int:
        return self.object_ids.index(object_id)

    def cumulative_rotation(self, object_id: str) -> float:
        return float(self.angles[-1, self.index(object_id)])

    def events_for(self, object_id: str | None = None, kind: EventKind | str | None = None) -> list[EventRecord]:
        out = []
        for ev in self.events:
            if object_id is not None and ev.subject != object_id:
                continue
            if kind is not None and ev.kind != EventKind(kind).value:
                continue
            out.append(ev)
        return out

    def attributes_at(self, object_id: str, frame: int) -> dict:
        """Attributes in effect at ``frame``; a change logged at frame k shows from k on."""
        attrs = dict(self.initial_attributes[object_id])
        for ev in self.events_for(object_id, EventKind.ATTRIBUTE_CHANGE):
            if ev.frame_index > frame:
                break
            attrs[ev.payload["attribute"]] = ev.payload["new"]
        return attrs

    def speeds(self, object_id: str) -> np.ndarray:
        """Speed over each of the ``frames - 1`` steps."""
        v = self.velocities[:-1, self.index(object_id)]
        return np.hypot(v[:, 0], v[:, 1])

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "width": self.width,
            "height": self.height,
            "object_ids": list(self.object_ids),
            "positions": self.positions.tolist(),
            "velocities": self.velocities.tolist(),
            "angles": self.angles.tolist(),
            "events": [e.to_dict() for e in self.events],
            "initial_attributes": {k: dict(v) for k, v in self.initial_attributes.items()},
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SimulationTrace) and self.to_json() == other.to_json()


def _rotate(vx: float, vy: float, degrees: float) -> tuple[float, float]:
    r = math.radians(degrees)
    c, s = math.cos(r), math.sin(r)
    return vx * c - vy * s, vx * s + vy * c


def _frame_of(time_s: float, fps: float) -> int:
    return int(math.floor(time_s * fps + 0.5))


def _simulate_object(obj: ObjectSpec, spec: SceneSpec, n: int, events: list[EventRecord]):
    fps = spec.fps
    dt = 1.0 / fps
    ext = obj.extent
    lo_x, hi_x = ext, spec.width - ext
    lo_y, hi_y = ext, spec.height - ext
    if hi_x <= lo_x or hi_y <= lo_y:
        raise SpecError(f"{obj.id}: size {ext} exceeds half the canvas; no room to move")
    x, y = map(float, obj.position)
    if not (lo_x <= x <= hi_x and lo_y <= y <= hi_y):
        raise SpecError(f"{obj.id}: starts overlapping a wall at {obj.position}")

    pos = np.empty((n, 2))
    vel = np.empty((n, 2))
    pos[0] = (x, y)

    if obj.path == "circular":
        if obj.acceleration:
            raise SpecError(f"{obj.id}: circular paths have constant speed")
        speed = math.hypot(*obj.velocity)
        h0 = math.atan2(obj.velocity[1], obj.velocity[0])
        w = math.radians(obj.turn_rate)
        radius = speed / abs(w)
        cx = x - speed / w * math.sin(h0)
        cy = y + speed / w * math.cos(h0)
        if not (lo_x <= cx - radius and cx + radius <= hi_x and lo_y <= cy - radius and cy + radius <= hi_y):
            raise SpecError(f"{obj.id}: circular path leaves the canvas")
        for k in range(n):
            h = h0 + w * k * dt
            pos[k] = (cx + speed / w * math.sin(h), cy - speed / w * math.cos(h))
            vel[k] = (speed * math.cos(h), speed * math.sin(h))
        return pos, vel

    vx, vy = map(float, obj.velocity)
    moving_frames = None
    if obj.path == "hops":
        moving_frames = set()
        for start, end in obj.hops:
            f0, f1 = _frame_of(start, fps), min(_frame_of(end, fps), n - 1)
            if f0 >= n - 1:
                continue
            moving_frames.update(range(f0, f1))
            events.append(EventRecord.at(f0, fps, EventKind.DIRECTION_CHANGE, obj.id, reason="start"))
            if f1 < n - 1:
                events.append(EventRecord.at(f1, fps, EventKind.DIRECTION_CHANGE, obj.id, reason="stop"))
    period = 0
    if obj.path == "zigzag":
        period = _frame_of(obj.zigzag_period_s, fps)
        if period < 1:
            raise SpecError(f"{obj.id}: zigzag period shorter than one frame")
        vx, vy = _rotate(vx, vy, 45.0)

    for k in range(n - 1):
        if period and k > 0 and k % period == 0:
            turn = -90.0 if (k // period) % 2 == 1 else 90.0
            vx, vy = _rotate(vx, vy, turn)
            events.append(EventRecord.at(k, fps, EventKind.DIRECTION_CHANGE, obj.id, reason="zigzag", turn=turn))
        moving = moving_frames is None or k in moving_frames
        vel[k] = (vx, vy) if moving else (0.0, 0.0)
        if moving:
            x += vx * dt
            y += vy * dt
            if x < lo_x:
                x, vx = 2 * lo_x - x, -vx
                events.append(EventRecord.at(k + 1, fps, EventKind.WALL_CONTACT, obj.id, wall="left"))
            elif x > hi_x:
                x, vx = 2 * hi_x - x, -vx
                events.append(EventRecord.at(k + 1, fps, EventKind.WALL_CONTACT, obj.id, wall="right"))
            if y < lo_y:
                y, vy = 2 * lo_y - y, -vy
                events.append(EventRecord.at(k + 1, fps, EventKind.WALL_CONTACT, obj.id, wall="top"))
            elif y > hi_y:
                y, vy = 2 * hi_y - y, -vy
                events.append(EventRecord.at(k + 1, fps, EventKind.WALL_CONTACT, obj.id, wall="bottom"))
            if obj.acceleration:
                speed = math.hypot(vx, vy)
                new_speed = speed + obj.acceleration * dt
                if new_speed <= 0:
                    raise SpecError(f"{obj.id}: decelerates to a stop before the clip ends")
                vx, vy = vx / speed * new_speed, vy / speed * new_speed
        pos[k + 1] = (x, y)
    vel[n - 1] = (vx, vy)
    return pos, vel


def simulate(spec: SceneSpec) -> SimulationTrace:
    """Run the scene for ``ceil(duration_s * fps)`` frames."""
    n = spec.total_frames
    m = len(spec.objects)
    positions = np.empty((n, m, 2))
    velocities = np.empty((n, m, 2))
    angles = np.empty((n, m))
    events: list[EventRecord] = []
    initial = {}
    for j, obj in enumerate(spec.objects):
        positions[:, j], velocities[:, j] = _simulate_object(obj, spec, n, events)

        angles[:, j] = obj.angular_velocity * np.arange(n) / spec.fps
        if obj.angular_velocity:
            turns = np.floor(np.abs(angles[:, j]) / 360.0).astype(int)
            for k in np.flatnonzero(np.diff(turns)) + 1:
                events.append(EventRecord.at(int(k), spec.fps, EventKind.ROTATION_COMPLETE, obj.id, count=int(turns[k])))

        attrs = {"color": obj.color, "shape": obj.shape, "size": obj.size}
        initial[obj.id] = dict(attrs)
        for change in obj.attribute_schedule:
            frame = _frame_of(change.time_s, spec.fps)
            if frame >= n:
                raise SpecError(f"{obj.id}: attribute change at {change.time_s}s falls after the last frame")
            events.append(
                EventRecord.at(
                    frame, spec.fps, EventKind.ATTRIBUTE_CHANGE, obj.id,
                    attribute=change.attribute, old=attrs[change.attribute], new=change.value,
                )
            )
            attrs[change.attribute] = change.value

    return SimulationTrace(
        fps=spec.fps,
        width=spec.width,
        height=spec.height,
        object_ids=tuple(o.id for o in spec.objects),
        positions=positions,
        velocities=velocities,
        angles=angles,
        events=tuple(sort_events(events)),
        initial_attributes=initial,
    )
