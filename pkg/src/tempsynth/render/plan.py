"""Frame plans: per-frame draw commands, built before any pixel is touched.

Every command carries a ``role``. Occlusion and no-leak rules are checked
against these roles rather than pixels:

* ``entity``: depicts state contents (card faces, chip piles, tile numbers,
  shell-game objects, moving short-term objects)
* ``structure``: containers, card backs, blank tiles; no contents
* ``occluder``: shell-game cups
* ``operation``: the moving/labelled part of the current operation
* ``overlay`` / ``placeholder``: clock, phase header, hidden-state marker
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..model import (
    PALETTE,
    EventKind,
    EventRecord,
    Family,
    ScenarioScript,
    SpecError,
    StateSnapshot,
    VisibleState,
    format_clock,
)
from ..longterm.families import CONTAINER_NAMES, KIND_FAMILY, MOVES, prefix_states, rules

BLACK = (20, 20, 20)
WHITE = (255, 255, 255)
GRAY = (150, 150, 150)
DARK = (60, 60, 70)
CARD_BACK = (50, 70, 150)
CUP = (150, 90, 50)
TILE = (200, 190, 160)

PHASES = ("initial_reveal", "operation", "final_reveal", "continuous_motion")


@dataclass(frozen=True)
class RenderConfig:
    width: int = 448
    height: int = 448
    fps: int = 30
    background: tuple[int, int, int] = (245, 245, 245)
    antialias: bool = True
    timestamp_longterm: bool = True
    timestamp_shortterm: bool = False
    text_scale: int = 2

    def __post_init__(self) -> None:
        if self.width % 2 or self.height % 2:
            raise SpecError("canvas dimensions must be even for H.264 output")
        if self.fps <= 0:
            raise SpecError("fps must be positive")

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height, "fps": self.fps, "background": list(self.background),
            "antialias": self.antialias, "timestamp_longterm": self.timestamp_longterm,
            "timestamp_shortterm": self.timestamp_shortterm, "text_scale": self.text_scale,
        }


@dataclass(frozen=True)
class DrawCommand:
    op: str  # circle | square | triangle | star | rect | box | text
    x: float
    y: float
    size: float = 0.0  # radius / half-extent / rect half-width
    color: tuple[int, int, int] = BLACK
    role: str = "structure"
    angle: float = 0.0
    h: float = 0.0  # rect/box half-height
    text: str = ""
    scale: int = 2
    ref: str = ""


@dataclass(frozen=True)
class Phase:
    name: str
    start: int
    end: int  # exclusive

    @property
    def frames(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class FramePlan:
    width: int
    height: int
    fps: int
    background: tuple[int, int, int]
    frames: tuple[tuple[DrawCommand, ...], ...]
    phases: tuple[Phase, ...]

    def __len__(self) -> int:
        return len(self.frames)

    def phase(self, name: str) -> Phase:
        for p in self.phases:
            if p.name == name:
                return p
        raise KeyError(name)

    def phase_of(self, frame: int) -> str:
        for p in self.phases:
            if p.start <= frame < p.end:
                return p.name
        raise IndexError(frame)

    def commands_in(self, phase: str) -> Iterable[DrawCommand]:
        p = self.phase(phase)
        for frame in self.frames[p.start: p.end]:
            yield from frame


def ease(u: float) -> float:
    """Smoothstep; polynomial so results are bit-stable across platforms."""
    u = min(max(u, 0.0), 1.0)
    return u * u * (3.0 - 2.0 * u)


def lerp(a: float, b: float, u: float) -> float:
    return a + (b - a) * u


def _clock(frame: int, fps: int, cfg: RenderConfig) -> DrawCommand:
    return DrawCommand("text", 44, 16, text=format_clock(frame / fps), role="overlay", scale=cfg.text_scale)


# --------------------------------------------------------------------------
# Short-term scenes


def plan_shortterm(trace, cfg: RenderConfig) -> FramePlan:
    if trace.fps != cfg.fps:
        raise SpecError(f"trace was simulated at {trace.fps} fps but the render config is {cfg.fps} fps")
    if (trace.width, trace.height) != (cfg.width, cfg.height):
        raise SpecError("trace canvas does not match the render canvas")
    n = trace.total_frames
    schedules = []
    for oid in trace.object_ids:
        changes = [(e.frame_index, e.payload["attribute"], e.payload["new"])
                   for e in trace.events_for(oid, EventKind.ATTRIBUTE_CHANGE)]
        schedules.append((dict(trace.initial_attributes[oid]), changes))

    frames = []
    cursor = [0] * len(schedules)
    for k in range(n):
        cmds = []
        for j, (attrs, changes) in enumerate(schedules):
            while cursor[j] < len(changes) and changes[cursor[j]][0] <= k:
                _, attr, value = changes[cursor[j]]
                attrs[attr] = value
                cursor[j] += 1
            x, y = trace.positions[k, j]
            cmds.append(DrawCommand(
                attrs["shape"], float(x), float(y), float(attrs["size"]), PALETTE[attrs["color"]],
                role="entity", angle=float(trace.angles[k, j]), ref=trace.object_ids[j],
            ))
        if cfg.timestamp_shortterm:
            cmds.append(_clock(k, trace.fps, cfg))
        frames.append(tuple(cmds))
    return FramePlan(cfg.width, cfg.height, cfg.fps, cfg.background, tuple(frames),
                     (Phase("continuous_motion", 0, n),))


# --------------------------------------------------------------------------
# Long-term scenes


@dataclass(frozen=True)
class Timing:
    reveal_frames: int
    op_frames: tuple[int, ...]

    @property
    def op_starts(self) -> list[int]:
        starts, at = [], self.reveal_frames
        for f in self.op_frames:
            starts.append(at)
            at += f
        return starts

    @property
    def total(self) -> int:
        return 2 * self.reveal_frames + sum(self.op_frames)


def script_timing(script: ScenarioScript, fps: int) -> Timing:
    return Timing(
        reveal_frames=int(round(script.reveal_duration_s * fps)),
        op_frames=tuple(int(round(op.duration_s * fps)) for op in script.operations),
    )


def longterm_events(script: ScenarioScript, fps: int) -> list[EventRecord]:
    """Phase boundaries plus one ``operation_applied`` per op at its first frame."""
    timing = script_timing(script, fps)
    r = rules(script.family)
    op_end = timing.reveal_frames + sum(timing.op_frames)
    events = [
        EventRecord.at(0, fps, EventKind.PHASE_BOUNDARY, "scene", phase="initial_reveal"),
        EventRecord.at(timing.reveal_frames, fps, EventKind.PHASE_BOUNDARY, "scene", phase="operation"),
        EventRecord.at(op_end, fps, EventKind.PHASE_BOUNDARY, "scene", phase="final_reveal"),
    ]
    for op, start, frames in zip(script.operations, timing.op_starts, timing.op_frames):
        events.append(EventRecord.at(
            start, fps, EventKind.OPERATION_APPLIED, f"op{op.op_index:02d}",
            op_index=op.op_index, op_kind=op.kind, params=dict(op.params),
            description=r.describe(op), end_frame=start + frames - 1,
        ))
    return sorted(events, key=EventRecord.sort_key)


class Layout:
    """Family-specific drawing; subclasses fill in the three hooks."""

    def __init__(self, cfg: RenderConfig, state: StateSnapshot):
        self.cfg = cfg
        self.w, self.h = cfg.width, cfg.height
        self.s = cfg.text_scale
        self.setup(state)

    def setup(self, state: StateSnapshot) -> None:
        pass

    def text(self, x, y, text, role="structure", color=BLACK, scale=None):
        return DrawCommand("text", x, y, text=text, color=color, role=role, scale=scale or self.s)

    def reveal(self, state: StateSnapshot) -> list[DrawCommand]:
        raise NotImplementedError

    def hidden(self) -> list[DrawCommand]:
        return [self.text(self.w / 2, self.h / 2, "?", role="placeholder", scale=self.s * 4)]

    def animate(self, before: StateSnapshot, op, u: float) -> list[DrawCommand]:
        raise NotImplementedError

    def caption(self, op) -> DrawCommand:
        return self.text(self.w / 2, self.h - 24, rules(KIND_FAMILY[op.kind]).describe(op), role="operation")


class CardLayout(Layout):
    cw, ch, step = 26.0, 36.0, 20.0

    def setup(self, state):
        self.n = len(state.entities)
        self.xs = [self.w * (i + 1) / (self.n + 1) for i in range(self.n)]
        self.base = self.h * 0.72

    def slot(self, stack: int, depth: int) -> tuple[float, float]:
        return self.xs[stack], self.base - depth * self.step

    def labels(self):
        return [self.text(x, self.base + self.ch + 16, f"stack {i + 1}") for i, x in enumerate(self.xs)]

    def face(self, x, y, card, role):
        return [
            DrawCommand("rect", x, y, self.cw, WHITE, role, h=self.ch, ref=card),
            DrawCommand("box", x, y, self.cw, BLACK, role, h=self.ch, ref=card),
            self.text(x, y + self.ch - 10, card, role=role, color=(180, 20, 20) if card[-1] in "HD" else BLACK),
        ]

    def back(self, x, y, role="structure"):
        return [DrawCommand("rect", x, y, self.cw, CARD_BACK, role, h=self.ch),
                DrawCommand("box", x, y, self.cw, WHITE, role, h=self.ch)]

    def reveal(self, state):
        out = self.labels()
        for i, pile in enumerate(state.entities):
            for d, card in enumerate(pile):
                out += self.face(*self.slot(i, d), card, "entity")
        return out

    def _backs(self, piles):
        out = self.labels()
        for i, n in enumerate(piles):
            for d in range(n):
                out += self.back(*self.slot(i, d))
        return out

    def animate(self, before, op, u):
        piles = [len(p) for p in before.entities]
        p = op.params
        if op.kind == "move":
            piles[p["src"]] -= 1
            x0, y0 = self.slot(p["src"], piles[p["src"]])
            x1, y1 = self.slot(p["dst"], piles[p["dst"]])
            e = ease(u)
            lift = 60.0 * 4 * e * (1 - e)
            out = self._backs(piles) + self.back(lerp(x0, x1, e), lerp(y0, y1, e) - lift, role="operation")
        elif op.kind == "push":
            x1, y1 = self.slot(p["stack"], piles[p["stack"]])
            out = self._backs(piles) + self.face(x1, lerp(-self.ch, y1, ease(u)), p["card"], "operation")
        else:
            piles[p["stack"]] -= 1
            x0, y0 = self.slot(p["stack"], piles[p["stack"]])
            out = self._backs(piles) + self.face(x0, lerp(y0, -self.ch, ease(u)), p["card"], "operation")
        return out + [self.caption(op)]


class ChipLayout(Layout):
    bw, bh = 38.0, 64.0

    def setup(self, state):
        self.n = len(state.entities)
        self.xs = [self.w * (i + 1) / (self.n + 1) for i in range(self.n)]
        self.y = self.h * 0.55

    def boxes(self, closed: bool):
        out = []
        for i, x in enumerate(self.xs):
            if closed:
                out.append(DrawCommand("rect", x, self.y, self.bw, GRAY, "structure", h=self.bh))
            out.append(DrawCommand("box", x, self.y, self.bw, DARK, "structure", h=self.bh))
            out.append(self.text(x, self.y + self.bh + 16, CONTAINER_NAMES[i]))
        return out

    def chip_xy(self, box: int, k: int) -> tuple[float, float]:
        row, col = divmod(k, 4)
        return self.xs[box] - 27 + col * 18, self.y + self.bh - 11 - row * 18

    def reveal(self, state):
        out = self.boxes(closed=False)
        for i, count in enumerate(state.entities):
            for k in range(count):
                out.append(DrawCommand("circle", *self.chip_xy(i, k), 7.0, PALETTE["yellow"], "entity"))
            out.append(self.text(self.xs[i], self.y - self.bh - 16, str(count), role="entity"))
        return out

    def animate(self, before, op, u):
        p = op.params
        out = self.boxes(closed=True)
        e = ease(u)
        x0, x1 = self.xs[p["src"]], self.xs[p["dst"]]
        top = self.y - self.bh - 30
        lift = 50.0 * 4 * e * (1 - e)
        for k in range(p["amount"]):
            dx = (k - (p["amount"] - 1) / 2) * 18
            out.append(DrawCommand("circle", lerp(x0, x1, e) + dx, top - lift, 8.0, PALETTE["yellow"], "operation"))
        return out + [self.caption(op)]


class FileLayout(Layout):
    def reveal(self, state):
        cwd, dirs = state.entities
        out = [self.text(self.w / 2, 60, "directory tree", role="structure")]
        lines = [((), "/")] + [(d, d[-1] + "/") for d in dirs]
        for row, (d, label) in enumerate(lines):
            marker = "  <- here" if d == cwd else ""
            out.append(DrawCommand("text", 40 + 28 * len(d), 100 + 26 * row, text=label + marker,
                                   role="entity", scale=self.s, ref="anchor-left"))
        return out

    def animate(self, before, op, u):
        command = "$ " + rules(Family.FILE_SYSTEM).describe(op)
        shown = command[: max(2, int(round(len(command) * min(1.0, 1.5 * u))))]
        return [
            DrawCommand("rect", self.w / 2, self.h / 2, self.w * 0.42, DARK, "structure", h=40),
            DrawCommand("text", 40, self.h / 2, text=shown, color=(120, 230, 120), role="operation",
                        scale=self.s, ref="anchor-left"),
        ]


class SymbolLayout(Layout):
    def register(self):
        return [DrawCommand("box", self.w / 2, self.h / 2, 70, DARK, "structure", h=44)]

    def reveal(self, state):
        return self.register() + [self.text(self.w / 2, self.h / 2, str(state.entities[0]), "entity", scale=self.s * 2)]

    def animate(self, before, op, u):
        label = rules(Family.SYMBOL_ARITHMETIC).describe(op)
        x = lerp(40.0, self.w / 2 - 110, ease(u))
        return self.register() + [
            DrawCommand("rect", x, self.h / 2, 34, (230, 230, 250), "operation", h=24),
            self.text(x, self.h / 2, label, role="operation"),
        ]


class ShellLayout(Layout):
    cup = 34.0

    def setup(self, state):
        self.n = len(state.entities)
        self.xs = [self.w * (i + 1) / (self.n + 1) for i in range(self.n)]
        self.y = self.h * 0.55

    def cups(self, positions, lifted=False):
        dy = -80.0 if lifted else 0.0
        return [DrawCommand("rect", x, y + dy, self.cup, CUP, "occluder", h=self.cup * 1.2, ref=f"cup{i}")
                for i, (x, y) in enumerate(positions)]

    def labels(self):
        return [self.text(x, self.y + self.cup * 1.2 + 18, f"cup {i + 1}") for i, x in enumerate(self.xs)]

    def reveal(self, state):
        out = self.labels()
        for i, name in enumerate(state.entities):
            color, shape = name.split(" ")
            out.append(DrawCommand(shape, self.xs[i], self.y + 10, 22.0, PALETTE[color], "entity", ref=name))
        return out + self.cups([(x, self.y) for x in self.xs], lifted=True)

    def hidden(self):
        mark = self.text(self.w / 2, self.h * 0.25, "?", role="placeholder", scale=self.s * 4)
        return self.labels() + self.cups([(x, self.y) for x in self.xs]) + [mark]

    def animate(self, before, op, u):
        a, b = op.params["a"], op.params["b"]
        e = ease(u)
        arc = 70.0 * 4 * e * (1 - e)
        positions = [(x, self.y) for x in self.xs]
        positions[a] = (lerp(self.xs[a], self.xs[b], e), self.y - arc)
        positions[b] = (lerp(self.xs[b], self.xs[a], e), self.y + arc)
        return self.labels() + self.cups(positions) + [self.caption(op)]


class PuzzleLayout(Layout):
    cell = 90.0

    def xy(self, index: int) -> tuple[float, float]:
        r, c = divmod(index, 3)
        return self.w / 2 + (c - 1) * self.cell, self.h / 2 + (r - 1) * self.cell

    def frame(self):
        return [DrawCommand("box", self.w / 2, self.h / 2, 1.5 * self.cell + 4, DARK, "structure", h=1.5 * self.cell + 4)]

    def tile(self, x, y, role, number=None):
        out = [DrawCommand("rect", x, y, self.cell / 2 - 3, TILE, role, h=self.cell / 2 - 3),
               DrawCommand("box", x, y, self.cell / 2 - 3, DARK, role, h=self.cell / 2 - 3)]
        if number is not None:
            out.append(self.text(x, y, str(number), role=role, scale=self.s * 2))
        return out

    def reveal(self, state):
        out = self.frame()
        for i, v in enumerate(state.entities):
            if v:
                out += self.tile(*self.xy(i), "entity", v)
        return out

    def animate(self, before, op, u):
        tiles = before.entities
        blank = tiles.index(0)
        dr, dc = MOVES[op.params["direction"]]
        mover = blank + dr * 3 + dc
        out = self.frame()
        for i, v in enumerate(tiles):
            if v and i != mover:
                out += self.tile(*self.xy(i), "structure")
        (x0, y0), (x1, y1) = self.xy(mover), self.xy(blank)
        e = ease(u)
        out += self.tile(lerp(x0, x1, e), lerp(y0, y1, e), "operation")
        return out + [self.caption(op)]


LAYOUTS = {
    Family.CARD_STACK: CardLayout,
    Family.CHIP_CONTAINERS: ChipLayout,
    Family.FILE_SYSTEM: FileLayout,
    Family.SYMBOL_ARITHMETIC: SymbolLayout,
    Family.SHELL_GAME: ShellLayout,
    Family.SLIDING_PUZZLE: PuzzleLayout,
}


def plan_longterm(script: ScenarioScript, cfg: RenderConfig) -> FramePlan:
    """Initial reveal, one animation per operation, final reveal.

    A reveal whose state is hidden draws only a placeholder, and the
    operation phase never draws ``entity`` commands.
    """
    layout = LAYOUTS[Family(script.family)](cfg, script.initial)
    timing = script_timing(script, cfg.fps)
    states = prefix_states(script.initial, script.operations)
    show_initial = script.visible_state == VisibleState.INITIAL_ONLY

    def header(label):
        return DrawCommand("text", cfg.width / 2, 16, text=label, role="overlay", scale=cfg.text_scale)

    def stamp(cmds: Sequence[DrawCommand], frame: int) -> tuple[DrawCommand, ...]:
        if cfg.timestamp_longterm:
            return tuple(cmds) + (_clock(frame, cfg.fps, cfg),)
        return tuple(cmds)

    frames: list[tuple[DrawCommand, ...]] = []
    first = layout.reveal(script.initial) if show_initial else layout.hidden()
    first = first + [header("START")]
    for _ in range(timing.reveal_frames):
        frames.append(stamp(first, len(frames)))

    for op, before, n in zip(script.operations, states, timing.op_frames):
        for j in range(n):
            u = j / (n - 1) if n > 1 else 1.0
            frames.append(stamp(layout.animate(before, op, u) + [header(f"STEP {op.op_index}")], len(frames)))

    last = layout.hidden() if show_initial else layout.reveal(script.final)
    last = last + [header("END")]
    for _ in range(timing.reveal_frames):
        frames.append(stamp(last, len(frames)))

    r = timing.reveal_frames
    ops_end = r + sum(timing.op_frames)
    phases = (Phase("initial_reveal", 0, r), Phase("operation", r, ops_end), Phase("final_reveal", ops_end, ops_end + r))
    return FramePlan(cfg.width, cfg.height, cfg.fps, cfg.background, tuple(frames), phases)
