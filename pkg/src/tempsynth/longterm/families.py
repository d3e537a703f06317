"""State layouts and invertible operations for the six long-term families.

State ``entities`` layouts (all nested tuples, so snapshots are hashable):

* card_stack: one tuple of card labels per stack, bottom to top
* chip_containers: chip count per container
* file_system: (cwd path parts, sorted tuple of every directory's path parts)
* symbol_arithmetic: (register value,)
* shell_game: object name under each cup, cup order left to right
* sliding_puzzle: 9 tile numbers row-major, 0 is the blank

Every forward operation has an inverse, so any script can be replayed
backwards from its final state.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..model import COLORS, Family, Operation, SpecError, StateSnapshot


class InapplicableOperation(SpecError):
    def __init__(self, op: Operation, reason: str):
        super().__init__(f"operation {op.op_index} ({op.kind} {dict(op.params)}) is not applicable: {reason}")
        self.op = op
        self.reason = reason


class FamilyRules:
    family: Family
    forward_kinds: tuple[str, ...] = ()

    def random_initial(self, rng: np.random.Generator, profile: str = "standard") -> StateSnapshot:
        raise NotImplementedError

    def random_op(self, state: StateSnapshot, rng: np.random.Generator, previous: Operation | None = None) -> Operation:
        raise NotImplementedError

    def apply(self, state: StateSnapshot, op: Operation) -> StateSnapshot:
        raise NotImplementedError

    def invert(self, op: Operation) -> Operation:
        raise NotImplementedError

    def render(self, state: StateSnapshot) -> str:
        """Canonical one-line rendering of the whole state."""
        raise NotImplementedError

    def view(self, state: StateSnapshot) -> str:
        """The part of the state a forward/retrodictive question asks for."""
        return self.render(state)

    def properties(self, state: StateSnapshot) -> list[str]:
        raise NotImplementedError

    def property_value(self, state: StateSnapshot, prop: str) -> str:
        raise NotImplementedError

    def property_fields(self, prop: str) -> dict:
        return {}

    def property_domain(self, state: StateSnapshot, prop: str) -> int | None:
        """Number of distinct answers ``prop`` can take, when small."""
        return None

    def describe(self, op: Operation) -> str:
        raise NotImplementedError

    def _snap(self, entities) -> StateSnapshot:
        return StateSnapshot(self.family.value, entities)

    def _op(self, kind: str, **params) -> Operation:
        return Operation(kind, params)


def _with(op: Operation, kind: str, **params) -> Operation:
    return Operation(kind, params, op.op_index, op.duration_s)


# --------------------------------------------------------------------------


RANKS = ("A", "2", "3", "4", "5", "6", "7", "8", "9", "10", "J", "Q", "K")
SUITS = ("S", "H", "D", "C")
DECK = tuple(r + s for s in SUITS for r in RANKS)


class CardStack(FamilyRules):
    family = Family.CARD_STACK
    forward_kinds = ("push", "pop", "move")
    stacks = 3
    max_cards = 9

    def random_initial(self, rng, profile="standard"):
        n = int(rng.integers(4, 8))
        cards = [DECK[int(i)] for i in rng.choice(len(DECK), size=n, replace=False)]
        piles: list[list[str]] = [[] for _ in range(self.stacks)]
        for card in cards:
            piles[int(rng.integers(self.stacks))].append(card)
        return self._snap(tuple(tuple(p) for p in piles))

    def random_op(self, state, rng, previous=None):
        piles = state.entities
        total = sum(len(p) for p in piles)
        for _ in range(100):
            r = rng.random()
            if r < 0.6:
                src, dst = (int(i) for i in rng.choice(self.stacks, size=2, replace=False))
                if not piles[src]:
                    continue
                op = self._op("move", src=src, dst=dst)
                if previous is not None and previous.kind == "move" and previous.params == {"src": dst, "dst": src}:
                    continue
                return op
            if r < 0.8 and total < self.max_cards:
                present = {c for p in piles for c in p}
                free = [c for c in DECK if c not in present]
                card = free[int(rng.integers(len(free)))]
                return self._op("push", card=card, stack=int(rng.integers(self.stacks)))
            if total > 2:
                nonempty = [i for i, p in enumerate(piles) if p]
                stack = nonempty[int(rng.integers(len(nonempty)))]
                return self._op("pop", stack=stack, card=piles[stack][-1])
        raise SpecError("no applicable card operation found")

    def apply(self, state, op):
        piles = [list(p) for p in state.entities]
        p = op.params
        if op.kind == "move":
            if not 0 <= p["src"] < len(piles) or not 0 <= p["dst"] < len(piles) or p["src"] == p["dst"]:
                raise InapplicableOperation(op, "invalid stack index")
            if not piles[p["src"]]:
                raise InapplicableOperation(op, "source stack is empty")
            piles[p["dst"]].append(piles[p["src"]].pop())
        elif op.kind == "push":
            if any(p["card"] in pile for pile in piles):
                raise InapplicableOperation(op, f"card {p['card']} is already on the table")
            piles[p["stack"]].append(p["card"])
        elif op.kind == "pop":
            pile = piles[p["stack"]]
            if not pile:
                raise InapplicableOperation(op, "cannot pop from an empty stack")
            if pile[-1] != p["card"]:
                raise InapplicableOperation(op, f"top card is {pile[-1]}, not {p['card']}")
            pile.pop()
        else:
            raise InapplicableOperation(op, f"unknown card operation {op.kind!r}")
        return self._snap(tuple(tuple(x) for x in piles))

    def invert(self, op):
        p = op.params
        if op.kind == "move":
            return _with(op, "move", src=p["dst"], dst=p["src"])
        if op.kind == "push":
            return _with(op, "pop", stack=p["stack"], card=p["card"])
        if op.kind == "pop":
            return _with(op, "push", card=p["card"], stack=p["stack"])
        raise InapplicableOperation(op, f"unknown card operation {op.kind!r}")

    def render(self, state):
        return " | ".join(
            f"stack {i + 1}: {' '.join(p) if p else 'empty'}" for i, p in enumerate(state.entities)
        )

    def properties(self, state):
        return [f"top:{i}" for i in range(len(state.entities))]

    def property_value(self, state, prop):
        pile = state.entities[int(prop.split(":")[1])]
        return pile[-1] if pile else "empty"

    def property_fields(self, prop):
        return {"stack": str(int(prop.split(":")[1]) + 1)}

    def describe(self, op):
        p = op.params
        if op.kind == "move":
            return f"move top card {p['src'] + 1} -> {p['dst'] + 1}"
        if op.kind == "push":
            return f"push {p['card']} onto stack {p['stack'] + 1}"
        return f"pop {p['card']} from stack {p['stack'] + 1}"


# --------------------------------------------------------------------------


CONTAINER_NAMES = ("A", "B", "C", "D")


class ChipContainers(FamilyRules):
    family = Family.CHIP_CONTAINERS
    forward_kinds = ("transfer",)

    def random_initial(self, rng, profile="standard"):
        n = 4 if profile == "hard" else 3
        while True:
            counts = tuple(int(c) for c in rng.integers(0, 7, size=n))
            if sum(counts) >= 4:
                return self._snap(counts)

    def random_op(self, state, rng, previous=None):
        counts = state.entities
        sources = [i for i, c in enumerate(counts) if c > 0]
        src = sources[int(rng.integers(len(sources)))]
        dst = [i for i in range(len(counts)) if i != src][int(rng.integers(len(counts) - 1))]
        amount = int(rng.integers(1, min(counts[src], 4) + 1))
        return self._op("transfer", amount=amount, src=src, dst=dst)

    def apply(self, state, op):
        if op.kind != "transfer":
            raise InapplicableOperation(op, f"unknown chip operation {op.kind!r}")
        counts = list(state.entities)
        p = op.params
        if p["src"] == p["dst"] or not (0 <= p["src"] < len(counts) and 0 <= p["dst"] < len(counts)):
            raise InapplicableOperation(op, "invalid container index")
        if p["amount"] < 1:
            raise InapplicableOperation(op, "must move at least one chip")
        if counts[p["src"]] < p["amount"]:
            raise InapplicableOperation(
                op, f"insufficient chips: container {CONTAINER_NAMES[p['src']]} holds {counts[p['src']]}"
            )
        counts[p["src"]] -= p["amount"]
        counts[p["dst"]] += p["amount"]
        return self._snap(tuple(counts))

    def invert(self, op):
        p = op.params
        return _with(op, "transfer", amount=p["amount"], src=p["dst"], dst=p["src"])

    def render(self, state):
        return ", ".join(f"{CONTAINER_NAMES[i]}: {c}" for i, c in enumerate(state.entities))

    def properties(self, state):
        return [f"count:{i}" for i in range(len(state.entities))]

    def property_value(self, state, prop):
        return str(state.entities[int(prop.split(":")[1])])

    def property_fields(self, prop):
        return {"container": CONTAINER_NAMES[int(prop.split(":")[1])]}

    def describe(self, op):
        p = op.params
        return f"move {p['amount']} chip{'s' if p['amount'] > 1 else ''} {CONTAINER_NAMES[p['src']]} -> {CONTAINER_NAMES[p['dst']]}"


# --------------------------------------------------------------------------


DIR_NAMES = ("home", "docs", "src", "lib", "img", "data", "tmp", "music", "notes", "bin", "logs", "web")


def _path(parts: Sequence[str]) -> str:
    return "/" + "/".join(parts)


class FileSystem(FamilyRules):
    family = Family.FILE_SYSTEM
    forward_kinds = ("enter", "leave", "create")
    max_dirs = 10

    def random_initial(self, rng, profile="standard"):
        names = [DIR_NAMES[int(i)] for i in rng.permutation(len(DIR_NAMES))]
        dirs: list[tuple[str, ...]] = []
        for name in names[: int(rng.integers(3, 6))]:
            parents = [()] + [d for d in dirs if len(d) < 2]
            parent = parents[int(rng.integers(len(parents)))]
            dirs.append(parent + (name,))
        cwd_choices = [()] + dirs
        cwd = cwd_choices[int(rng.integers(len(cwd_choices)))]
        return self._snap((cwd, tuple(sorted(dirs))))

    def _children(self, dirs, cwd):
        return [d[-1] for d in dirs if len(d) == len(cwd) + 1 and d[: len(cwd)] == cwd]

    def random_op(self, state, rng, previous=None):
        cwd, dirs = state.entities
        for _ in range(100):
            r = rng.random()
            children = self._children(dirs, cwd)
            if r < 0.45 and children:
                name = children[int(rng.integers(len(children)))]
                if previous is not None and previous.kind == "leave" and previous.params["name"] == name:
                    continue
                return self._op("enter", name=name)
            if r < 0.8 and cwd:
                if previous is not None and previous.kind == "enter":
                    continue
                return self._op("leave", name=cwd[-1])
            if r >= 0.8 and len(dirs) < self.max_dirs:
                taken = {d[-1] for d in dirs}
                free = [n for n in DIR_NAMES if n not in taken]
                if free:
                    return self._op("create", name=free[int(rng.integers(len(free)))])
        raise SpecError("no applicable file-system operation found")

    def apply(self, state, op):
        cwd, dirs = state.entities
        name = op.params.get("name")
        children = self._children(dirs, cwd)
        if op.kind == "enter":
            if name not in children:
                raise InapplicableOperation(op, f"{_path(cwd)} has no subdirectory {name!r}")
            return self._snap((cwd + (name,), dirs))
        if op.kind == "leave":
            if not cwd:
                raise InapplicableOperation(op, "already at the root")
            if cwd[-1] != name:
                raise InapplicableOperation(op, f"current directory is {_path(cwd)}, not .../{name}")
            return self._snap((cwd[:-1], dirs))
        if op.kind == "create":
            if name in children:
                raise InapplicableOperation(op, f"{name!r} already exists in {_path(cwd)}")
            return self._snap((cwd, tuple(sorted(dirs + (cwd + (name,),)))))
        if op.kind == "remove":
            target = cwd + (name,)
            if target not in dirs:
                raise InapplicableOperation(op, f"{_path(target)} does not exist")
            if any(len(d) > len(target) and d[: len(target)] == target for d in dirs):
                raise InapplicableOperation(op, f"{_path(target)} is not empty")
            return self._snap((cwd, tuple(d for d in dirs if d != target)))
        raise InapplicableOperation(op, f"unknown file-system operation {op.kind!r}")

    def invert(self, op):
        name = op.params["name"]
        inverse = {"enter": "leave", "leave": "enter", "create": "remove", "remove": "create"}
        if op.kind not in inverse:
            raise InapplicableOperation(op, f"unknown file-system operation {op.kind!r}")
        return _with(op, inverse[op.kind], name=name)

    def render(self, state):
        cwd, dirs = state.entities
        return f"cwd {_path(cwd)}; dirs {', '.join(_path(d) for d in dirs)}"

    def view(self, state):
        return _path(state.entities[0])

    def properties(self, state):
        return ["cwd"]

    def property_value(self, state, prop):
        return _path(state.entities[0])

    def describe(self, op):
        name = op.params["name"]
        return {
            "enter": f"cd {name}",
            "leave": f"cd .. (leave {name})",
            "create": f"mkdir {name}",
            "remove": f"rmdir {name}",
        }[op.kind]


# --------------------------------------------------------------------------


class SymbolArithmetic(FamilyRules):
    family = Family.SYMBOL_ARITHMETIC
    forward_kinds = ("add", "sub", "mul")
    bound = 500

    def random_initial(self, rng, profile="standard"):
        return self._snap((int(rng.integers(1, 21)),))

    def random_op(self, state, rng, previous=None):
        (value,) = state.entities
        for _ in range(100):
            r = rng.random()
            if r < 0.4:
                op = self._op("add", k=int(rng.integers(1, 10)))
            elif r < 0.75:
                op = self._op("sub", k=int(rng.integers(1, 10)))
            else:
                op = self._op("mul", k=int(rng.integers(2, 4)))
            if previous is not None and self.invert(previous).kind == op.kind and previous.params == op.params:
                continue
            if abs(self.apply(state, op).entities[0]) <= self.bound:
                return op
        raise SpecError("no bounded arithmetic operation found")

    def apply(self, state, op):
        (value,) = state.entities
        k = op.params["k"]
        if op.kind == "add":
            return self._snap((value + k,))
        if op.kind == "sub":
            return self._snap((value - k,))
        if op.kind == "mul":
            return self._snap((value * k,))
        if op.kind == "div":
            if k == 0 or value % k:
                raise InapplicableOperation(op, f"{value} is not divisible by {k}")
            return self._snap((value // k,))
        raise InapplicableOperation(op, f"unknown arithmetic operation {op.kind!r}")

    def invert(self, op):
        inverse = {"add": "sub", "sub": "add", "mul": "div", "div": "mul"}
        if op.kind not in inverse:
            raise InapplicableOperation(op, f"unknown arithmetic operation {op.kind!r}")
        return _with(op, inverse[op.kind], k=op.params["k"])

    def render(self, state):
        return f"register = {state.entities[0]}"

    def view(self, state):
        return str(state.entities[0])

    def properties(self, state):
        return ["value"]

    def property_value(self, state, prop):
        return str(state.entities[0])

    def describe(self, op):
        symbol = {"add": "+", "sub": "-", "mul": "x", "div": "/"}[op.kind]
        return f"{symbol} {op.params['k']}"


# --------------------------------------------------------------------------


SHELL_OBJECTS = ("circle", "square", "triangle", "star")


class ShellGame(FamilyRules):
    family = Family.SHELL_GAME
    forward_kinds = ("swap",)

    def random_initial(self, rng, profile="standard"):
        n = 4 if profile == "hard" else 3
        colors = rng.choice(len(COLORS), size=n, replace=False)
        shapes = rng.permutation(len(SHELL_OBJECTS))[:n]
        return self._snap(tuple(f"{COLORS[int(c)]} {SHELL_OBJECTS[int(s)]}" for c, s in zip(colors, shapes)))

    def random_op(self, state, rng, previous=None):
        n = len(state.entities)
        while True:
            a, b = sorted(int(i) for i in rng.choice(n, size=2, replace=False))
            if previous is None or previous.params != {"a": a, "b": b} or n == 2:
                return self._op("swap", a=a, b=b)

    def apply(self, state, op):
        if op.kind != "swap":
            raise InapplicableOperation(op, f"unknown shell-game operation {op.kind!r}")
        cells = list(state.entities)
        a, b = op.params["a"], op.params["b"]
        if a == b or not (0 <= a < len(cells) and 0 <= b < len(cells)):
            raise InapplicableOperation(op, "invalid cup indices")
        cells[a], cells[b] = cells[b], cells[a]
        return self._snap(tuple(cells))

    def invert(self, op):
        return _with(op, "swap", **op.params)

    def render(self, state):
        return "; ".join(f"cup {i + 1}: {name}" for i, name in enumerate(state.entities))

    def properties(self, state):
        return [f"cup_of:{name}" for name in state.entities]

    def property_value(self, state, prop):
        return f"cup {state.entities.index(prop.split(':', 1)[1]) + 1}"

    def property_fields(self, prop):
        return {"object": prop.split(":", 1)[1]}

    def property_domain(self, state, prop):
        return len(state.entities)

    def describe(self, op):
        return f"swap cups {op.params['a'] + 1} and {op.params['b'] + 1}"


# --------------------------------------------------------------------------


MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
OPPOSITE = {"up": "down", "down": "up", "left": "right", "right": "left"}


class SlidingPuzzle(FamilyRules):
    """3x3 puzzle; ``slide(direction)`` moves the blank one cell."""

    family = Family.SLIDING_PUZZLE
    forward_kinds = ("slide",)
    side = 3

    def random_initial(self, rng, profile="standard"):
        state = self._snap(tuple(list(range(1, self.side * self.side)) + [0]))
        previous = None
        for _ in range(40):
            previous = self.random_op(state, rng, previous)
            state = self.apply(state, previous)
        return state

    def _legal(self, tiles) -> list[str]:
        r, c = divmod(tiles.index(0), self.side)
        return [d for d, (dr, dc) in MOVES.items() if 0 <= r + dr < self.side and 0 <= c + dc < self.side]

    def random_op(self, state, rng, previous=None):
        legal = self._legal(state.entities)
        if previous is not None:
            legal = [d for d in legal if d != OPPOSITE[previous.params["direction"]]]
        return self._op("slide", direction=legal[int(rng.integers(len(legal)))])

    def apply(self, state, op):
        if op.kind != "slide" or op.params.get("direction") not in MOVES:
            raise InapplicableOperation(op, "unknown slide")
        tiles = list(state.entities)
        if op.params["direction"] not in self._legal(tiles):
            raise InapplicableOperation(op, f"blank cannot slide {op.params['direction']} into the wall")
        i = tiles.index(0)
        dr, dc = MOVES[op.params["direction"]]
        j = i + dr * self.side + dc
        tiles[i], tiles[j] = tiles[j], tiles[i]
        return self._snap(tuple(tiles))

    def invert(self, op):
        return _with(op, "slide", direction=OPPOSITE[op.params["direction"]])

    def render(self, state):
        t = state.entities
        rows = [t[i: i + self.side] for i in range(0, len(t), self.side)]
        return " / ".join(" ".join("_" if v == 0 else str(v) for v in row) for row in rows)

    def properties(self, state):
        return ["blank"]

    def property_value(self, state, prop):
        r, c = divmod(state.entities.index(0), self.side)
        return f"row {r + 1}, column {c + 1}"

    def describe(self, op):
        return f"blank moves {op.params['direction']}"


RULES: dict[str, FamilyRules] = {
    r.family.value: r
    for r in (CardStack(), ChipContainers(), FileSystem(), SymbolArithmetic(), ShellGame(), SlidingPuzzle())
}


def rules(family: str | Family) -> FamilyRules:
    return RULES[Family(family).value]


def apply(state: StateSnapshot, op: Operation) -> StateSnapshot:
    """S_{t+1} from S_t; the input snapshot is never modified."""
    return rules(state.family).apply(state, op)


KIND_FAMILY = {
    "push": Family.CARD_STACK, "pop": Family.CARD_STACK, "move": Family.CARD_STACK,
    "transfer": Family.CHIP_CONTAINERS,
    "enter": Family.FILE_SYSTEM, "leave": Family.FILE_SYSTEM, "create": Family.FILE_SYSTEM, "remove": Family.FILE_SYSTEM,
    "add": Family.SYMBOL_ARITHMETIC, "sub": Family.SYMBOL_ARITHMETIC, "mul": Family.SYMBOL_ARITHMETIC,
    "div": Family.SYMBOL_ARITHMETIC,
    "swap": Family.SHELL_GAME,
    "slide": Family.SLIDING_PUZZLE,
}


def invert(op: Operation) -> Operation:
    """The operation undoing ``op``; operation kinds are unique across families."""
    if op.kind not in KIND_FAMILY:
        raise SpecError(f"unknown operation kind {op.kind!r}")
    return rules(KIND_FAMILY[op.kind]).invert(op)


def replay(state: StateSnapshot, ops: Iterable[Operation]) -> StateSnapshot:
    for op in ops:
        state = apply(state, op)
    return state


def rewind(state: StateSnapshot, ops: Sequence[Operation]) -> StateSnapshot:
    """Undo ``ops`` from their final state by applying inverses in reverse."""
    r = rules(state.family)
    for op in reversed(ops):
        state = r.apply(state, r.invert(op))
    return state


def prefix_states(state: StateSnapshot, ops: Sequence[Operation]) -> list[StateSnapshot]:
    """[S_0, S_1, ..., S_T]."""
    states = [state]
    for op in ops:
        states.append(apply(states[-1], op))
    return states
