"""Grid-world case studies emitted as stochastic games.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row counted
from the top, so North decreases ``y``.  Obstacle cells are not states.
``reconstructed``, ``start`` and ``adversary`` are optional; the start
defaults to the first free cell and the adversary start is only needed for
the adversary game.

Grid spec text format::

    // comment lines start with two slashes
    ap: b c d e
    reconstructed: true
    start: 0,4
    adversary: 4,0
    grid:
    . . o
    . # .
    labels:
    cell(0,1): b,d
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import GridSpecError
from .game import CTRL, ENV, StochasticGame

EMPTY, OBSTACLE, ABSORBING = ".", "#", "o"
CELL_KINDS = {EMPTY: "empty", OBSTACLE: "obstacle", ABSORBING: "absorbing"}

DIRECTIONS = ("North", "South", "East", "West")
_STEP = {"North": (0, -1), "South": (0, 1), "East": (1, 0), "West": (-1, 0)}
_RIGHT_OF = {"North": "East", "East": "South", "South": "West", "West": "North"}
_LEFT_OF = {v: k for k, v in _RIGHT_OF.items()}

# environment disturbances: (intended, right side, left side)
DISTURBANCES = {
    "None": (Fraction(1), Fraction(0), Fraction(0)),
    "Both": (Fraction(4, 5), Fraction(1, 10), Fraction(1, 10)),
    "Right": (Fraction(9, 10), Fraction(1, 10), Fraction(0)),
    "Left": (Fraction(9, 10), Fraction(0), Fraction(1, 10)),
}
NOISY_MOVE = (Fraction(4, 5), Fraction(1, 10), Fraction(1, 10))
CAUGHT = "a"

Cell = tuple[int, int]


@dataclass(frozen=True)
class GridSpec:
    ap: tuple[str, ...]
    rows: tuple[str, ...]  # one string of cell codes per row, top row first
    labels: dict[Cell, frozenset[str]] = field(default_factory=dict)
    start: Cell | None = None
    adversary: Cell | None = None
    reconstructed: bool = False

    def __post_init__(self):
        if not self.rows or not self.rows[0]:
            raise GridSpecError("grid must be at least 1x1")
        if any(len(r) != len(self.rows[0]) for r in self.rows):
            raise GridSpecError("grid rows have different lengths")
        for r in self.rows:
            bad = set(r) - set(CELL_KINDS)
            if bad:
                raise GridSpecError(f"unknown cell codes {sorted(bad)}")
        for cell, lab in self.labels.items():
            if not self.inside(cell):
                raise GridSpecError(f"label for cell {cell} outside the grid")
            if not lab <= set(self.ap):
                raise GridSpecError(f"cell {cell}: labels {sorted(lab - set(self.ap))} not in AP")
        if not self.free_cells:
            raise GridSpecError("grid has no free cell")
        for name in ("start", "adversary"):
            cell = getattr(self, name)
            if cell is not None and (not self.inside(cell) or self.kind(cell) == OBSTACLE):
                raise GridSpecError(f"{name} cell {cell} is outside the grid or an obstacle")

    @property
    def width(self) -> int:
        return len(self.rows[0])

    @property
    def height(self) -> int:
        return len(self.rows)

    def inside(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def kind(self, cell: Cell) -> str:
        return self.rows[cell[1]][cell[0]]

    @property
    def free_cells(self) -> list[Cell]:
        return [
            (x, y) for y in range(self.height) for x in range(self.width) if self.rows[y][x] != OBSTACLE
        ]

    def label(self, cell: Cell) -> frozenset[str]:
        return self.labels.get(cell, frozenset())

    def start_cell(self) -> Cell:
        return self.start if self.start is not None else self.free_cells[0]

    def layout(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "rows": list(self.rows),
            "labels": {f"{x},{y}": sorted(lab) for (x, y), lab in sorted(self.labels.items())},
            "reconstructed": self.reconstructed,
        }


_KEY = re.compile(r"^([a-z]+):\s*(.*)$")
_LABEL = re.compile(r"^cell\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*:\s*(.*)$")


def _cell(text: str, lineno: int) -> Cell:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise GridSpecError(f"expected 'x,y', got {text!r}", lineno) from None
    return x, y


def parse_grid_spec(text: str) -> GridSpec:
    ap = None
    rows, labels = [], {}
    start = adversary = None
    reconstructed = False
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        m = _LABEL.match(line)
        if m:
            lab = frozenset(a.strip() for a in m.group(3).split(",") if a.strip())
            labels[(int(m.group(1)), int(m.group(2)))] = lab
            section = "labels"
            continue
        m = _KEY.match(line)
        if m:
            key, value = m.group(1), m.group(2).strip()
            section = None
            if key == "ap":
                ap = tuple(value.replace(",", " ").split())
            elif key == "reconstructed":
                reconstructed = value.lower() in ("true", "yes", "1")
            elif key == "start":
                start = _cell(value, lineno)
            elif key == "adversary":
                adversary = _cell(value, lineno)
            elif key in ("grid", "labels"):
                section = key
            else:
                raise GridSpecError(f"unknown key {key!r}", lineno)
            continue
        if section == "grid":
            tokens = line.split()
            rows.append("".join(tokens) if all(len(t) == 1 for t in tokens) else line.replace(" ", ""))
            continue
        raise GridSpecError(f"unexpected line {raw!r}", lineno)
    if ap is None:
        raise GridSpecError("missing 'ap:' line")
    return GridSpec(ap, tuple(rows), labels, start, adversary, reconstructed)


def load_grid_spec(path) -> GridSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_grid_spec(fh.read())


def _move(spec: GridSpec, cell: Cell, direction: str) -> Cell:
    dx, dy = _STEP[direction]
    nxt = (cell[0] + dx, cell[1] + dy)
    if not spec.inside(nxt) or spec.kind(nxt) == OBSTACLE:
        return cell
    return nxt


def _outcomes(spec: GridSpec, cell: Cell, direction: str, weights) -> dict[Cell, Fraction]:
    """Successor cells with exact masses; blocked moves merge into staying put."""
    if spec.kind(cell) == ABSORBING:
        return {cell: Fraction(1)}
    out: dict[Cell, Fraction] = {}
    for d, w in zip((direction, _RIGHT_OF[direction], _LEFT_OF[direction]), weights):
        if w:
            nxt = _move(spec, cell, d)
            out[nxt] = out.get(nxt, Fraction(0)) + w
    assert sum(out.values()) == 1
    return out


def build_robust_game(spec: GridSpec) -> StochasticGame:
    """Robot control under a disturbing environment.

    Controller states are cells (actions North/South/East/West); each leads to
    the environment state (cell, intended direction), where the environment
    picks one of None/Both/Right/Left.  Environment states carry the label of
    their cell so that every step of a run reads the robot's position.
    """
    cells = spec.free_cells
    index = {cell: i for i, cell in enumerate(cells)}
    n = len(cells)
    owner, labels, actions, transitions, metas = [], [], [], [], []
    for i, cell in enumerate(cells):
        owner.append(CTRL)
        labels.append(spec.label(cell))
        actions.append(DIRECTIONS)
        transitions.append(tuple(((n + 4 * i + d, 1.0),) for d in range(4)))
        metas.append({"role": "robot", "cell": list(cell)})
    for i, cell in enumerate(cells):
        for direction in DIRECTIONS:
            owner.append(ENV)
            labels.append(spec.label(cell))
            actions.append(tuple(DISTURBANCES))
            transitions.append(
                tuple(
                    tuple(
                        (index[c], float(p))
                        for c, p in sorted(_outcomes(spec, cell, direction, w).items(), key=lambda cp: index[cp[0]])
                    )
                    for w in DISTURBANCES.values()
                )
            )
            metas.append({"role": "disturbance", "cell": list(cell), "intended": direction})
    meta = {"kind": "robust-grid", "grid": spec.layout(), "position_key": "cell", "states": metas}
    return StochasticGame(
        ap=spec.ap,
        owner=tuple(owner),
        labels=tuple(labels),
        actions=tuple(actions),
        transitions=tuple(transitions),
        initial=index[spec.start_cell()],
        meta=meta,
    )


def build_adversary_game(spec: GridSpec) -> StochasticGame:
    """Robot (controller) and adversary (environment) moving in alternation.

    State ``(robot, adversary, turn)``; the robot moves first.  Each move
    lands as intended with probability 0.8 and to either side with 0.1.
    Co-located agents add the proposition ``a`` to the robot's cell label.
    """
    if spec.adversary is None:
        raise GridSpecError("adversary game needs an 'adversary:' start cell")
    if spec.adversary == spec.start_cell():
        raise GridSpecError("robot and adversary must start in different cells")
    ap = spec.ap if CAUGHT in spec.ap else spec.ap + (CAUGHT,)
    cells = spec.free_cells
    index = {cell: i for i, cell in enumerate(cells)}
    m = len(cells)

    def sid(r: Cell, a: Cell, turn: int) -> int:
        return (index[r] * m + index[a]) * 2 + turn

    owner, labels, actions, transitions, metas = [], [], [], [], []
    for r in cells:
        for a in cells:
            lab = spec.label(r) | ({CAUGHT} if r == a else frozenset())
            for turn in (0, 1):
                mover = r if turn == 0 else a
                dists = []
                for direction in DIRECTIONS:
                    out = _outcomes(spec, mover, direction, NOISY_MOVE)
                    succ = [
                        (sid(c, a, 1) if turn == 0 else sid(r, c, 0), float(p)) for c, p in out.items()
                    ]
                    dists.append(tuple(sorted(succ)))
                owner.append(CTRL if turn == 0 else ENV)
                labels.append(lab)
                actions.append(DIRECTIONS)
                transitions.append(tuple(dists))
                metas.append(
                    {"robot": list(r), "adversary": list(a), "turn": "robot" if turn == 0 else "adversary"}
                )
    meta = {
        "kind": "adversary-grid",
        "grid": spec.layout(),
        "position_key": "robot",
        "turn_order": "robot first",
        "states": metas,
    }
    return StochasticGame(
        ap=ap,
        owner=tuple(owner),
        labels=tuple(labels),
        actions=tuple(actions),
        transitions=tuple(transitions),
        initial=sid(spec.start_cell(), spec.adversary, 0),
        meta=meta,
    )
