"""Turn simulated waveforms into truth tables and check them against oracles.

Outputs are read at fixed decision samples instead of by inspecting the
waveforms. With the pads in clock zone 0, a value applied in window ``w``
reaches a cell ``t`` zone transitions downstream while that cell holds at

    window_start(w) + period / 2 + t * period / 4

which is the centre of the cell's hold plateau. ``t`` comes from the layout's
clock-zone structure (:func:`output_depths`), so reading is deterministic.
"""

from __future__ import annotations

import graphlib
import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .engine import InputSchedule, TraceSet
from .layout import LayoutError, QcaLayout

DEFAULT_MARGIN = 0.5


class OracleError(ValueError):
    """Malformed Boolean expression."""

    def __init__(self, message: str, column: int | None = None):
        self.column = column
        if column is not None:
            message = f"column {column}: {message}"
        super().__init__(message)


class IndeterminateOutput(RuntimeError):
    """An output polarization too close to zero to call a bit."""

    def __init__(self, label: str, sample: int, polarization: float, margin: float):
        self.label = label
        self.sample = sample
        self.polarization = polarization
        super().__init__(
            f"indeterminate output {label!r} at sample {sample}: |P| = {abs(polarization):.4f} < {margin}"
        )


class IncompleteTraces(ValueError):
    """The traces end before a decision sample."""


# --------------------------------------------------------------------------
# Boolean oracles

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<const>[01])|(?P<op>[()!~¬&∧|∨^⊕]))")
_NOT, _AND, _OR, _XOR = "!~¬", "&∧", "|∨", "^⊕"


@dataclass(frozen=True)
class BoolExpr:
    """Parsed Boolean expression; ``node`` is a nested tuple tree."""

    text: str
    node: tuple

    @property
    def variables(self) -> list[str]:
        """Variable names in order of first appearance."""
        seen: dict[str, None] = {}

        def walk(n):
            if n[0] == "var":
                seen.setdefault(n[1])
            for child in n[1:]:
                if isinstance(child, tuple):
                    walk(child)

        walk(self.node)
        return list(seen)

    def evaluate(self, env: Mapping[str, int]) -> int:
        def ev(n) -> int:
            kind = n[0]
            if kind == "const":
                return n[1]
            if kind == "var":
                try:
                    return int(bool(env[n[1]]))
                except KeyError:
                    raise OracleError(f"no value for variable {n[1]!r}") from None
            if kind == "not":
                return 1 - ev(n[1])
            a, b = ev(n[1]), ev(n[2])
            return {"and": a & b, "or": a | b, "xor": a ^ b}[kind]

        return ev(self.node)

    def __str__(self) -> str:
        return self.text


def parse_expression(text: str) -> BoolExpr:
    """Parse ``text``. Operators, loosest first: ``| ∨``, ``^ ⊕``, ``& ∧``,
    prefix ``! ~ ¬``; ``0``/``1`` are constants."""
    tokens: list[tuple[int, str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise OracleError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        tokens.append((m.start(kind) + 1, kind, m.group(kind)))
        pos = m.end()
    if not tokens:
        raise OracleError("empty expression")
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else (len(text) + 1, "end", "")

    def binary(kind: str, symbols: str, sub):
        nonlocal i
        left = sub()
        while peek()[1] == "op" and peek()[2] in symbols:
            i += 1
            left = (kind, left, sub())
        return left

    def atom():
        nonlocal i
        col, kind, val = peek()
        if kind == "end":
            raise OracleError("expression ends early", col)
        i += 1
        if kind == "name":
            return ("var", val)
        if kind == "const":
            return ("const", int(val))
        if val in _NOT:
            return ("not", atom())
        if val == "(":
            inner = disj()
            if peek()[2] != ")":
                raise OracleError("missing ')'", peek()[0])
            i += 1
            return inner
        raise OracleError(f"unexpected {val!r}", col)

    def conj():
        return binary("and", _AND, atom)

    def exclusive():
        return binary("xor", _XOR, conj)

    def disj():
        return binary("or", _OR, exclusive)

    node = disj()
    if i != len(tokens):
        raise OracleError(f"unexpected {tokens[i][2]!r}", tokens[i][0])
    return BoolExpr(text, node)


def _as_expr(oracle) -> BoolExpr:
    return oracle if isinstance(oracle, BoolExpr) else parse_expression(str(oracle))


# --------------------------------------------------------------------------
# Clock-zone structure


def adjacency_radius(layout: QcaLayout) -> float:
    """Default neighbourhood for zone analysis: orthogonal and diagonal
    grid neighbours, which is where signals actually hand over."""
    return 1.5 * layout.geometry.grid_pitch_nm


def coupling_pairs(layout: QcaLayout, radius_nm: float) -> np.ndarray:
    """``(k, 2)`` array of cell index pairs whose centres are within ``radius_nm``."""
    if not layout.cells:
        return np.zeros((0, 2), dtype=int)
    pts = np.array([(c.x, c.y) for c in layout.cells])
    pairs = cKDTree(pts).query_pairs(radius_nm * (1 + 1e-9), output_type="ndarray")
    return pairs.reshape(-1, 2)


def zone_regions(layout: QcaLayout, radius_nm: float | None = None) -> np.ndarray:
    """Region index of every cell; a region is a maximal connected group of
    same-zone cells."""
    n = len(layout.cells)
    radius = adjacency_radius(layout) if radius_nm is None else radius_nm
    pairs = coupling_pairs(layout, radius)
    zones = np.array([c.zone for c in layout.cells], dtype=int)
    same = pairs[zones[pairs[:, 0]] == zones[pairs[:, 1]]] if len(pairs) else pairs
    graph = coo_matrix((np.ones(len(same)), (same[:, 0], same[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def cell_depths(layout: QcaLayout, radius_nm: float | None = None) -> np.ndarray:
    """Longest driver-to-cell count of forward zone transitions, per cell.

    Only ``k -> k+1 (mod 4)`` hand-overs between neighbouring regions count;
    information never moves against the clock. Cells no driver reaches get
    ``-1``. Raises :class:`LayoutError` when the forward region graph has a
    cycle.
    """
    if not any(c.is_driver for c in layout.cells):
        raise LayoutError("layout has no inputs or fixed cells")
    radius = adjacency_radius(layout) if radius_nm is None else radius_nm
    region = zone_regions(layout, radius)
    zones = [c.zone for c in layout.cells]
    preds: dict[int, set[int]] = {int(r): set() for r in region}
    for a, b in coupling_pairs(layout, radius):
        for u, v in ((a, b), (b, a)):
            if (zones[v] - zones[u]) % 4 == 1:
                preds[int(region[v])].add(int(region[u]))
    try:
        order = list(graphlib.TopologicalSorter(preds).static_order())
    except graphlib.CycleError as exc:
        raise LayoutError(f"clock zones form a cycle through regions {exc.args[1]}") from None

    sources = {int(region[c.id]) for c in layout.cells if c.is_driver}
    depth: dict[int, int] = {}
    for r in order:
        best = 0 if r in sources else -1
        for p in preds[r]:
            if depth[p] >= 0:
                best = max(best, depth[p] + 1)
        depth[r] = best
    return np.array([depth[int(r)] for r in region], dtype=int)


def output_depths(layout: QcaLayout, radius_nm: float | None = None) -> dict[str, int]:
    """:func:`cell_depths` of the outputs; unreachable outputs are an error."""
    if not layout.outputs:
        raise LayoutError("layout has no outputs")
    depths = cell_depths(layout, radius_nm)
    result = {}
    for out in layout.outputs:
        if depths[out.id] < 0:
            raise LayoutError(f"output {out.label!r} is not reachable from any driver")
        result[out.label] = int(depths[out.id])
    return result


def estimate_latency(layout: QcaLayout, radius_nm: float | None = None) -> int:
    """Pipeline latency in clock cycles: ``ceil(max transitions / 4)``."""
    return -(-max(output_depths(layout, radius_nm).values()) // 4)


def depth_for(zone: int, latency_cycles: int) -> int:
    """The transition count of an output in ``zone`` that rounds up to
    ``latency_cycles`` cycles (zone and cycle count pin it down uniquely)."""
    if latency_cycles < 0:
        raise ValueError("latency_cycles must be non-negative")
    if latency_cycles == 0:
        if zone % 4:
            raise ValueError(f"an output in zone {zone} cannot have zero latency")
        return 0
    return 4 * (latency_cycles - 1) + (zone - 1) % 4 + 1


def schedule_labels(layout: QcaLayout) -> list[str]:
    """Input labels in the order schedules drive them: sorted, so the first
    label in alphabetical order toggles slowest."""
    return sorted(layout.input_labels)


def decision_sample(schedule: InputSchedule, combination: int, depth: int) -> int:
    period = schedule.period_samples
    return schedule.window_start(combination) + period // 2 + depth * period // 4


# --------------------------------------------------------------------------
# Truth tables


@dataclass(frozen=True)
class TruthTable:
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    rows: dict[tuple[int, ...], tuple[int, ...]]
    margins: dict[tuple[int, ...], tuple[float, ...]] = field(default_factory=dict)
    samples: dict[tuple[int, ...], int] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.rows) != 2 ** len(self.inputs):
            raise ValueError(f"{len(self.rows)} rows for {len(self.inputs)} inputs")
        for key, out in self.rows.items():
            if len(key) != len(self.inputs) or len(out) != len(self.outputs):
                raise ValueError(f"row {key} -> {out} has the wrong arity")
            if any(b not in (0, 1) for b in (*key, *out)):
                raise ValueError(f"row {key} -> {out} holds a non-bit")

    @property
    def min_margin(self) -> float:
        return min((m for ms in self.margins.values() for m in ms), default=math.nan)

    def format(self) -> str:
        head = " ".join(self.inputs) + " | " + " ".join(self.outputs)
        lines = [head]
        for key in sorted(self.rows):
            lines.append(" ".join(map(str, key)) + " | " + " ".join(map(str, self.rows[key])))
        return "\n".join(lines) + "\n"


def extract_truth_table(
    traces: TraceSet,
    layout: QcaLayout,
    schedule: InputSchedule,
    latency_cycles: int | None = None,
    margin: float = DEFAULT_MARGIN,
) -> TruthTable:
    """Read every output at its decision sample for each input combination.

    With ``latency_cycles`` given, each output's transition count is the one
    consistent with its zone and that latency; otherwise it is taken from
    :func:`output_depths`.
    """
    if sorted(schedule.labels) != sorted(layout.input_labels):
        raise ValueError("schedule does not drive exactly the layout inputs")
    if latency_cycles is None:
        depths = output_depths(layout)
    else:
        depths = {o.label: depth_for(o.zone, latency_cycles) for o in layout.outputs}
    outs = tuple(layout.output_labels)
    rows, margins, samples = {}, {}, {}
    for comb in range(2**schedule.n_inputs):
        bits = schedule.bits(comb)
        row, row_margin = [], []
        for label in outs:
            s = decision_sample(schedule, comb, depths[label])
            if s >= traces.samples:
                raise IncompleteTraces(
                    f"traces end at sample {traces.samples - 1}, output {label!r} is decided at sample {s}"
                )
            p = float(traces.series(label)[s])
            if abs(p) < margin:
                raise IndeterminateOutput(label, s, p, margin)
            row.append(1 if p > 0 else 0)
            row_margin.append(abs(p))
            samples[bits] = s
        rows[bits] = tuple(row)
        margins[bits] = tuple(row_margin)
    return TruthTable(tuple(schedule.labels), outs, rows, margins, samples)


def required_samples(layout: QcaLayout, schedule: InputSchedule, latency_cycles: int | None = None) -> int:
    """Trace length needed so that the last decision sample exists."""
    if latency_cycles is None:
        depth = max(output_depths(layout).values())
    else:
        depth = max(depth_for(o.zone, latency_cycles) for o in layout.outputs)
    last = max(decision_sample(schedule, c, depth) for c in range(2**schedule.n_inputs))
    return max(schedule.num_samples, last + 1)


# --------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class Mismatch:
    inputs: tuple[int, ...]
    expected: tuple[int, ...]
    observed: tuple[int, ...]
    sample: int


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    mismatches: tuple[Mismatch, ...]
    latency_cycles: int
    min_margin: float
    table: TruthTable | None = None

    def format(self) -> str:
        lines = [f"{'PASS' if self.passed else 'FAIL'}: {len(self.mismatches)} mismatching rows"]
        for m in self.mismatches:
            lines.append(f"  inputs={''.join(map(str, m.inputs))} expected={''.join(map(str, m.expected))} "
                         f"observed={''.join(map(str, m.observed))} sample={m.sample}")
        lines += [
            f"pass={int(self.passed)}",
            f"mismatches={len(self.mismatches)}",
            f"latency_cycles={self.latency_cycles}",
            f"min_margin={self.min_margin:.6f}",
        ]
        return "\n".join(lines) + "\n"


def verify(table: TruthTable, oracle, latency_cycles: int = 0) -> VerifyReport:
    """Compare ``table`` row by row with ``oracle``.

    ``oracle`` is one expression (for a single-output table) or a mapping
    from output label to expression.
    """
    if isinstance(oracle, Mapping):
        exprs = {k: _as_expr(v) for k, v in oracle.items()}
        if set(exprs) != set(table.outputs):
            raise ValueError(f"oracle outputs {sorted(exprs)} do not match table outputs {sorted(table.outputs)}")
    else:
        if len(table.outputs) != 1:
            raise ValueError(f"one oracle for {len(table.outputs)} outputs")
        exprs = {table.outputs[0]: _as_expr(oracle)}
    for label, expr in exprs.items():
        extra = [v for v in expr.variables if v not in table.inputs]
        if extra:
            raise ValueError(f"oracle for {label!r} uses {extra}, which are not table inputs {list(table.inputs)}")

    mismatches = []
    for bits in sorted(table.rows):
        env = dict(zip(table.inputs, bits))
        expected = tuple(exprs[o].evaluate(env) for o in table.outputs)
        if expected != table.rows[bits]:
            mismatches.append(Mismatch(bits, expected, table.rows[bits], table.samples.get(bits, -1)))
    return VerifyReport(not mismatches, tuple(mismatches), latency_cycles, table.min_margin, table)


def enumerate_truth_table(oracle, inputs: Sequence[str]) -> dict[tuple[int, ...], int]:
    """Brute-force table of ``oracle`` over ``inputs``."""
    expr = _as_expr(oracle)
    return {bits: expr.evaluate(dict(zip(inputs, bits))) for bits in itertools.product((0, 1), repeat=len(inputs))}
