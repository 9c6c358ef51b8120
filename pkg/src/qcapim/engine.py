"""Bistable-approximation QCA simulation engine.

Each cell carries a polarization ``P`` in ``[-1, 1]``. Neighbouring cells
couple through the kink energy ``E_k`` (energy cost of opposite polarization)
and a clock-controlled tunnelling energy ``gamma`` per zone. Every sample the
non-driver cells are relaxed with multicolour Gauss-Seidel sweeps of

    f_i  = sum_j E_k[i, j] * P_j / (2 * gamma[zone(i)])
    P_i' = f_i / sqrt(1 + f_i**2)

until the largest change drops below the convergence tolerance.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.constants import elementary_charge, epsilon_0

from .layout import Fixed, Geometry, Input, LayoutError, QcaCell, QcaLayout, SimParams

#: dot corner signs, ordered top-right, top-left, bottom-left, bottom-right
_DOT_SIGNS = np.array([(1, 1), (-1, 1), (-1, -1), (1, -1)], dtype=float)
#: net dot charge (units of e) of a P = +1 cell; P = -1 flips every sign
_QUADRUPOLE = np.array([-0.5, 0.5, -0.5, 0.5])


def dot_positions(x: float, y: float, geometry: Geometry) -> np.ndarray:
    """Centres of the four dots of a cell, in metres, shape ``(4, 2)``."""
    offset = geometry.dot_offset_nm
    return (np.array([x, y]) + offset * _DOT_SIGNS) * 1e-9


def kink_energy(cell_i: QcaCell, cell_j: QcaCell, geometry: Geometry, epsilon_r: float) -> float:
    """Kink energy in joules between two cells: U(opposite) - U(same).

    Positive for cells side by side along an axis, negative for diagonal
    neighbours (the coupling that makes inverters work).
    """
    if math.isclose(cell_i.x, cell_j.x, abs_tol=1e-12) and math.isclose(cell_i.y, cell_j.y, abs_tol=1e-12):
        raise LayoutError(f"cells {cell_i.id} and {cell_j.id} are coincident")
    ri = dot_positions(cell_i.x, cell_i.y, geometry)
    rj = dot_positions(cell_j.x, cell_j.y, geometry)
    dist = np.linalg.norm(ri[:, None, :] - rj[None, :, :], axis=-1)
    qq = np.outer(_QUADRUPOLE, _QUADRUPOLE) * elementary_charge**2
    same = float(np.sum(qq / dist)) / (4 * math.pi * epsilon_0 * epsilon_r)
    # U(+1, -1) = -U(+1, +1) because every charge of the second cell flips
    return -2.0 * same


def adjacent_kink_energy(geometry: Geometry, epsilon_r: float) -> float:
    """Kink energy of two in-line cells one grid pitch apart."""
    a = QcaCell(0, 0.0, 0.0, 0)
    b = QcaCell(1, geometry.grid_pitch_nm, 0.0, 0)
    return kink_energy(a, b, geometry, epsilon_r)


@dataclass(frozen=True)
class CouplingTable:
    """Per-cell neighbour lists ``[(neighbour id, E_k in J), ...]``, ascending id."""

    neighbors: tuple[tuple[tuple[int, float], ...], ...]

    def __len__(self) -> int:
        return len(self.neighbors)

    def matrix(self) -> np.ndarray:
        n = len(self.neighbors)
        k = np.zeros((n, n))
        for i, row in enumerate(self.neighbors):
            for j, e in row:
                k[i, j] = e
        return k

    def padded(self) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour index and energy arrays padded to the maximum degree.

        Padding entries point at cell 0 with zero energy so they add nothing.
        """
        n = len(self.neighbors)
        width = max((len(r) for r in self.neighbors), default=0)
        idx = np.zeros((n, width), dtype=np.intp)
        energy = np.zeros((n, width))
        for i, row in enumerate(self.neighbors):
            for k, (j, e) in enumerate(row):
                idx[i, k] = j
                energy[i, k] = e
        return idx, energy


def precompute_couplings(layout: QcaLayout, params: SimParams) -> CouplingTable:
    cells = layout.cells
    radius = params.radius_of_effect_nm
    rows: list[list[tuple[int, float]]] = [[] for _ in cells]
    for a in range(len(cells)):
        for b in range(a + 1, len(cells)):
            ca, cb = cells[a], cells[b]
            if math.hypot(ca.x - cb.x, ca.y - cb.y) <= radius:
                e = kink_energy(ca, cb, layout.geometry, params.relative_permittivity)
                rows[a].append((b, e))
                rows[b].append((a, e))
    return CouplingTable(tuple(tuple(sorted(r)) for r in rows))


# --------------------------------------------------------------------------
# Clocking and inputs


def clock_value(zone: int, sample, params: SimParams, period_samples: int):
    """Tunnelling energy in joules of ``zone`` at ``sample`` (scalar or array).

    Zone ``k`` lags zone 0 by a quarter period, so
    ``clock_value(k, s) == clock_value(0, s - k * period / 4)``.
    """
    if period_samples < 4:
        raise ValueError("period_samples must be at least 4")
    high, low = params.clock_high_J, params.clock_low_J
    mid, span = (high + low) / 2, (high - low) / 2
    phase = 2 * np.pi * (np.asarray(sample) % period_samples) / period_samples - zone * np.pi / 2
    gamma = mid + params.clock_amplitude_factor * span * np.cos(phase) + params.clock_shift
    out = np.clip(gamma, low, high)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class InputSchedule:
    """Piecewise-constant input drive visiting every input combination.

    The run is split into ``2**n`` equal windows; window ``w`` applies
    combination ``order[w]``, whose bits are read most-significant first in
    label order. With the default binary-counting order label 0 toggles
    slowest. The schedule repeats with period ``num_samples``.
    """

    labels: tuple[str, ...]
    num_samples: int
    order: tuple[int, ...] = ()

    def __post_init__(self):
        n = len(self.labels)
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.order:
            object.__setattr__(self, "order", tuple(range(2**n)))
        if sorted(self.order) != list(range(2**n)):
            raise ValueError("order must be a permutation of all input combinations")

    @property
    def n_inputs(self) -> int:
        return len(self.labels)

    @property
    def window(self) -> int:
        """Samples each combination is held for."""
        return self.num_samples // 2**self.n_inputs

    @property
    def period_samples(self) -> int:
        """Clock period: one full four-phase cycle per input window."""
        return self.window

    def combination_at(self, sample: int) -> int:
        return self.order[(sample % self.num_samples) // self.window]

    def bits(self, combination: int) -> tuple[int, ...]:
        n = self.n_inputs
        return tuple((combination >> (n - 1 - j)) & 1 for j in range(n))

    def value(self, label: str, sample: int) -> float:
        j = self.labels.index(label)
        return 1.0 if self.bits(self.combination_at(sample))[j] else -1.0

    def polarizations(self, sample: int) -> np.ndarray:
        return np.array([1.0 if b else -1.0 for b in self.bits(self.combination_at(sample))])

    def window_start(self, combination: int) -> int:
        return self.order.index(combination) * self.window


def exhaustive_input_schedule(labels: Sequence[str], num_samples: int, order: Sequence[int] = ()) -> InputSchedule:
    n = len(labels)
    if n > 16:
        raise ValueError("at most 16 inputs are supported")
    if len(set(labels)) != n:
        raise ValueError("input labels must be unique")
    quantum = 2**n * 4
    if num_samples < quantum or num_samples % quantum:
        raise ValueError(f"num_samples={num_samples} is not a positive multiple of 2**{n} * 4 = {quantum}")
    return InputSchedule(tuple(labels), num_samples, tuple(order))


# --------------------------------------------------------------------------
# Relaxation


def worker_count() -> int:
    env = os.environ.get("QCAPIM_THREADS")
    if env:
        return max(1, int(env))
    return 1


def color_classes(couplings: CouplingTable, relaxed: np.ndarray) -> list[np.ndarray]:
    """Greedy colouring (ascending cell id) of the relaxed cells so that no two
    coupled cells share a colour."""
    is_relaxed = np.zeros(len(couplings), dtype=bool)
    is_relaxed[relaxed] = True
    color = {}
    for i in relaxed:
        taken = {color[j] for j, _ in couplings.neighbors[i] if is_relaxed[j] and j in color}
        c = 0
        while c in taken:
            c += 1
        color[i] = c
    ncolors = max(color.values(), default=-1) + 1
    return [np.array([i for i in relaxed if color[i] == c], dtype=np.intp) for c in range(ncolors)]


class _Sweeper:
    """Multicolour Gauss-Seidel sweep over the relaxed cells.

    Cells of one colour are mutually uncoupled, so they update simultaneously
    from the current state; colours are visited in a fixed order. Row chunks
    of a colour may run on worker threads. Every row is a CSR dot product over
    its neighbours in ascending id order, so results do not depend on the
    number of workers.
    """

    def __init__(self, couplings: CouplingTable, relaxed: np.ndarray, workers: int = 1):
        self.relaxed = relaxed
        self.workers = max(1, workers)
        kmat = sparse.csr_matrix(couplings.matrix()) if len(couplings) else sparse.csr_matrix((0, 0))
        kmat.sort_indices()
        self.groups = []
        for ids in color_classes(couplings, relaxed):
            rows = kmat[ids]
            bounds = np.linspace(0, len(ids), min(self.workers, len(ids)) + 1).astype(int)
            chunks = [rows[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            self.groups.append((ids, chunks))
        self.pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def sweep(self, state: np.ndarray, gamma: np.ndarray) -> float:
        """One in-place sweep; ``gamma`` is indexed by cell id. Returns max |dP|."""
        delta = 0.0
        for ids, chunks in self.groups:
            if self.pool is None or len(chunks) == 1:
                field = chunks[0] @ state
            else:
                field = np.concatenate(list(self.pool.map(lambda m: m @ state, chunks)))
            f = field / (2 * gamma[ids])
            new = f / np.sqrt(1 + f * f)
            delta = max(delta, float(np.max(np.abs(new - state[ids]))))
            state[ids] = new
        return delta


def _relax(sweeper: _Sweeper, state: np.ndarray, gamma: np.ndarray, tolerance: float, max_iter: int):
    if len(sweeper.relaxed) == 0:
        return state, 1, True
    state = state.copy()
    for it in range(1, max_iter + 1):
        if sweeper.sweep(state, gamma) < tolerance:
            return state, it, True
    return state, max_iter, False


def relaxed_mask(layout: QcaLayout) -> np.ndarray:
    return np.array([not c.is_driver for c in layout.cells], dtype=bool)


def relax(
    layout: QcaLayout,
    couplings: CouplingTable,
    gamma_per_zone: Sequence[float],
    drive: dict[int, float],
    tolerance: float,
    max_iter: int,
    initial: np.ndarray | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, int, bool]:
    """Relax one sample to its bistable fixed point.

    ``drive`` maps every Input/Fixed cell id to its clamped polarization.
    Returns ``(polarizations, iterations used, converged)``; hitting
    ``max_iter`` is reported, not raised.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    n = len(layout.cells)
    state = np.zeros(n) if initial is None else np.array(initial, dtype=float)
    for c in layout.cells:
        if c.is_driver:
            if c.id not in drive:
                raise ValueError(f"driver cell {c.id} has no assigned polarization")
            state[c.id] = drive[c.id]
    mask = relaxed_mask(layout)
    relaxed = np.flatnonzero(mask)
    zones = np.array([c.zone for c in layout.cells], dtype=int)
    gamma = np.asarray(gamma_per_zone, dtype=float)[zones]
    sweeper = _Sweeper(couplings, relaxed, workers)
    try:
        return _relax(sweeper, state, gamma, tolerance, max_iter)
    finally:
        sweeper.close()


# --------------------------------------------------------------------------
# Simulation


@dataclass
class TraceSet:
    """Recorded polarizations (``samples x cells``), clocks (``samples x 4``)
    and per-sample solver statistics."""

    polarization: np.ndarray
    clock: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    period_samples: int
    labels: dict[str, int] = field(default_factory=dict)

    @property
    def samples(self) -> int:
        return self.polarization.shape[0]

    def series(self, label: str) -> np.ndarray:
        return self.polarization[:, self.labels[label]]

    def summary(self) -> str:
        nonconv = int(np.sum(~self.converged))
        return (
            f"samples={self.samples} mean_iterations={float(np.mean(self.iterations)):.2f} "
            f"max_iterations={int(np.max(self.iterations))} nonconverged_samples={nonconv}"
        )

    def to_csv(self, every: int = 1) -> str:
        """CSV text: ``sample,clock0..clock3,<labelled cells>``; LF endings."""
        names = list(self.labels)
        cols = [self.labels[k] for k in names]
        lines = [",".join(["sample", "clock0", "clock1", "clock2", "clock3", *names])]
        for s in range(0, self.samples, max(1, every)):
            vals = [f"{v:.6g}" for v in self.clock[s]] + [f"{v:.6g}" for v in self.polarization[s, cols]]
            lines.append(",".join([str(s), *vals]))
        return "\n".join(lines) + "\n"


def simulate(
    layout: QcaLayout,
    params: SimParams,
    schedule: InputSchedule,
    total_samples: int | None = None,
    workers: int | None = None,
) -> TraceSet:
    """Run the clocked bistable simulation.

    ``total_samples`` may exceed the schedule length; the schedule then
    repeats, which lets pipelined outputs of the last window drain.
    """
    if sorted(schedule.labels) != sorted(layout.input_labels):
        raise ValueError(
            f"schedule labels {sorted(schedule.labels)} do not match layout inputs {sorted(layout.input_labels)}"
        )
    workers = worker_count() if workers is None else workers
    total = schedule.num_samples if total_samples is None else total_samples
    period = schedule.period_samples
    n = len(layout.cells)

    couplings = precompute_couplings(layout, params)
    mask = relaxed_mask(layout)
    relaxed = np.flatnonzero(mask)
    zones = np.array([c.zone for c in layout.cells], dtype=int)
    fixed_ids = [c.id for c in layout.cells if isinstance(c.role, Fixed)]
    fixed_vals = [c.role.polarization for c in layout.cells if isinstance(c.role, Fixed)]
    input_ids = [layout.cell_by_label(lbl).id for lbl in schedule.labels]

    samples = np.arange(total)
    clock = np.stack([clock_value(k, samples, params, period) for k in range(4)], axis=1)
    pol = np.zeros((total, n))
    iters = np.zeros(total, dtype=int)
    conv = np.zeros(total, dtype=bool)

    state = np.zeros(n)
    state[fixed_ids] = fixed_vals
    sweeper = _Sweeper(couplings, relaxed, workers)
    try:
        for s in range(total):
            if input_ids:
                state[input_ids] = schedule.polarizations(s)
            gamma = clock[s][zones]
            state, iters[s], conv[s] = _relax(
                sweeper, state, gamma, params.convergence_tolerance, params.max_iterations_per_sample
            )
            pol[s] = state
    finally:
        sweeper.close()

    if np.any(np.abs(pol) > 1.0):
        raise AssertionError("polarization left [-1, 1]")
    # inputs in schedule order, then outputs in cell order
    labels = {label: layout.cell_by_label(label).id for label in schedule.labels}
    labels.update({c.label: c.id for c in layout.outputs})
    return TraceSet(pol, clock, iters, conv, period, labels)
