"""Spatial metrics and the energy-dissipation model.

Dissipation follows the coherence-vector bound used by QCA power tools. A
cell in the two-state picture has Hamiltonian vector
``Gamma = (-2 gamma, 0, F) / hbar`` where ``F = sum_j E_k[i, j] P_j`` is the
neighbour field. Whenever its clock changes the cell relaxes from its old
state to the thermal steady state under the new Hamiltonian, and the energy
released in that step is bounded by ``hbar / 2 * Gamma . (lambda_ss - lambda)``.

Clock changes are quantized: per input transition ``u -> v`` every relaxed
cell is released once (tunnelling energy up, neighbours still showing ``u``)
and switched once (tunnelling energy down, neighbours showing ``v``). The
leakage share of a transition is what the same two events cost when the
neighbours keep showing ``u``; the switching share is the remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import Boltzmann, elementary_charge, hbar

from .engine import (
    TraceSet,
    adjacent_kink_energy,
    exhaustive_input_schedule,
    precompute_couplings,
    relaxed_mask,
    simulate,
)
from .layout import LayoutError, QcaLayout, SimParams, bounding_area
from .verification import (
    DEFAULT_MARGIN,
    VerifyReport,
    cell_depths,
    decision_sample,
    extract_truth_table,
    required_samples,
    schedule_labels,
    verify,
    zone_regions,
)

MEV = elementary_charge * 1e-3  # joules per meV
GAMMA_RATIOS = (0.5, 1.0, 1.5)


# --------------------------------------------------------------------------
# Spatial metrics


@dataclass(frozen=True)
class LayoutMetrics:
    cell_count: int
    area_um2: float
    clock_zone_regions: int

    def format(self) -> str:
        return (
            f"cell_count={self.cell_count}\n"
            f"area_um2={self.area_um2:.6f}\n"
            f"clock_zone_regions={self.clock_zone_regions}\n"
        )


def layout_metrics(layout: QcaLayout, radius_nm: float | None = None) -> LayoutMetrics:
    """Cell count, bounding-box area and the number of clock-zone regions.

    Regions are connected along the coupling graph, whose reach defaults to
    the standard 80 nm radius of effect.
    """
    if not layout.cells:
        raise LayoutError("metrics of an empty layout")
    radius = SimParams().radius_of_effect_nm if radius_nm is None else radius_nm
    regions = zone_regions(layout, radius)
    return LayoutMetrics(len(layout.cells), bounding_area(layout), len(set(regions.tolist())))


# --------------------------------------------------------------------------
# Coherence-vector model


def steady_state_coherence(gamma: float, field_z: float, temperature: float) -> np.ndarray:
    """Thermal steady-state coherence vector for tunnelling energy ``gamma``
    and neighbour field ``field_z`` (both in joules)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    g = np.array([-2.0 * gamma, 0.0, field_z]) / hbar
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        raise ValueError("zero Hamiltonian: gamma and field_z are both zero")
    return g / norm * math.tanh(hbar * norm / (2.0 * Boltzmann * temperature))


def event_dissipation(state_before, gamma_after: float, field_after: float, temperature: float) -> float:
    """Energy in joules released when a cell in ``state_before`` relaxes under
    the new Hamiltonian; never negative."""
    before = np.asarray(state_before, dtype=float)
    if float(np.linalg.norm(before)) > 1.0 + 1e-12:
        raise ValueError("coherence vector longer than 1")
    g = np.array([-2.0 * gamma_after, 0.0, field_after]) / hbar
    after = steady_state_coherence(gamma_after, field_after, temperature)
    return max(0.0, float(hbar / 2.0 * np.dot(g, after - before)))


def _ss_batch(gamma: float, fields: np.ndarray, temperature: float) -> np.ndarray:
    """:func:`steady_state_coherence` over an array of fields; returns ``(..., 3)``."""
    g = np.stack([np.full_like(fields, -2.0 * gamma), np.zeros_like(fields), fields], axis=-1) / hbar
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    return g / norm * np.tanh(hbar * norm / (2.0 * Boltzmann * temperature))


def _event_batch(before: np.ndarray, gamma: float, fields: np.ndarray, temperature: float) -> np.ndarray:
    g = np.stack([np.full_like(fields, -2.0 * gamma), np.zeros_like(fields), fields], axis=-1) / hbar
    after = _ss_batch(gamma, fields, temperature)
    return np.maximum(0.0, hbar / 2.0 * np.sum(g * (after - before), axis=-1))


# --------------------------------------------------------------------------
# Reports


class UnverifiedLayout(RuntimeError):
    """Dissipation was requested for a layout that fails its own oracle."""

    def __init__(self, report: VerifyReport | None, reason: str = ""):
        self.report = report
        super().__init__(reason or (report.format() if report else "layout is not verified"))


@dataclass(frozen=True)
class DissipationReport:
    gamma_ratio: float
    kink_energy_meV: float
    max_circuit_meV: float
    argmax_circuit: int
    avg_circuit_meV: float
    min_circuit_meV: float
    argmin_circuit: int
    max_cell_meV: float
    argmax_cell: int
    avg_leakage_meV: float
    avg_switching_meV: float | None


@dataclass(frozen=True)
class CircuitStates:
    """Per-cell steady polarization for every input vector (``vectors x cells``)."""

    polarization: np.ndarray
    verification: VerifyReport


def circuit_states(layout: QcaLayout, params: SimParams, margin: float = DEFAULT_MARGIN,
                   workers: int | None = None) -> CircuitStates:
    """Simulate every input vector once (``params.num_samples`` samples plus
    pipeline drain), check the layout against its oracles and record each
    cell's polarization at its own hold centre.

    Released cells forget their state in the shipped designs, so a cell's
    settled value depends only on the current vector, not on its predecessor.
    """
    if not layout.oracles:
        raise UnverifiedLayout(None, "layout declares no oracle to verify against")
    labels = schedule_labels(layout)
    schedule = exhaustive_input_schedule(labels, params.num_samples)
    traces: TraceSet = simulate(layout, params, schedule, required_samples(layout, schedule), workers)
    try:
        table = extract_truth_table(traces, layout, schedule, margin=margin)
    except (RuntimeError, ValueError) as exc:
        raise UnverifiedLayout(None, f"verification failed: {exc}") from exc
    report = verify(table, dict(layout.oracles))
    if not report.passed:
        raise UnverifiedLayout(report)

    depths = cell_depths(layout)
    depths = np.where(depths < 0, 0, depths)
    states = np.zeros((2 ** len(labels), len(layout.cells)))
    for comb in range(2 ** len(labels)):
        idx = [decision_sample(schedule, comb, int(d)) for d in depths]
        idx = np.minimum(idx, traces.samples - 1)
        states[comb] = traces.polarization[idx, np.arange(len(layout.cells))]
    return CircuitStates(states, report)


def dissipation_report(layout: QcaLayout, params: SimParams, gamma_ratio: float,
                       states: CircuitStates | None = None) -> DissipationReport:
    """Dissipation summary for one tunnelling-energy ratio.

    ``gamma_ratio`` scales the adjacent-cell kink energy to give the raised
    tunnelling energy; the lowered one is the configured clock low. Every
    ordered pair of input vectors is one transition, indexed ``u * 2**n + v``.
    """
    if gamma_ratio <= 0:
        raise ValueError("gamma_ratio must be positive")
    states = states or circuit_states(layout, params)
    ek = adjacent_kink_energy(layout.geometry, params.relative_permittivity)
    g_hi, g_lo, temp = gamma_ratio * ek, params.clock_low_J, params.temperature_K

    matrix = precompute_couplings(layout, params).matrix()
    relaxed = relaxed_mask(layout)
    fields = states.polarization @ matrix.T  # vectors x cells
    fields = fields[:, relaxed]
    m = fields.shape[0]

    held = _ss_batch(g_lo, fields, temp)  # settled, clock low
    released = _ss_batch(g_hi, fields, temp)  # settled, clock high
    release = _event_batch(held, g_hi, fields, temp)  # vectors x cells
    stay = _event_batch(released, g_lo, fields, temp)

    total = np.zeros((m, m, fields.shape[1]))
    for u in range(m):
        total[u] = release[u] + _event_batch(released[u][None, :, :], g_lo, fields, temp)
    leak = release[:, None, :] + stay[:, None, :]  # same events, inputs held
    per_circuit = total.sum(axis=2).ravel() / MEV
    leak_circuit = np.broadcast_to(leak.sum(axis=2), (m, m)).ravel() / MEV
    per_cell = total.reshape(m * m, -1) / MEV

    changed = ~np.eye(m, dtype=bool).ravel()
    switching = float(np.mean(per_circuit - leak_circuit)) if changed.any() else None
    return DissipationReport(
        gamma_ratio=gamma_ratio,
        kink_energy_meV=ek / MEV,
        max_circuit_meV=float(per_circuit.max()),
        argmax_circuit=int(per_circuit.argmax()),
        avg_circuit_meV=float(per_circuit.mean()),
        min_circuit_meV=float(per_circuit.min()),
        argmin_circuit=int(per_circuit.argmin()),
        max_cell_meV=float(per_cell.max()),
        argmax_cell=int(np.unravel_index(per_cell.argmax(), per_cell.shape)[0]),
        avg_leakage_meV=float(leak_circuit.mean()),
        avg_switching_meV=switching,
    )


_ROWS = (
    ("Max Kink Energy(meV)", "kink_energy_meV"),
    ("Max Energy dissipation of circuit(meV)", "max_circuit_meV"),
    ("Max Energy dissipation vector", "argmax_circuit"),
    ("Average Energy dissipation of circuit(meV)", "avg_circuit_meV"),
    ("Max Energy dissipation among all cells(meV)", "max_cell_meV"),
    ("Max Energy dissipation vector (cell)", "argmax_cell"),
    ("Min Energy dissipation of circuit(meV)", "min_circuit_meV"),
    ("Min Energy dissipation vector", "argmin_circuit"),
    ("Average Leakage Energy dissipation(meV)", "avg_leakage_meV"),
    ("Average Switching Energy Dissipation(meV)", "avg_switching_meV"),
)


def _cell_text(value, width: int) -> str:
    if value is None:
        return "absent"
    if isinstance(value, int):
        return f"{value:0{width}d}"
    return f"{value:.5f}"


def format_reports(reports: list[DissipationReport], n_inputs: int) -> str:
    """Aligned text table, one column per ratio, then a ``key=value`` block.

    Vector indices are zero-based transition indices ``u * 2**n + v`` padded
    to the width of the largest index.
    """
    width = len(str(4**n_inputs - 1))
    head = ["Parameter"] + [f"gamma/Ek={r.gamma_ratio:g}" for r in reports]
    body = [[name] + [_cell_text(getattr(r, key), width) for r in reports] for name, key in _ROWS]
    cols = list(zip(head, *body))
    widths = [max(len(s) for s in col) for col in cols]
    lines = ["  ".join(s.ljust(w) for s, w in zip(head, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(s.ljust(w) for s, w in zip(row, widths)).rstrip() for row in body]
    lines.append("")
    lines.append("# column parameter: tunnelling energy as a multiple of the adjacent-cell kink energy")
    lines.append("# vector index: zero-based transition index u*2^n+v over ordered input-vector pairs")
    for r in reports:
        tag = f"{r.gamma_ratio:g}"
        for _, key in _ROWS:
            lines.append(f"{key}[{tag}]={_cell_text(getattr(r, key), width)}")
    return "\n".join(lines) + "\n"
