import math
import random
from pathlib import Path

import numpy as np
import pytest
from scipy.constants import Boltzmann, hbar

from qcapim.engine import adjacent_kink_energy
from qcapim.layout import NORMAL, Fixed, Input, LayoutError, Output, QcaLayout, build_layout, read_layout
from qcapim.metrics import (
    GAMMA_RATIOS,
    MEV,
    UnverifiedLayout,
    circuit_states,
    dissipation_report,
    event_dissipation,
    format_reports,
    layout_metrics,
    steady_state_coherence,
)
from qcapim.synth import SYNTH_GEOMETRY, synthesize_xor_layout, wire_layout

from support import DESK, GOLDEN_FLIP_DISSIPATION_J, GOLDEN_KINK_INLINE_24NM

DATA = Path(__file__).parent / "data"
EK = GOLDEN_KINK_INLINE_24NM


# --------------------------------------------------------------------------
# Spatial metrics


def test_single_cell_metrics():
    m = layout_metrics(build_layout([(0, 0, 0, Input("A"))]))
    assert (m.cell_count, m.clock_zone_regions) == (1, 1)
    assert m.area_um2 == pytest.approx(0.000324, rel=1e-12)


def test_reference_file_metrics():
    m = layout_metrics(read_layout(DATA / "xor184.layout"))
    assert m.cell_count == 184
    assert m.area_um2 == pytest.approx(0.072364, rel=1e-9)


def test_primitive_has_two_regions(primitive_layout):
    assert layout_metrics(primitive_layout).clock_zone_regions == 2


def test_distant_same_zone_cells_are_separate_regions():
    layout = build_layout([(0, 0, 0, Input("A")), (200, 0, 0, Output("out"))])
    assert layout_metrics(layout).clock_zone_regions == 2
    assert layout_metrics(layout, radius_nm=250).clock_zone_regions == 1


def test_metrics_text_block():
    # (18 + 4 * 24) x 18 nm^2 at the synthesis pitch
    text = layout_metrics(wire_layout(5)).format()
    assert text.splitlines() == ["cell_count=5", "area_um2=0.002052", "clock_zone_regions=1"]


def test_empty_layout_has_no_metrics():
    with pytest.raises(LayoutError):
        layout_metrics(QcaLayout(()))


# --------------------------------------------------------------------------
# Coherence vector


@pytest.mark.parametrize("gamma, field", [(EK, 0.0), (EK / 2, EK), (1e-23, -3 * EK), (2e-22, 5e-24)])
@pytest.mark.parametrize("temp", [0.5, 1.0, 300.0])
def test_coherence_norm_is_thermal_factor(gamma, field, temp):
    lam = steady_state_coherence(gamma, field, temp)
    norm = math.hypot(2 * gamma, field) / hbar
    assert np.linalg.norm(lam) == pytest.approx(math.tanh(hbar * norm / (2 * Boltzmann * temp)), rel=1e-12)
    assert lam[1] == 0.0


def test_coherence_vanishes_at_high_temperature():
    assert np.linalg.norm(steady_state_coherence(EK, EK, 1e9)) < 1e-6


def test_zero_field_points_along_tunnelling():
    lam = steady_state_coherence(EK, 0.0, 1.0)
    assert lam[0] == pytest.approx(-1.0) and lam[2] == 0.0


def test_coherence_rejects_bad_input():
    with pytest.raises(ValueError):
        steady_state_coherence(EK, EK, 0.0)
    with pytest.raises(ValueError):
        steady_state_coherence(0.0, 0.0, 1.0)


def test_equilibrium_dissipates_nothing():
    lam = steady_state_coherence(EK, EK, 1.0)
    assert event_dissipation(lam, EK, EK, 1.0) == pytest.approx(0.0, abs=1e-30)


def test_field_flip_matches_golden():
    before = (-1 / math.sqrt(2), 0.0, 1 / math.sqrt(2))
    assert event_dissipation(before, EK / 2, -EK, 1.0) == pytest.approx(GOLDEN_FLIP_DISSIPATION_J, rel=1e-12)


def test_dissipation_is_never_negative():
    # a cell already more aligned than the thermal state cannot release negative energy
    lam = steady_state_coherence(EK, EK, 300.0)
    assert event_dissipation(lam / np.linalg.norm(lam), EK, EK, 300.0) == 0.0


def test_overlong_state_rejected():
    with pytest.raises(ValueError):
        event_dissipation((1.0, 0.0, 1.0), EK, EK, 1.0)


# --------------------------------------------------------------------------
# Reports


@pytest.fixture(scope="module")
def xor_reports(xor_layout):
    states = circuit_states(xor_layout, DESK)
    return [dissipation_report(xor_layout, DESK, r, states) for r in GAMMA_RATIOS]


def test_report_invariants(xor_reports):
    ek = adjacent_kink_energy(SYNTH_GEOMETRY, DESK.relative_permittivity) / MEV
    for r in xor_reports:
        assert r.kink_energy_meV == pytest.approx(ek, rel=1e-12)
        assert 0 <= r.min_circuit_meV <= r.avg_circuit_meV <= r.max_circuit_meV
        assert 0 < r.max_cell_meV <= r.max_circuit_meV
        assert 0 <= r.argmax_circuit < 16 and 0 <= r.argmin_circuit < 16
        assert r.avg_leakage_meV + r.avg_switching_meV == pytest.approx(r.avg_circuit_meV, rel=1e-9)


def test_leakage_rises_and_switching_falls_with_tunnelling_energy(xor_reports):
    leak = [r.avg_leakage_meV for r in xor_reports]
    switch = [r.avg_switching_meV for r in xor_reports]
    assert leak == sorted(leak) and leak[0] < leak[-1]
    assert switch == sorted(switch, reverse=True) and switch[0] > switch[-1]


def test_held_input_is_the_cheapest_transition(xor_reports):
    # u -> u moves no field, so only the clock events remain
    for r in xor_reports:
        u, v = divmod(r.argmin_circuit, 4)
        assert u == v


def test_report_table_layout(xor_reports):
    text = format_reports(xor_reports, 2)
    lines = text.splitlines()
    assert lines[0].split() == ["Parameter", "gamma/Ek=0.5", "gamma/Ek=1", "gamma/Ek=1.5"]
    assert len([ln for ln in lines if ln.startswith("avg_switching_meV[")]) == 3
    row = next(ln for ln in lines if ln.startswith("Max Energy dissipation vector "))
    assert all(len(tok) == 2 for tok in row.split()[-3:])


def test_report_is_invariant_under_cell_order(xor_layout, xor_reports):
    cells = list(xor_layout.cells)
    random.Random(7).shuffle(cells)
    shuffled = build_layout([(c.x, c.y, c.zone, c.role) for c in cells], xor_layout.geometry,
                            xor_layout.name, xor_layout.oracles)
    again = dissipation_report(shuffled, DESK, 1.0)
    ref = xor_reports[1]
    for key in ("max_circuit_meV", "avg_circuit_meV", "min_circuit_meV", "max_cell_meV",
                "avg_leakage_meV", "avg_switching_meV"):
        assert getattr(again, key) == pytest.approx(getattr(ref, key), rel=1e-6)
    assert (again.argmax_circuit, again.argmin_circuit) == (ref.argmax_circuit, ref.argmin_circuit)


def test_no_inputs_means_no_switching():
    layout = build_layout(
        [(0, 0, 0, Fixed(1.0))] + [(24.0 * k, 0, 0, NORMAL) for k in range(1, 4)] + [(96.0, 0, 0, Output("out"))],
        SYNTH_GEOMETRY, oracles=[("out", "1")],
    )
    report = dissipation_report(layout, DESK, 1.0)
    assert report.avg_switching_meV is None
    assert report.avg_leakage_meV == pytest.approx(report.avg_circuit_meV)
    assert "absent" in format_reports([report], 0)


def test_unverified_layout_is_refused():
    bad = build_layout([(0, 0, 0, Input("A")), (20, 0, 0, Output("out"))], oracles=[("out", "!A")])
    with pytest.raises(UnverifiedLayout) as info:
        dissipation_report(bad, DESK, 1.0)
    assert info.value.report is not None and not info.value.report.passed


def test_layout_without_oracle_is_refused():
    with pytest.raises(UnverifiedLayout):
        circuit_states(build_layout([(0, 0, 0, Input("A")), (20, 0, 0, Output("out"))]), DESK)


def test_ratio_must_be_positive(xor_layout):
    with pytest.raises(ValueError):
        dissipation_report(xor_layout, DESK, 0.0)


def test_shipped_xor_is_deterministic(xor_reports):
    again = circuit_states(synthesize_xor_layout(), DESK)
    ref = dissipation_report(synthesize_xor_layout(), DESK, 0.5, again)
    assert ref == xor_reports[0]
