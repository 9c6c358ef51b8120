from pathlib import Path

import pytest

from qcapim.layout import (
    NORMAL,
    Fixed,
    Geometry,
    Input,
    LayoutError,
    Output,
    QcaCell,
    QcaLayout,
    SimParams,
    bounding_area,
    build_layout,
    parse_layout,
    read_layout,
    serialize,
    validate,
    write_layout,
)
from qcapim.synth import (
    inverter_layout,
    majority_layout,
    synthesize_primitive_layout,
    synthesize_xor_layout,
    wire_layout,
)

DATA = Path(__file__).parent / "data"


def test_minimal_file_gives_one_fixed_cell():
    layout = parse_layout("cell 0 0 zone=0 fixed=+1\n")
    assert len(layout.cells) == 1
    c = layout.cells[0]
    assert (c.x, c.y, c.zone, c.role) == (0.0, 0.0, 0, Fixed(1.0))
    assert layout.geometry == Geometry()


def test_coincident_cells_are_an_overlap_error():
    with pytest.raises(LayoutError, match="overlaps"):
        parse_layout("cell 0 0 zone=0 input=A\ncell 0 0 zone=0 normal\n")


def test_validate_clean_wire():
    assert validate(wire_layout(5, geometry=Geometry())) == []


def test_validate_reports_missing_driver():
    layout = build_layout([(0, 0, 0, NORMAL), (20, 0, 0, NORMAL)])
    assert any("no driver" in d for d in validate(layout))


def test_validate_reports_bad_zone():
    layout = QcaLayout((QcaCell(0, 0, 0, 4, Input("A")),))
    assert any("zone 4" in d for d in validate(layout))


def test_validate_reports_duplicate_labels_and_bad_fixed():
    layout = build_layout([(0, 0, 0, Input("A")), (40, 0, 0, Input("A")), (80, 0, 0, Fixed(0.5))])
    diags = validate(layout)
    assert any("duplicate label" in d for d in diags)
    assert any("fixed polarization" in d for d in diags)


@pytest.mark.parametrize(
    "text, line, column",
    [
        ("qcapim v1\ncell 0 0 zone=9 normal\n", 2, 15),
        ("qcapim v1\ncell 0 zero zone=0 normal\n", 2, 8),
        ("qcapim v1\nwire 0 0\n", 2, 1),
        ("qcapim v1\ncell 0 0 zone=0 fixed=2\n", 2, 17),
        ("cell 0 0 zone=0 input=A\nqcapim v1\n", 2, 1),
        ("qcapim v1\r\ncell 0 0 zone=0 input=A\n", 1, 10),
    ],
)
def test_parse_errors_carry_line_and_column(text, line, column):
    with pytest.raises(LayoutError) as info:
        parse_layout(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_bounding_area_single_cell():
    layout = build_layout([(0, 0, 0, Input("A"))])
    assert bounding_area(layout) == pytest.approx(0.000324, rel=1e-12)


def test_bounding_area_five_cell_wire_at_20nm():
    # (18 + 4 * 20) x 18 nm^2
    assert bounding_area(wire_layout(5, geometry=Geometry())) == pytest.approx(0.001764, rel=1e-12)


def test_bounding_area_of_empty_layout_fails():
    with pytest.raises(LayoutError):
        bounding_area(QcaLayout(()))


def test_simparams_defaults_are_the_reference_table():
    p = SimParams()
    assert (p.temperature_K, p.clock_high_J, p.clock_low_J, p.clock_shift, p.clock_amplitude_factor) == (
        1.0, 9.8e-22, 3.8e-23, 0.0, 2.0)
    assert (p.radius_of_effect_nm, p.relative_permittivity, p.layer_separation_nm) == (80.0, 12.9, 11.5)
    assert (p.convergence_tolerance, p.num_samples, p.max_iterations_per_sample) == (0.001, 128000, 100)
    assert (p.relaxation_time_s, p.time_step_s) == (1e-15, 1e-15)


@pytest.mark.parametrize(
    "overrides",
    [{"clock_low_J": 1e-21}, {"convergence_tolerance": 0}, {"num_samples": 0}, {"temperature_K": -1}],
)
def test_simparams_rejects_inconsistent_values(overrides):
    with pytest.raises(ValueError):
        SimParams().with_overrides(**overrides)


def test_simparams_overrides_are_type_checked():
    assert SimParams().with_overrides(num_samples="256").num_samples == 256
    with pytest.raises(ValueError):
        SimParams().with_overrides(num_samples="2.5")
    with pytest.raises(ValueError):
        SimParams().with_overrides(colour="red")


@pytest.mark.parametrize(
    "make",
    [wire_layout, inverter_layout, majority_layout, synthesize_primitive_layout, synthesize_xor_layout],
)
def test_synthesized_layouts_validate_and_round_trip(make):
    layout = make()
    assert validate(layout) == []
    text = serialize(layout)
    assert parse_layout(text) == layout
    assert serialize(parse_layout(text)) == text


def test_184_cell_file_round_trips(tmp_path):
    layout = read_layout(DATA / "xor184.layout")
    assert len(layout.cells) == 184
    out = tmp_path / "copy.layout"
    write_layout(layout, out)
    assert read_layout(out) == layout
    text = out.read_text()
    assert serialize(parse_layout(text)) == text


def test_translation_keeps_area():
    layout = synthesize_primitive_layout()
    assert bounding_area(layout.translated(13.5, -7.25)) == pytest.approx(bounding_area(layout), rel=1e-12)


def test_geometry_recorded_in_file():
    text = serialize(wire_layout(3, geometry=Geometry(18, 5, 20)))
    assert "geometry cell=18 dot=5 pitch=20" in text.splitlines()[1]


def test_oracle_and_name_round_trip():
    layout = build_layout([(0, 0, 0, Input("A")), (20, 0, 0, Output("out"))], name="tiny",
                          oracles=[("out", "A")])
    again = parse_layout(serialize(layout))
    assert again.name == "tiny" and again.oracles == (("out", "A"),)
