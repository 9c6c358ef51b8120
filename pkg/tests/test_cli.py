import subprocess
import sys

import pytest

from qcapim.cli import EXIT_FAIL, EXIT_INDETERMINATE, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from qcapim.layout import read_layout, validate, write_layout
from qcapim.metrics import layout_metrics
from qcapim.synth import wire_layout

DESK = ["--samples", "256"]


@pytest.fixture(scope="module")
def xor_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "xor", "--out", str(out)]) == EXIT_OK
    return out / "xor.layout"


def test_synth_primitive(tmp_path, capsys):
    assert main(["synth", "primitive", "--out", str(tmp_path)]) == EXIT_OK
    layout = read_layout(tmp_path / "primitive.layout")
    assert validate(layout) == []
    assert layout_metrics(layout).clock_zone_regions == 2
    assert "clock_zone_regions=2" in capsys.readouterr().out


def test_synth_network_file(tmp_path):
    net = tmp_path / "buf.net"
    net.write_text("akers v1\ncell 1 x=0 y=1 z=in:B\nout c1\n")
    assert main(["synth", str(net), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "buf.layout").exists()


def test_synth_missing_network(tmp_path):
    assert main(["synth", str(tmp_path / "missing.net"), "--out", str(tmp_path)]) == EXIT_IO


def test_synth_bad_network(tmp_path):
    net = tmp_path / "bad.net"
    net.write_text("akers v1\ncell 1 x=0 y=2 z=in:B\nout c1\n")
    assert main(["synth", str(net), "--out", str(tmp_path)]) == EXIT_USAGE


def test_verify_xor_passes(xor_file, tmp_path):
    assert main(["verify", str(xor_file), "A^B", *DESK, "--out", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "verify.txt").read_text()
    assert "pass=1" in text and "latency_cycles=5" in text
    assert (tmp_path / "truth.txt").read_text().splitlines()[1:] == ["0 0 | 0", "0 1 | 1", "1 0 | 1", "1 1 | 0"]


def test_verify_uses_declared_oracle(xor_file, tmp_path):
    assert main(["verify", str(xor_file), *DESK, "--out", str(tmp_path)]) == EXIT_OK


def test_verify_xor_against_and_fails(xor_file, tmp_path):
    assert main(["verify", str(xor_file), "A&B", *DESK, "--out", str(tmp_path)]) == EXIT_FAIL
    text = (tmp_path / "verify.txt").read_text()
    assert "mismatches=3" in text
    assert text.count("inputs=") == 3


def test_malformed_oracle_is_a_usage_error(xor_file, tmp_path, capsys):
    assert main(["verify", str(xor_file), "A &", *DESK, "--out", str(tmp_path)]) == EXIT_USAGE
    assert "bad oracle" in capsys.readouterr().err


def test_indeterminate_exit_code(xor_file, tmp_path):
    assert main(["verify", str(xor_file), *DESK, "--margin", "0.9999", "--out", str(tmp_path)]) == EXIT_INDETERMINATE
    assert "INDETERMINATE" in (tmp_path / "verify.txt").read_text()


def test_plot_csv_marks_decisions(xor_file, tmp_path):
    assert main(["verify", str(xor_file), *DESK, "--plot", "--out", str(tmp_path)]) == EXIT_OK
    rows = (tmp_path / "plot.csv").read_text().splitlines()
    assert rows[0].endswith(",decision")
    assert sum(r.endswith(",1") for r in rows[1:]) == 4


def test_simulate_writes_one_row_per_sample(xor_file, tmp_path):
    assert main(["simulate", str(xor_file), "--samples", "64", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "traces.csv").read_text().splitlines()
    assert lines[0] == "sample,clock0,clock1,clock2,clock3,A,B,F"
    assert len(lines) == 1 + 64


def test_simulate_header_echoes_reference_parameters(xor_file, tmp_path, capsys):
    main(["simulate", str(xor_file), *DESK, "--out", str(tmp_path)])
    out = capsys.readouterr().out
    for expected in [
        "Temperature                    1 K",
        "Clock High                     9.800000e-22 J",
        "Clock Low                      3.800000e-23 J",
        "Clock Shift                    0.000000e+00",
        "Clock Amplitude Factor         2.000000",
        "Radius of Effect               80.000000 nm",
        "Relative Permittivity          12.900000",
        "Layer Separation               11.500000 nm",
        "Convergence Tolerance          0.001000",
        "Maximum Iterations per Sample  100",
    ]:
        assert expected in out


def test_simulate_is_byte_identical(xor_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", str(xor_file), *DESK, "--out", str(d)]) == EXIT_OK
    assert (a / "traces.csv").read_bytes() == (b / "traces.csv").read_bytes()


def test_param_overrides(xor_file, tmp_path, capsys):
    assert main(["simulate", str(xor_file), *DESK, "--param", "temperature_K=2", "--out", str(tmp_path)]) == EXIT_OK
    assert "Temperature                    2 K" in capsys.readouterr().out


@pytest.mark.parametrize(
    "extra",
    [["--param", "colour=red"], ["--param", "oops"], ["--samples", "100"], ["--tolerance", "0"]],
)
def test_bad_parameters_are_usage_errors(xor_file, tmp_path, extra):
    assert main(["simulate", str(xor_file), *DESK, *extra, "--out", str(tmp_path)]) == EXIT_USAGE


def test_power_report(xor_file, tmp_path):
    args = ["power", str(xor_file), "--gamma", "0.5,1.0,1.5", *DESK, "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    text = (tmp_path / "power.txt").read_text()
    assert text.splitlines()[0].split()[1:] == ["gamma/Ek=0.5", "gamma/Ek=1", "gamma/Ek=1.5"]
    leak = [float(ln.split("=", 1)[1]) for ln in text.splitlines() if ln.startswith("avg_leakage_meV[")]
    assert len(leak) == 3 and leak[0] < leak[1] < leak[2]
    again = tmp_path / "again"
    main(args[:-1] + [str(again)])
    assert (again / "power.txt").read_bytes() == (tmp_path / "power.txt").read_bytes()


def test_power_single_ratio(xor_file, tmp_path):
    assert main(["power", str(xor_file), "--gamma", "1", *DESK, "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "power.txt").read_text().splitlines()[0].split()[1:] == ["gamma/Ek=1"]


def test_power_refuses_unverified_layout(tmp_path):
    path = tmp_path / "liar.layout"
    layout = wire_layout(5)
    write_layout(type(layout)(layout.cells, layout.geometry, "liar", (("out", "!A"),)), path)
    assert main(["power", str(path), *DESK, "--out", str(tmp_path)]) == EXIT_FAIL
    assert (tmp_path / "power.txt").read_text().startswith("ABORTED")


def test_missing_layout_is_an_io_error(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.layout"), "--out", str(tmp_path)]) == EXIT_IO


def test_malformed_layout_is_a_usage_error(tmp_path):
    path = tmp_path / "bad.layout"
    path.write_text("qcapim v1\ncell 0 0 zone=7 normal\n")
    assert main(["simulate", str(path), "--out", str(tmp_path)]) == EXIT_USAGE


def test_unknown_subcommand_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == EXIT_USAGE


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qcapim.cli", "synth", "primitive", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "cell_count=" in proc.stdout
