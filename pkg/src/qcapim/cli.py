"""Command-line front end: ``qcapim synth|simulate|verify|power``.

Exit codes: 0 success, 1 usage or malformed input, 2 verification failure,
3 indeterminate output, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .akers import AkersError, read_network
from .engine import exhaustive_input_schedule, simulate
from .layout import LayoutError, QcaLayout, SimParams, read_layout, write_layout
from .metrics import GAMMA_RATIOS, UnverifiedLayout, circuit_states, dissipation_report, format_reports, layout_metrics
from .synth import synthesize_network_layout, synthesize_primitive_layout, synthesize_xor_layout
from .verification import (
    DEFAULT_MARGIN,
    IncompleteTraces,
    IndeterminateOutput,
    OracleError,
    decision_sample,
    estimate_latency,
    extract_truth_table,
    output_depths,
    parse_expression,
    required_samples,
    schedule_labels,
    verify,
)

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_INDETERMINATE, EXIT_IO = 0, 1, 2, 3, 4

#: short flags for the common simulation parameters
_FLAGS = {
    "samples": "num_samples",
    "tolerance": "convergence_tolerance",
    "max_iter": "max_iterations_per_sample",
    "radius": "radius_of_effect_nm",
    "epsr": "relative_permittivity",
    "temp": "temperature_K",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _params(args) -> SimParams:
    overrides = {}
    for item in args.param or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    for flag, key in _FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    try:
        return SimParams().with_overrides(**overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _header(params: SimParams, layout: QcaLayout | None = None) -> str:
    lines = ["# simulation parameters"]
    lines += [f"#   {name:<30} {value}" for name, value in params.describe()]
    if layout is not None:
        lines.append(f"# layout {layout.name or '(unnamed)'}: {len(layout.cells)} cells, "
                     f"inputs {','.join(layout.input_labels)}, outputs {','.join(layout.output_labels)}")
    return "\n".join(lines)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schedule(layout: QcaLayout, params: SimParams):
    try:
        return exhaustive_input_schedule(schedule_labels(layout), params.num_samples)
    except ValueError as exc:
        raise UsageError(f"--samples: {exc}") from None


# --------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    target = args.target
    if target == "primitive":
        layout, stem = synthesize_primitive_layout(), "primitive"
    elif target == "xor":
        layout, stem = synthesize_xor_layout(), "xor"
    else:
        path = Path(target)
        net = read_network(path)
        layout, stem = synthesize_network_layout(net, name=path.stem), path.stem
    dest = _out_dir(args) / f"{stem}.layout"
    write_layout(layout, dest)
    print(f"wrote {dest}")
    print(layout_metrics(layout).format(), end="")
    return EXIT_OK


def cmd_simulate(args) -> int:
    layout = read_layout(args.layout)
    params = _params(args)
    schedule = _schedule(layout, params)
    traces = simulate(layout, params, schedule)
    dest = _out_dir(args) / "traces.csv"
    dest.write_text(traces.to_csv(), encoding="utf-8", newline="")
    print(_header(params, layout))
    print(traces.summary())
    print(f"wrote {dest}")
    return EXIT_OK


def _oracles(layout: QcaLayout, text: str | None):
    if text is not None:
        expr = parse_expression(text)
        if len(layout.output_labels) != 1:
            raise UsageError("a command-line oracle needs a single-output layout")
        return {layout.output_labels[0]: expr}
    if not layout.oracles:
        raise UsageError("layout declares no oracle; pass one on the command line")
    return {label: parse_expression(expr) for label, expr in layout.oracles}


def _plot_csv(traces, layout, schedule) -> str:
    """Trace CSV with a ``decision`` column marking every decision sample."""
    depths = output_depths(layout)
    marks = {decision_sample(schedule, c, d) for c in range(2**schedule.n_inputs) for d in depths.values()}
    lines = traces.to_csv().split("\n")
    out = [lines[0] + ",decision"]
    out += [f"{row},{int(int(row.split(',', 1)[0]) in marks)}" for row in lines[1:] if row]
    return "\n".join(out) + "\n"


def cmd_verify(args) -> int:
    layout = read_layout(args.layout)
    oracles = _oracles(layout, args.oracle)
    params = _params(args)
    schedule = _schedule(layout, params)
    latency = estimate_latency(layout)
    traces = simulate(layout, params, schedule, required_samples(layout, schedule))
    out = _out_dir(args)
    print(_header(params, layout))
    print(traces.summary())
    if args.plot:
        (out / "plot.csv").write_text(_plot_csv(traces, layout, schedule), encoding="utf-8", newline="")
    try:
        table = extract_truth_table(traces, layout, schedule, margin=args.margin)
    except IndeterminateOutput as exc:
        (out / "verify.txt").write_text(f"INDETERMINATE: {exc}\npass=0\n", encoding="utf-8", newline="")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INDETERMINATE
    report = verify(table, oracles, latency)
    (out / "truth.txt").write_text(table.format(), encoding="utf-8", newline="")
    (out / "verify.txt").write_text(report.format(), encoding="utf-8", newline="")
    print(report.format(), end="")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_power(args) -> int:
    layout = read_layout(args.layout)
    params = _params(args)
    try:
        ratios = [float(x) for x in args.gamma.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--gamma expects comma-separated numbers, got {args.gamma!r}") from None
    if not ratios or any(r <= 0 for r in ratios):
        raise UsageError("--gamma needs at least one positive ratio")
    out = _out_dir(args)
    print(_header(params, layout))
    try:
        states = circuit_states(layout, params, margin=args.margin)
    except UnverifiedLayout as exc:
        (out / "power.txt").write_text(f"ABORTED: layout does not verify\n{exc}\n", encoding="utf-8", newline="")
        print(f"error: layout does not verify, power run aborted\n{exc}", file=sys.stderr)
        return EXIT_FAIL
    reports = [dissipation_report(layout, params, r, states) for r in ratios]
    text = format_reports(reports, len(layout.input_labels))
    (out / "power.txt").write_text(text, encoding="utf-8", newline="")
    print(text, end="")
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, help="number of samples (default 128000)")
    p.add_argument("--tolerance", type=float, help="convergence tolerance (default 0.001)")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="maximum iterations per sample (default 100)")
    p.add_argument("--radius", type=float, help="radius of effect in nm (default 80)")
    p.add_argument("--epsr", type=float, help="relative permittivity (default 12.9)")
    p.add_argument("--temp", type=float, help="temperature in K (default 1)")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="override any simulation parameter by field name; repeatable")
    p.add_argument("--seed", type=int, help="accepted for scripting; the engine is deterministic and ignores it")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcapim", description="QCA Akers-array synthesis, simulation and verification.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="synthesize a layout")
    p.add_argument("target", help="'primitive', 'xor' or an Akers network file")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="simulate a layout over all input combinations")
    p.add_argument("layout")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="simulate and check a layout against a Boolean oracle")
    p.add_argument("layout")
    p.add_argument("oracle", nargs="?", help="expression such as 'A^B' (default: the layout's declared oracle)")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="minimum |P| at decision samples")
    p.add_argument("--plot", action="store_true", help="also write plot.csv with decision samples marked")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("power", help="dissipation report over tunnelling-energy ratios")
    p.add_argument("layout")
    p.add_argument("--gamma", default=",".join(f"{r:g}" for r in GAMMA_RATIOS),
                   help="comma-separated tunnelling-energy / kink-energy ratios (default 0.5,1,1.5)")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="minimum |P| for the verification step")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_power)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qcapim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleError as exc:
        print(f"qcapim: error: bad oracle: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IndeterminateOutput,) as exc:
        print(f"qcapim: error: {exc}", file=sys.stderr)
        return EXIT_INDETERMINATE
    except (LayoutError, AkersError, IncompleteTraces) as exc:
        print(f"qcapim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qcapim: error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
