"""Geometric QCA design model and the ``qcapim v1`` layout text format.

A layout is an immutable collection of :class:`QcaCell` records. Cell ids are
the zero-based line order of the cell records in the file, so a layout is
fully described by its header, its geometry line, optional ``name`` and
``oracle`` directives and one ``cell`` line per cell::

    qcapim v1
    geometry cell=18 dot=5 pitch=20
    name wire5
    oracle out = A
    cell 0 0 zone=0 input=A
    cell 20 0 zone=0 normal
    cell 40 0 zone=0 output=out
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

HEADER = "qcapim v1"


class LayoutError(ValueError):
    """Raised for malformed layout files or layouts violating an invariant."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


# --------------------------------------------------------------------------
# Roles


@dataclass(frozen=True)
class Input:
    label: str


@dataclass(frozen=True)
class Output:
    label: str


@dataclass(frozen=True)
class Fixed:
    polarization: float


@dataclass(frozen=True)
class Normal:
    pass


CellRole = Input | Output | Fixed | Normal
NORMAL = Normal()


@dataclass(frozen=True)
class Geometry:
    cell_size_nm: float = 18.0
    dot_diameter_nm: float = 5.0
    grid_pitch_nm: float = 20.0

    @property
    def dot_offset_nm(self) -> float:
        """Distance of each quantum dot from the cell center along x and y."""
        return self.cell_size_nm / 2 - self.dot_diameter_nm / 2


@dataclass(frozen=True)
class QcaCell:
    id: int
    x: float
    y: float
    zone: int
    role: CellRole = NORMAL

    @property
    def is_driver(self) -> bool:
        return isinstance(self.role, (Input, Fixed))

    @property
    def label(self) -> str | None:
        if isinstance(self.role, (Input, Output)):
            return self.role.label
        return None


@dataclass(frozen=True)
class QcaLayout:
    cells: tuple[QcaCell, ...]
    geometry: Geometry = field(default_factory=Geometry)
    name: str = ""
    # (output label, boolean expression) pairs checked by ``qcapim power``
    oracles: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "oracles", tuple(tuple(o) for o in self.oracles))

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def inputs(self) -> list[QcaCell]:
        return [c for c in self.cells if isinstance(c.role, Input)]

    @property
    def outputs(self) -> list[QcaCell]:
        return [c for c in self.cells if isinstance(c.role, Output)]

    @property
    def input_labels(self) -> list[str]:
        return [c.role.label for c in self.inputs]

    @property
    def output_labels(self) -> list[str]:
        return [c.role.label for c in self.outputs]

    def cell_by_label(self, label: str) -> QcaCell:
        for c in self.cells:
            if c.label == label:
                return c
        raise KeyError(label)

    def translated(self, dx: float, dy: float) -> "QcaLayout":
        return replace(self, cells=[replace(c, x=c.x + dx, y=c.y + dy) for c in self.cells])


def build_layout(
    cells: Iterable[tuple[float, float, int, CellRole]],
    geometry: Geometry | None = None,
    name: str = "",
    oracles: Sequence[tuple[str, str]] = (),
) -> QcaLayout:
    """Number ``(x, y, zone, role)`` tuples in order and wrap them in a layout."""
    cells = [QcaCell(i, float(x), float(y), int(z), role) for i, (x, y, z, role) in enumerate(cells)]
    return QcaLayout(tuple(cells), geometry or Geometry(), name, tuple(oracles))


# --------------------------------------------------------------------------
# Simulation parameters


@dataclass(frozen=True)
class SimParams:
    """Bistable simulation parameters; the defaults are the QCADesigner defaults."""

    temperature_K: float = 1.0
    relaxation_time_s: float = 1e-15
    time_step_s: float = 1e-15
    clock_high_J: float = 9.8e-22
    clock_low_J: float = 3.8e-23
    clock_shift: float = 0.0
    clock_amplitude_factor: float = 2.0
    radius_of_effect_nm: float = 80.0
    relative_permittivity: float = 12.9
    layer_separation_nm: float = 11.5  # single-layer engine: carried, never read
    convergence_tolerance: float = 1e-3
    num_samples: int = 128000
    max_iterations_per_sample: int = 100

    def __post_init__(self):
        if not self.clock_low_J < self.clock_high_J:
            raise ValueError("clock_low_J must be below clock_high_J")
        if not self.convergence_tolerance > 0:
            raise ValueError("convergence_tolerance must be positive")
        if self.num_samples < 1:
            raise ValueError("num_samples must be at least 1")
        if self.max_iterations_per_sample < 1:
            raise ValueError("max_iterations_per_sample must be at least 1")
        if self.temperature_K <= 0:
            raise ValueError("temperature_K must be positive")
        if self.radius_of_effect_nm <= 0 or self.relative_permittivity <= 0:
            raise ValueError("radius_of_effect_nm and relative_permittivity must be positive")

    def with_overrides(self, **overrides) -> "SimParams":
        known = {f.name: f.type for f in fields(self)}
        for key in overrides:
            if key not in known:
                raise ValueError(f"unknown simulation parameter {key!r}")
        coerced = {}
        for key, value in overrides.items():
            default = getattr(self, key)
            coerced[key] = int(value) if isinstance(default, int) else float(value)
            if isinstance(default, int) and coerced[key] != float(value):
                raise ValueError(f"{key} must be an integer, got {value!r}")
        return replace(self, **coerced)

    def describe(self) -> list[tuple[str, str]]:
        """Parameter table in the QCADesigner display format."""
        return [
            ("Temperature", f"{self.temperature_K:g} K"),
            ("Relaxation Time", f"{self.relaxation_time_s:.6e} s"),
            ("Time step", f"{self.time_step_s:.6e} s"),
            ("Clock High", f"{self.clock_high_J:.6e} J"),
            ("Clock Low", f"{self.clock_low_J:.6e} J"),
            ("Clock Shift", f"{self.clock_shift:.6e}"),
            ("Clock Amplitude Factor", f"{self.clock_amplitude_factor:.6f}"),
            ("Radius of Effect", f"{self.radius_of_effect_nm:.6f} nm"),
            ("Relative Permittivity", f"{self.relative_permittivity:.6f}"),
            ("Layer Separation", f"{self.layer_separation_nm:.6f} nm"),
            ("Convergence Tolerance", f"{self.convergence_tolerance:.6f}"),
            ("Number of Samples", f"{self.num_samples}"),
            ("Maximum Iterations per Sample", f"{self.max_iterations_per_sample}"),
        ]


# --------------------------------------------------------------------------
# Validation


def validate(layout: QcaLayout) -> list[str]:
    """Return human-readable diagnostics; an empty list means the layout is sound."""
    diags = []
    size = layout.geometry.cell_size_nm
    labels: dict[str, int] = {}
    for cell in layout.cells:
        if cell.zone not in (0, 1, 2, 3):
            diags.append(f"cell {cell.id}: clock zone {cell.zone} outside 0..3")
        role = cell.role
        if isinstance(role, Fixed) and role.polarization not in (-1.0, 1.0):
            diags.append(f"cell {cell.id}: fixed polarization {role.polarization} not in {{-1, +1}}")
        if isinstance(role, (Input, Output)):
            if not role.label:
                diags.append(f"cell {cell.id}: empty label")
            elif role.label in labels:
                diags.append(f"cell {cell.id}: duplicate label {role.label!r} (also cell {labels[role.label]})")
            else:
                labels[role.label] = cell.id

    # grid hashing keeps the overlap check linear for large layouts
    buckets: dict[tuple[int, int], list[QcaCell]] = {}
    for cell in layout.cells:
        key = (math.floor(cell.x / size), math.floor(cell.y / size))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for other in buckets.get((key[0] + dx, key[1] + dy), ()):
                    if math.hypot(cell.x - other.x, cell.y - other.y) < size:
                        diags.append(f"cell {cell.id}: overlaps cell {other.id}")
        buckets.setdefault(key, []).append(cell)

    has_normal = any(not c.is_driver for c in layout.cells)
    if has_normal and not any(c.is_driver for c in layout.cells):
        diags.append("no driver: layout has no Input or Fixed cell")
    return diags


def check(layout: QcaLayout) -> QcaLayout:
    diags = validate(layout)
    if diags:
        raise LayoutError("; ".join(diags))
    return layout


def bounding_area(layout: QcaLayout) -> float:
    """Area in square micrometres of the box enclosing every cell outline."""
    if not layout.cells:
        raise LayoutError("bounding area of an empty layout")
    half = layout.geometry.cell_size_nm / 2
    xs = [c.x for c in layout.cells]
    ys = [c.y for c in layout.cells]
    width = max(xs) - min(xs) + 2 * half
    height = max(ys) - min(ys) + 2 * half
    return width * height * 1e-6


# --------------------------------------------------------------------------
# Text format


def format_number(value: float) -> str:
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _format_role(role: CellRole) -> str:
    if isinstance(role, Input):
        return f"input={role.label}"
    if isinstance(role, Output):
        return f"output={role.label}"
    if isinstance(role, Fixed):
        return "fixed=+1" if role.polarization > 0 else "fixed=-1"
    return "normal"


def serialize(layout: QcaLayout) -> str:
    g = layout.geometry
    lines = [
        HEADER,
        f"geometry cell={format_number(g.cell_size_nm)} dot={format_number(g.dot_diameter_nm)} "
        f"pitch={format_number(g.grid_pitch_nm)}",
    ]
    if layout.name:
        lines.append(f"name {layout.name}")
    for label, expr in layout.oracles:
        lines.append(f"oracle {label} = {expr}")
    for c in layout.cells:
        lines.append(f"cell {format_number(c.x)} {format_number(c.y)} zone={c.zone} {_format_role(c.role)}")
    return "\n".join(lines) + "\n"


def _number(token: str, lineno: int, col: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise LayoutError(f"expected a number, got {token!r}", lineno, col) from None
    if not math.isfinite(value):
        raise LayoutError(f"non-finite number {token!r}", lineno, col)
    return value


def _tokens(line: str) -> list[tuple[int, str]]:
    out, col = [], 0
    for part in line.split(" "):
        if part:
            out.append((col + 1, part))
        col += len(part) + 1
    return out


def _parse_role(token: str, lineno: int, col: int) -> CellRole:
    if token == "normal":
        return NORMAL
    key, sep, value = token.partition("=")
    if not sep:
        raise LayoutError(f"unknown cell role {token!r}", lineno, col)
    if key == "fixed":
        if value not in ("+1", "-1", "1"):
            raise LayoutError(f"fixed polarization must be +1 or -1, got {value!r}", lineno, col)
        return Fixed(-1.0 if value == "-1" else 1.0)
    if key in ("input", "output"):
        if not value:
            raise LayoutError(f"empty {key} label", lineno, col)
        return Input(value) if key == "input" else Output(value)
    raise LayoutError(f"unknown cell role {token!r}", lineno, col)


def parse_layout(text: str) -> QcaLayout:
    """Parse ``qcapim v1`` text into a validated :class:`QcaLayout`."""
    geometry = None
    name = ""
    oracles: list[tuple[str, str]] = []
    cells: list[QcaCell] = []
    seen_header = False
    for lineno, raw in enumerate(text.split("\n"), start=1):
        if "\r" in raw:
            raise LayoutError("CR line ending; the format requires LF", lineno, raw.index("\r") + 1)
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.strip() == HEADER:
            if seen_header or cells or geometry is not None:
                raise LayoutError("header must be the first line", lineno, 1)
            seen_header = True
            continue
        toks = _tokens(line)
        col, word = toks[0]
        if word == "geometry":
            if geometry is not None:
                raise LayoutError("geometry line must precede cells and appear once", lineno, col)
            values = {}
            for c, tok in toks[1:]:
                key, sep, val = tok.partition("=")
                if not sep or key not in ("cell", "dot", "pitch") or key in values:
                    raise LayoutError(f"bad geometry field {tok!r}", lineno, c)
                values[key] = _number(val, lineno, c + len(key) + 1)
            if len(values) != 3:
                raise LayoutError("geometry needs cell=, dot= and pitch=", lineno, col)
            geometry = Geometry(values["cell"], values["dot"], values["pitch"])
        elif word == "name":
            name = line.strip()[len("name"):].strip()
        elif word == "oracle":
            body = line.split("oracle", 1)[1]
            label, sep, expr = body.partition("=")
            if not sep or not label.strip() or not expr.strip():
                raise LayoutError("oracle line must read 'oracle <label> = <expr>'", lineno, col)
            oracles.append((label.strip(), expr.strip()))
        elif word == "cell":
            if geometry is None:
                geometry = Geometry()
            if len(toks) != 5:
                raise LayoutError("cell line must read 'cell <x> <y> zone=<k> <role>'", lineno, col)
            x = _number(toks[1][1], lineno, toks[1][0])
            y = _number(toks[2][1], lineno, toks[2][0])
            zc, ztok = toks[3]
            if not ztok.startswith("zone="):
                raise LayoutError(f"expected zone=<k>, got {ztok!r}", lineno, zc)
            try:
                zone = int(ztok[5:])
            except ValueError:
                raise LayoutError(f"bad zone {ztok[5:]!r}", lineno, zc + 5) from None
            if zone not in (0, 1, 2, 3):
                raise LayoutError(f"zone {zone} out of range 0..3", lineno, zc + 5)
            role = _parse_role(toks[4][1], lineno, toks[4][0])
            cells.append(QcaCell(len(cells), x, y, zone, role))
        else:
            raise LayoutError(f"unknown directive {word!r}", lineno, col)
    return check(QcaLayout(tuple(cells), geometry or Geometry(), name, tuple(oracles)))


def read_layout(path) -> QcaLayout:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_layout(fh.read())


def write_layout(layout: QcaLayout, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(layout))
