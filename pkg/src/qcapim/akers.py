"""Logical model of the modified Akers array.

Every cell computes ``F(X, Y, Z) = X.!Z + Y.Z``: Z selects between the X and
Y arms. X and Y come from constants, external inputs or earlier cells; Z
comes from a stored bit in the :class:`MemoryPlane`, an external input or a
constant, which is what lets the same array store data and compute on it.

Networks have a line-based text form::

    akers v1
    cell 1 x=0 y=1 z=in:B
    cell 2 x=1 y=0 z=in:B
    cell 3 x=c1 y=c2 z=in:A
    cell 4 x=c3 y=c3 z=0
    out c4
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

NETWORK_HEADER = "akers v1"
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class AkersError(ValueError):
    """Malformed network, unresolved reference, cycle or unknown memory slot."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


def eval_cell(x: int, y: int, z: int) -> int:
    """The Akers cell function: ``x`` when ``z`` is 0, ``y`` when ``z`` is 1."""
    for name, bit in (("x", x), ("y", y), ("z", z)):
        if bit not in (0, 1):
            raise AkersError(f"{name}={bit!r} is not a bit")
    return int(x & (1 - z) | y & z)


# --------------------------------------------------------------------------
# Memory plane


@dataclass(frozen=True)
class MemoryPlane:
    """Stored Z bits. Planes are values: :func:`store` returns a new plane."""

    slots: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for slot, bit in dict(self.slots).items():
            if bit not in (0, 1):
                raise AkersError(f"slot {slot!r} holds {bit!r}, not a bit")
            clean[str(slot)] = int(bit)
        object.__setattr__(self, "slots", clean)

    @classmethod
    def empty(cls, names: Sequence[str]) -> "MemoryPlane":
        return cls({name: 0 for name in names})


def read(plane: MemoryPlane, slot: str) -> int:
    try:
        return plane.slots[slot]
    except KeyError:
        raise AkersError(f"unknown memory slot {slot!r}") from None


def store(plane: MemoryPlane, slot: str, bit: int) -> MemoryPlane:
    read(plane, slot)
    slots = dict(plane.slots)
    slots[slot] = bit
    return MemoryPlane(slots)


# --------------------------------------------------------------------------
# Signal references and networks


@dataclass(frozen=True)
class Ref:
    """A signal source: ``const`` (0/1), ``input``, ``mem`` or ``cell``."""

    kind: str
    value: str | int

    def __str__(self) -> str:
        if self.kind == "const":
            return str(self.value)
        if self.kind == "input":
            return f"in:{self.value}"
        if self.kind == "mem":
            return f"mem:{self.value}"
        return f"c{self.value}"


def const(bit: int) -> Ref:
    return Ref("const", int(bit))


def inp(label: str) -> Ref:
    return Ref("input", label)


def mem(slot: str) -> Ref:
    return Ref("mem", slot)


def cell(cell_id: int) -> Ref:
    return Ref("cell", int(cell_id))


def parse_ref(token: str) -> Ref:
    if token in ("0", "1"):
        return const(int(token))
    for prefix, kind in (("in:", "input"), ("mem:", "mem")):
        if token.startswith(prefix):
            name = token[len(prefix):]
            if not _NAME.match(name):
                raise AkersError(f"bad name in reference {token!r}")
            return Ref(kind, name)
    if re.fullmatch(r"c\d+", token):
        return cell(int(token[1:]))
    raise AkersError(f"bad signal reference {token!r}")


@dataclass(frozen=True)
class AkersCellSpec:
    id: int
    x: Ref
    y: Ref
    z: Ref


@dataclass(frozen=True)
class AkersNetwork:
    cells: tuple[AkersCellSpec, ...]
    outputs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def by_id(self) -> dict[int, AkersCellSpec]:
        return {c.id: c for c in self.cells}

    @property
    def input_labels(self) -> list[str]:
        """External inputs in order of first reference."""
        seen: dict[str, None] = {}
        for c in self.cells:
            for ref in (c.x, c.y, c.z):
                if ref.kind == "input":
                    seen.setdefault(str(ref.value))
        return list(seen)

    @property
    def memory_slots(self) -> list[str]:
        seen: dict[str, None] = {}
        for c in self.cells:
            if c.z.kind == "mem":
                seen.setdefault(str(c.z.value))
        return list(seen)


def check_network(net: AkersNetwork) -> list[int]:
    """Validate ``net`` and return its cell ids in evaluation order."""
    by_id: dict[int, AkersCellSpec] = {}
    for c in net.cells:
        if c.id in by_id:
            raise AkersError(f"duplicate cell id c{c.id}")
        by_id[c.id] = c
        if c.z.kind == "cell":
            raise AkersError(f"c{c.id}: Z must come from memory, an input or a constant, not {c.z}")
        for ref in (c.x, c.y):
            if ref.kind == "mem":
                raise AkersError(f"c{c.id}: memory slots only drive Z, got {ref}")
    if not net.outputs:
        raise AkersError("network has no outputs")
    for out in net.outputs:
        if out not in by_id:
            raise AkersError(f"output c{out} is not a cell")
    clash = set(net.input_labels) & set(net.memory_slots)
    if clash:
        raise AkersError(f"names used both as input and memory slot: {sorted(clash)}")

    order: list[int] = []
    state: dict[int, int] = {}  # 1 visiting, 2 done

    def visit(cid: int, path: tuple[int, ...]):
        if state.get(cid) == 2:
            return
        if state.get(cid) == 1:
            loop = " -> ".join(f"c{i}" for i in path[path.index(cid):] + (cid,))
            raise AkersError(f"cycle: {loop}")
        state[cid] = 1
        for ref in (by_id[cid].x, by_id[cid].y):
            if ref.kind == "cell":
                if ref.value not in by_id:
                    raise AkersError(f"c{cid} references unknown cell {ref}")
                visit(int(ref.value), path + (cid,))
        state[cid] = 2
        order.append(cid)

    for c in net.cells:
        visit(c.id, ())
    return order


def levels(net: AkersNetwork) -> dict[int, int]:
    """Depth of every cell: 0 for cells fed only by inputs and constants."""
    by_id = net.by_id
    depth: dict[int, int] = {}
    for cid in check_network(net):
        c = by_id[cid]
        depth[cid] = max([depth[int(r.value)] + 1 for r in (c.x, c.y) if r.kind == "cell"], default=0)
    return depth


def eval_network(net: AkersNetwork, inputs: Mapping[str, int], plane: MemoryPlane | None = None) -> dict[int, int]:
    """Evaluate ``net`` and return ``{output cell id: bit}``."""
    plane = plane or MemoryPlane()
    missing = [label for label in net.input_labels if label not in inputs]
    if missing:
        raise AkersError(f"no value for inputs {missing}")
    values: dict[int, int] = {}
    by_id = net.by_id

    def resolve(ref: Ref) -> int:
        if ref.kind == "const":
            return int(ref.value)
        if ref.kind == "input":
            return int(inputs[str(ref.value)])
        if ref.kind == "mem":
            return read(plane, str(ref.value))
        return values[int(ref.value)]

    for cid in check_network(net):
        c = by_id[cid]
        values[cid] = eval_cell(resolve(c.x), resolve(c.y), resolve(c.z))
    return {out: values[out] for out in net.outputs}


def build_xor_network() -> AkersNetwork:
    """Four-cell XOR: two constant-fed cells give B and !B, a third selects
    between them with A and the last one buffers the result."""
    return AkersNetwork(
        (
            AkersCellSpec(1, const(0), const(1), inp("B")),
            AkersCellSpec(2, const(1), const(0), inp("B")),
            AkersCellSpec(3, cell(1), cell(2), inp("A")),
            AkersCellSpec(4, cell(3), cell(3), const(0)),
        ),
        (4,),
    )


def mux_tree_network(table: Sequence[int], labels: Sequence[str]) -> AkersNetwork:
    """Decision-tree realization of an arbitrary truth table.

    ``table[k]`` is the output for the input vector whose bits, read most
    significant first, are ``labels``. This is the classic array reading
    where every cell selects on one variable, so it needs ``2**n - 1`` cells.
    """
    n = len(labels)
    if n < 1 or len(table) != 2**n:
        raise AkersError(f"a table over {n} inputs needs {2**n} entries, got {len(table)}")
    cells: list[AkersCellSpec] = []
    layer: list[Ref] = [const(b) for b in table]
    for var in reversed(labels):
        nxt = []
        for lo, hi in zip(layer[0::2], layer[1::2]):
            cid = len(cells) + 1
            cells.append(AkersCellSpec(cid, lo, hi, inp(var)))
            nxt.append(cell(cid))
        layer = nxt
    return AkersNetwork(tuple(cells), (len(cells),))


def parity_network(labels: Sequence[str]) -> AkersNetwork:
    """n-input XOR carrying both rails: ``2 * n`` cells.

    Z can never come from another cell, so the complement of an internal
    signal is carried alongside it instead of being recomputed.
    """
    if not labels:
        raise AkersError("parity of no inputs")
    cells = [AkersCellSpec(1, const(0), const(1), inp(labels[0])),
             AkersCellSpec(2, const(1), const(0), inp(labels[0]))]
    for var in labels[1:]:
        p, q = len(cells) - 1, len(cells)
        cells.append(AkersCellSpec(q + 1, cell(p), cell(q), inp(var)))
        cells.append(AkersCellSpec(q + 2, cell(q), cell(p), inp(var)))
    return AkersNetwork(tuple(cells), (len(cells) - 1,))


def network_expression(net: AkersNetwork, output: int) -> str:
    """Boolean expression (``& | !`` syntax) equivalent to one network output."""
    by_id = net.by_id
    check_network(net)

    def expr(ref: Ref) -> str:
        if ref.kind in ("input", "mem"):
            return str(ref.value)
        if ref.kind == "const":
            return str(ref.value)
        c = by_id[int(ref.value)]
        if c.z.kind == "const":
            return expr(c.y if c.z.value else c.x)
        x, y, z = expr(c.x), expr(c.y), expr(c.z)
        return f"(({x})&!({z}))|(({y})&({z}))"

    return expr(cell(output))


# --------------------------------------------------------------------------
# Text format


def serialize_network(net: AkersNetwork) -> str:
    lines = [NETWORK_HEADER]
    lines += [f"cell {c.id} x={c.x} y={c.y} z={c.z}" for c in net.cells]
    lines += [f"out c{o}" for o in net.outputs]
    return "\n".join(lines) + "\n"


def parse_network(text: str) -> AkersNetwork:
    cells: list[AkersCellSpec] = []
    outputs: list[int] = []
    seen_header = False
    for lineno, raw in enumerate(text.split("\n"), start=1):
        if "\r" in raw:
            raise AkersError("CR line ending; the format requires LF", lineno, raw.index("\r") + 1)
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.strip() == NETWORK_HEADER:
            if seen_header or cells or outputs:
                raise AkersError("header must be the first line", lineno, 1)
            seen_header = True
            continue
        toks = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", line)]
        col, word = toks[0]
        if word == "cell":
            if len(toks) != 5 or not toks[1][1].isdigit():
                raise AkersError("cell line must read 'cell <id> x=<ref> y=<ref> z=<ref>'", lineno, col)
            refs = {}
            for (c, tok), key in zip(toks[2:], "xyz"):
                if not tok.startswith(key + "="):
                    raise AkersError(f"expected {key}=<ref>, got {tok!r}", lineno, c)
                try:
                    refs[key] = parse_ref(tok[2:])
                except AkersError as exc:
                    raise AkersError(str(exc), lineno, c + 2) from None
            cells.append(AkersCellSpec(int(toks[1][1]), refs["x"], refs["y"], refs["z"]))
        elif word == "out":
            if len(toks) != 2 or not re.fullmatch(r"c\d+", toks[1][1]):
                raise AkersError("out line must read 'out c<id>'", lineno, col)
            outputs.append(int(toks[1][1][1:]))
        else:
            raise AkersError(f"unknown directive {word!r}", lineno, col)
    net = AkersNetwork(tuple(cells), tuple(outputs))
    check_network(net)
    return net


def read_network(path) -> AkersNetwork:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_network(fh.read())
