"""Bit-precise symbolic expression trees with per-expression taint labels.

Expressions are immutable and freely shareable across execution paths.
Every node carries a width in bits and a two-bit taint (secret, symbolic).
Smart constructors apply constant folding plus a small set of identity
rewrites; anything stronger is intentionally left to the enumeration
oracle in :mod:`specsim.solver`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional


class ExprError(Exception):
    pass


class WidthError(ExprError):
    pass


class UnboundSymbol(ExprError):
    pass


@dataclass(frozen=True)
class Taint:
    """Independent secrecy and symbolicness bits attached to a value."""

    secret: bool = False
    symbolic: bool = False

    def join(self, other: "Taint") -> "Taint":
        return Taint(self.secret or other.secret, self.symbolic or other.symbolic)


NO_TAINT = Taint()

ARITH_OPS = ("add", "sub", "mul", "and", "or", "xor", "shl", "lshr")
CMP_OPS = ("lt", "le", "eq", "ne")
BIN_OPS = ARITH_OPS + CMP_OPS
UN_OPS = ("not", "neg", "zext", "trunc")


@dataclass(frozen=True)
class Expr:
    width: int
    taint: Taint


@dataclass(frozen=True)
class Const(Expr):
    value: int


@dataclass(frozen=True)
class Sym(Expr):
    name: str


@dataclass(frozen=True)
class UnOp(Expr):
    op: str
    a: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    a: Expr
    b: Expr


@dataclass(frozen=True)
class MemRead(Expr):
    """Read of `width` bits from a frozen memory snapshot at a symbolic address.

    `version` names a snapshot registered with the engine's snapshot store;
    the snapshot maps byte addresses to width-8 expressions.
    """

    version: int
    addr: Expr


def mask(width: int) -> int:
    return (1 << width) - 1


def const(value: int, width: int = 32) -> Const:
    if not 0 < width <= 64:
        raise WidthError(f"bad width {width}")
    return Const(width, NO_TAINT, value & mask(width))


def sym(name: str, width: int, secret: bool = False) -> Sym:
    if not 0 < width <= 64:
        raise WidthError(f"bad width {width}")
    return Sym(width, Taint(secret=secret, symbolic=True), name)


def _apply_binop(op: str, x: int, y: int, width: int) -> int:
    m = mask(width)
    if op == "add":
        return (x + y) & m
    if op == "sub":
        return (x - y) & m
    if op == "mul":
        return (x * y) & m
    if op == "and":
        return x & y
    if op == "or":
        return x | y
    if op == "xor":
        return x ^ y
    if op == "shl":
        # shift amounts are taken modulo the width
        return (x << (y % width)) & m
    if op == "lshr":
        return x >> (y % width)
    if op == "lt":
        return int(x < y)
    if op == "le":
        return int(x <= y)
    if op == "eq":
        return int(x == y)
    if op == "ne":
        return int(x != y)
    raise ExprError(f"unknown binop {op}")


def mk_binop(op: str, a: Expr, b: Expr) -> Expr:
    """Build a binary operation; taint is the join of the operand taints.

    Comparison results are width-32 values in {0, 1}.  Identity rewrites
    that eliminate an operand (x & 0, x ^ x) drop that operand's taint,
    keeping taint equal to the OR over the remaining symbolic leaves.
    """
    if op not in BIN_OPS:
        raise ExprError(f"unknown binop {op}")
    if a.width != b.width:
        raise WidthError(f"{op}: width mismatch {a.width} vs {b.width}")
    out_width = 32 if op in CMP_OPS else a.width

    if isinstance(a, Const) and isinstance(b, Const):
        return const(_apply_binop(op, a.value, b.value, a.width), out_width)

    # identity rewrites
    if isinstance(b, Const):
        if b.value == 0 and op in ("add", "sub", "or", "xor", "shl", "lshr"):
            return a
        if b.value == 0 and op in ("and", "mul"):
            return const(0, out_width)
        if b.value == 1 and op == "mul":
            return a
    if isinstance(a, Const):
        if a.value == 0 and op in ("add", "or", "xor"):
            return b
        if a.value == 0 and op in ("and", "mul"):
            return const(0, out_width)
        if a.value == 1 and op == "mul":
            return b
    if op == "xor" and a == b:
        return const(0, out_width)

    return BinOp(out_width, a.taint.join(b.taint), op, a, b)


def mk_unop(op: str, a: Expr, width: Optional[int] = None) -> Expr:
    """Build a unary operation; taint is copied from the operand.

    `zext` and `trunc` change the width to `width`; other ops keep it.
    """
    if op not in UN_OPS:
        raise ExprError(f"unknown unop {op}")
    if op == "zext":
        if width is None or width < a.width:
            raise WidthError("zext needs a wider target width")
        out_width = width
    elif op == "trunc":
        if width is None or width > a.width:
            raise WidthError("trunc needs a narrower target width")
        out_width = width
    else:
        out_width = a.width

    if isinstance(a, Const):
        if op == "not":
            return const(~a.value, out_width)
        if op == "neg":
            return const(-a.value, out_width)
        return const(a.value, out_width)  # zext/trunc: masking in const()
    if op in ("zext", "trunc") and out_width == a.width:
        return a
    return UnOp(out_width, a.taint, op, a)


def zext8to32(a: Expr) -> Expr:
    return mk_unop("zext", a, 32)


def trunc32to8(a: Expr) -> Expr:
    return mk_unop("trunc", a, 8)


def coerce(a: Expr, width: int) -> Expr:
    """Zero-extend or truncate `a` to `width`."""
    if a.width == width:
        return a
    if a.width < width:
        return mk_unop("zext", a, width)
    return mk_unop("trunc", a, width)


def mk_ite(cond: Expr, a: Expr, b: Expr) -> Expr:
    if a.width != b.width:
        raise WidthError("ite arms differ in width")
    if isinstance(cond, Const):
        return a if cond.value != 0 else b
    taint = cond.taint.join(a.taint).join(b.taint)
    return Ite(a.width, taint, cond, a, b)


def mk_memread(version: int, addr: Expr, width: int, secret: bool) -> MemRead:
    if width not in (8, 32):
        raise WidthError("memory reads are 8 or 32 bits")
    return MemRead(width, Taint(secret=secret, symbolic=True), version, addr)


class Model:
    """Concrete assignment of symbol names to values (a witness)."""

    def __init__(self, assignment: Mapping[str, int]):
        self.assignment = dict(assignment)

    def lookup(self, s: Sym) -> int:
        try:
            return self.assignment[s.name] & mask(s.width)
        except KeyError:
            raise UnboundSymbol(s.name) from None

    def __eq__(self, other) -> bool:
        return isinstance(other, Model) and self.assignment == other.assignment

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.assignment.items()))
        return f"Model({inner})"


Snapshots = Mapping[int, Mapping[int, Expr]]


def evaluate(e: Expr, model: Model, snapshots: Optional[Snapshots] = None) -> int:
    """Ground-truth evaluator: two's-complement semantics, modular at width.

    MemRead nodes evaluate their address under `model` and then read the
    referenced snapshot byte-wise (little-endian); addresses missing from
    the snapshot read as zero.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Sym):
        return model.lookup(e)
    if isinstance(e, UnOp):
        v = evaluate(e.a, model, snapshots)
        if e.op == "not":
            return ~v & mask(e.width)
        if e.op == "neg":
            return -v & mask(e.width)
        return v & mask(e.width)  # zext / trunc
    if isinstance(e, BinOp):
        x = evaluate(e.a, model, snapshots)
        y = evaluate(e.b, model, snapshots)
        return _apply_binop(e.op, x, y, e.a.width)
    if isinstance(e, Ite):
        c = evaluate(e.cond, model, snapshots)
        return evaluate(e.a if c != 0 else e.b, model, snapshots)
    if isinstance(e, MemRead):
        if snapshots is None or e.version not in snapshots:
            raise ExprError(f"unknown memory snapshot v{e.version}")
        snap = snapshots[e.version]
        addr = evaluate(e.addr, model, snapshots)
        value = 0
        for i in range(e.width // 8):
            byte = snap.get(addr + i)
            bv = evaluate(byte, model, snapshots) if byte is not None else 0
            value |= (bv & 0xFF) << (8 * i)
        return value
    raise ExprError(f"cannot evaluate {e!r}")


def syntactic_syms(exprs: Iterable[Expr]) -> dict:
    """Collect the Sym nodes appearing syntactically in `exprs`, by name."""
    out: dict = {}
    stack = list(exprs)
    while stack:
        e = stack.pop()
        if isinstance(e, Sym):
            out.setdefault(e.name, e)
        elif isinstance(e, UnOp):
            stack.append(e.a)
        elif isinstance(e, BinOp):
            stack.extend((e.a, e.b))
        elif isinstance(e, Ite):
            stack.extend((e.cond, e.a, e.b))
        elif isinstance(e, MemRead):
            stack.append(e.addr)
    return out


def to_str(e: Expr) -> str:
    """Stable human-readable prefix printer used in reports."""
    if isinstance(e, Const):
        return f"(const {e.value} w{e.width})"
    if isinstance(e, Sym):
        tag = " secret" if e.taint.secret else ""
        return f"(sym {e.name} w{e.width}{tag})"
    if isinstance(e, UnOp):
        return f"({e.op} {to_str(e.a)} w{e.width})"
    if isinstance(e, BinOp):
        return f"({e.op} {to_str(e.a)} {to_str(e.b)})"
    if isinstance(e, Ite):
        return f"(ite {to_str(e.cond)} {to_str(e.a)} {to_str(e.b)})"
    if isinstance(e, MemRead):
        return f"(mem v{e.version} {to_str(e.addr)} w{e.width})"
    raise ExprError(f"cannot print {e!r}")
