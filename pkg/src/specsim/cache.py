"""Set-associative LRU cache model and the solver-backed leak check.

Speculative accesses update the model and are never rolled back; the
lingering footprint is exactly what a cache-timing adversary observes.
Leakage is judged at cache-line granularity (Flush+Reload) by default,
or at set granularity (Prime+Probe) via the config flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .expr import Const, Expr, Model, const, evaluate, mk_binop
from .solver import BudgetExceeded, Query, find_leak_pair


@dataclass(frozen=True)
class CacheConfig:
    line_size: int = 64
    sets: int = 64
    ways: int = 4
    granularity: str = "line"  # "line" (Flush+Reload) or "set" (Prime+Probe)

    def __post_init__(self):
        for name in ("line_size", "sets"):
            v = getattr(self, name)
            if v <= 0 or v & (v - 1):
                raise ValueError(f"{name} must be a positive power of two")
        if self.ways < 1:
            raise ValueError("ways must be >= 1")
        if self.granularity not in ("line", "set"):
            raise ValueError(f"unknown granularity {self.granularity!r}")


@dataclass(frozen=True)
class AccessResult:
    hit: bool
    evicted: Optional[int]  # line id of the victim, if any


class CacheState:
    """Per-set resident line ids, most recently used first."""

    def __init__(self, cfg: CacheConfig):
        self.cfg = cfg
        self.sets: List[List[int]] = [[] for _ in range(cfg.sets)]

    def access(self, addr: int) -> AccessResult:
        line = addr // self.cfg.line_size
        entries = self.sets[line % self.cfg.sets]
        if line in entries:
            entries.remove(line)
            entries.insert(0, line)
            return AccessResult(hit=True, evicted=None)
        entries.insert(0, line)
        evicted = entries.pop() if len(entries) > self.cfg.ways else None
        return AccessResult(hit=False, evicted=evicted)

    def resident_lines(self) -> int:
        return sum(len(entries) for entries in self.sets)

    def clone(self) -> "CacheState":
        c = CacheState.__new__(CacheState)
        c.cfg = self.cfg
        c.sets = [list(entries) for entries in self.sets]
        return c

    def __eq__(self, other) -> bool:
        return (isinstance(other, CacheState) and self.cfg == other.cfg
                and self.sets == other.sets)


@dataclass(frozen=True)
class LeakResult:
    status: str  # "leak", "none", or "unknown"
    witness: Optional[Tuple[Model, Model]] = None
    line_indices: Optional[Tuple[int, int]] = None
    observable: Optional[Expr] = None  # what the witness pair distinguishes

    @property
    def positive(self) -> bool:
        return self.status == "leak"


NO_LEAK = LeakResult("none")
UNKNOWN_LEAK = LeakResult("unknown")


def observable_expr(addr_expr: Expr, cfg: CacheConfig) -> Expr:
    """What the adversary can distinguish about an access at this address."""
    line = mk_binop("lshr", addr_expr,
                    const(cfg.line_size.bit_length() - 1, addr_expr.width))
    if cfg.granularity == "set":
        return mk_binop("and", line, const(cfg.sets - 1, line.width))
    return line


def leak_check(addr_expr: Expr, path_cond, snapshots, cfg: CacheConfig,
               bit_budget: int = 20) -> LeakResult:
    """Can two secrets, indistinguishable on public inputs, leave different
    cache footprints through this access?  Delegates to the enumeration
    oracle; budget overruns degrade to "unknown" rather than a verdict."""
    if not addr_expr.taint.secret:
        return NO_LEAK
    obs = observable_expr(addr_expr, cfg)
    if isinstance(obs, Const):
        return NO_LEAK
    q = Query(tuple(path_cond), bit_budget, snapshots)
    try:
        pair = find_leak_pair(q, obs)
    except BudgetExceeded:
        return UNKNOWN_LEAK
    if pair is None:
        return NO_LEAK
    m1, m2 = pair
    i1 = evaluate(obs, _total(m1), snapshots)
    i2 = evaluate(obs, _total(m2), snapshots)
    assert i1 != i2, "leak witness must map to distinct observables"
    return LeakResult("leak", witness=pair, line_indices=(i1, i2),
                      observable=obs)


def _total(model: Model) -> Model:
    """Witness models may omit symbols that only default to zero."""
    from .solver import _ProbeModel
    return _ProbeModel(model.assignment, {})
