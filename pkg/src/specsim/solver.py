"""Satisfiability oracle over path conditions and leak queries.

Decided by bounded brute-force enumeration of symbolic inputs.  Symbols
referenced only through memory snapshots (a symbolic load can touch
secret bytes that do not appear syntactically in the query) are
discovered on demand: evaluation under a probing model records every
symbol it reads, and enumeration restarts with the enlarged set until a
fixpoint is reached.  The per-stage bit total is checked against the
budget; exceeding it raises, it is never truncated silently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .expr import (Expr, Model, Snapshots, Sym, evaluate, mask,
                   syntactic_syms)


class BudgetExceeded(Exception):
    """A query needed more symbolic bits than the configured budget."""


@dataclass(frozen=True)
class Query:
    constraints: Tuple[Expr, ...]
    bit_budget: int = 20
    snapshots: Snapshots = field(default_factory=dict)


class _ProbeModel(Model):
    """Model that defaults missing symbols to 0 and records every lookup."""

    def __init__(self, assignment: Mapping[str, int], seen: Dict[str, Sym]):
        super().__init__(assignment)
        self.seen = seen

    def lookup(self, s: Sym) -> int:
        self.seen.setdefault(s.name, s)
        return self.assignment.get(s.name, 0) & mask(s.width)


def _bits(syms: Mapping[str, Sym]) -> int:
    return sum(s.width for s in syms.values())


def _assignments(syms: Mapping[str, Sym], budget: int):
    """Lexicographic enumeration: sorted by name, values ascending."""
    if _bits(syms) > budget:
        raise BudgetExceeded(f"{_bits(syms)} symbolic bits exceed budget {budget}")
    names = sorted(syms)
    ranges = [range(1 << syms[n].width) for n in names]
    for values in itertools.product(*ranges):
        yield dict(zip(names, values))


def _truthy(exprs: Sequence[Expr], model: Model, snapshots: Snapshots) -> bool:
    return all(evaluate(e, model, snapshots) != 0 for e in exprs)


def is_sat(q: Query) -> Optional[Model]:
    """Return the first satisfying Model in enumeration order, or None.

    A returned witness assigns every symbol its evaluation touched;
    symbols discovered mid-enumeration default to 0 in the witness.
    """
    syms = syntactic_syms(q.constraints)
    while True:
        seen: Dict[str, Sym] = {}
        for assignment in _assignments(syms, q.bit_budget):
            probe = _ProbeModel(assignment, seen)
            if _truthy(q.constraints, probe, q.snapshots):
                full = dict(assignment)
                for name in seen:
                    full.setdefault(name, 0)
                return Model(full)
        if set(seen) - set(syms):
            syms = {**syms, **seen}
            continue
        return None


def find_leak_pair(q: Query, observable: Expr) -> Optional[Tuple[Model, Model]]:
    """Find two models satisfying `q` that agree on all non-secret symbols,
    differ in secret assignments, and give distinct values of `observable`.

    Returns None when no such pair exists, i.e. the observable reveals
    nothing about the secrets within the enumerated space.
    """
    exprs = list(q.constraints) + [observable]
    known = syntactic_syms(exprs)
    public = {n: s for n, s in known.items() if not s.taint.secret}
    secret = {n: s for n, s in known.items() if s.taint.secret}

    while True:
        new_public: Dict[str, Sym] = {}
        result = None
        for pub_assignment in _assignments(public, q.bit_budget):
            pair = _leak_pair_for_public(q, observable, pub_assignment,
                                         dict(secret), public, new_public)
            if pair is not None:
                result = pair
                break
        if result is not None:
            return result
        if new_public:
            public = {**public, **new_public}
            continue
        return None


def _leak_pair_for_public(q: Query, observable: Expr,
                          pub_assignment: Dict[str, int],
                          secret: Dict[str, Sym],
                          public: Dict[str, Sym],
                          new_public: Dict[str, Sym]):
    """Inner enumeration over secret symbols for one fixed public assignment."""
    pub_bits = sum(s.width for s in public.values())
    while True:
        seen: Dict[str, Sym] = {}
        first: Optional[Tuple[int, Dict[str, int]]] = None
        for sec_assignment in _assignments(secret, q.bit_budget - pub_bits):
            probe = _ProbeModel({**pub_assignment, **sec_assignment}, seen)
            if not _truthy(q.constraints, probe, q.snapshots):
                continue
            value = evaluate(observable, probe, q.snapshots)
            if first is None:
                first = (value, sec_assignment)
            elif value != first[0]:
                defaults = {n: 0 for n in seen
                            if n not in pub_assignment and n not in sec_assignment}
                m1 = Model({**defaults, **pub_assignment, **first[1]})
                m2 = Model({**defaults, **pub_assignment, **sec_assignment})
                probe1 = _ProbeModel(m1.assignment, {})
                probe2 = _ProbeModel(m2.assignment, {})
                v1 = evaluate(observable, probe1, q.snapshots)
                v2 = evaluate(observable, probe2, q.snapshots)
                assert v1 != v2, "leak pair must yield distinct observables"
                return m1, m2
        new_secret = {n: s for n, s in seen.items()
                      if s.taint.secret and n not in secret}
        for n, s in seen.items():
            if not s.taint.secret and n not in public:
                new_public.setdefault(n, s)
        if new_secret:
            # enumerate again with the secrets this public assignment touches
            secret = {**secret, **new_secret}
            continue
        # newly found public symbols are handled by the caller's restart
        return None
