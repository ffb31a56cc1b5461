"""Pattern-detection monitor: a directed-path automaton with token propagation.

A pattern is a chain Start -> Node_1 -> ... -> Node_n.  Tokens are copied
(never moved) forward when an observed event satisfies the next node's
properties; a token reaching the final node is a match, reconstructed
through predecessor links.  Patterns load from JSON:

    {"name": str, "nodes": [{"instruction"?: str, "isSpeculative"?: bool,
      "isConst"?: bool, "isSensitive"?: bool, "checkCacheState"?: bool,
      "startTTL"?: int, "stopTTL"?: bool}, ...]}

Note on isConst: true matches events with NO symbolic operand.  Patterns
that demand symbolic operands must say "isConst": false.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple


class PatternError(Exception):
    """Schema violation in a pattern file; message names the field path."""


@dataclass(frozen=True)
class NodeProps:
    instruction: Optional[str] = None
    is_speculative: Optional[bool] = None
    is_const: Optional[bool] = None
    is_sensitive: Optional[bool] = None
    check_cache_state: Optional[bool] = None
    start_ttl: Optional[int] = None
    stop_ttl: bool = False


@dataclass(frozen=True)
class MonitorSpec:
    name: str
    nodes: Tuple[NodeProps, ...]

    @property
    def uses_cache_state(self) -> bool:
        return any(np.check_cache_state is not None for np in self.nodes)


_JSON_FIELDS = {
    "instruction": ("instruction", str),
    "isSpeculative": ("is_speculative", bool),
    "isConst": ("is_const", bool),
    "isSensitive": ("is_sensitive", bool),
    "checkCacheState": ("check_cache_state", bool),
    "startTTL": ("start_ttl", int),
    "stopTTL": ("stop_ttl", bool),
}


def load_pattern(text: str) -> MonitorSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise PatternError(f"not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise PatternError("$: expected an object")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise PatternError("$.name: expected a non-empty string")
    raw_nodes = raw.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise PatternError("$.nodes: expected a non-empty list")
    unknown = set(raw) - {"name", "nodes"}
    if unknown:
        raise PatternError(f"$.{unknown.pop()}: unknown field")

    nodes: List[NodeProps] = []
    for i, raw_np in enumerate(raw_nodes):
        path = f"$.nodes[{i}]"
        if not isinstance(raw_np, dict):
            raise PatternError(f"{path}: expected an object")
        kwargs = {}
        for key, value in raw_np.items():
            if key not in _JSON_FIELDS:
                raise PatternError(f"{path}.{key}: unknown property")
            attr, typ = _JSON_FIELDS[key]
            if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
                raise PatternError(f"{path}.{key}: expected {typ.__name__}")
            kwargs[attr] = value
        if not kwargs:
            raise PatternError(f"{path}: at least one property required")
        np = NodeProps(**kwargs)
        if np.start_ttl is not None and np.stop_ttl:
            raise PatternError(f"{path}: startTTL and stopTTL are exclusive")
        if np.start_ttl is not None and np.start_ttl <= 0:
            raise PatternError(f"{path}.startTTL: must be positive")
        nodes.append(np)
    return MonitorSpec(name, tuple(nodes))


def load_pattern_file(path: str) -> MonitorSpec:
    with open(path, "r", encoding="utf-8") as f:
        return load_pattern(f.read())


def satisfies(np: NodeProps, event, cache_obs) -> bool:
    """Conjunction over the properties present on the node."""
    if np.instruction is not None and event.name != np.instruction:
        return False
    if np.is_speculative is not None and event.speculation != np.is_speculative:
        return False
    if np.is_const is not None and (not event.symbolic_access) != np.is_const:
        return False
    if np.is_sensitive is not None and event.secret_access != np.is_sensitive:
        return False
    if np.check_cache_state is not None:
        positive = cache_obs is not None and cache_obs.leak is not None \
            and cache_obs.leak.positive
        if positive != np.check_cache_state:
            return False
    return True


@dataclass(frozen=True)
class Token:
    id: int
    pid: Optional[int]
    inst: Optional[Tuple[int, str, bool]]  # (pc, name, speculative); None at Start
    ttl: int = -1  # -1: no counter running


@dataclass(frozen=True)
class Match:
    pattern: str
    chain: Tuple[Tuple[int, str, bool], ...]  # Node_1..Node_n instruction info


class MonitorInstance:
    """One live automaton; per path, survives speculation rollback."""

    def __init__(self, spec: MonitorSpec):
        self.spec = spec
        self._next_id = 1
        # index 0 is Start; it always holds the initial token
        self.node_tokens: List[List[Token]] = [[] for _ in range(len(spec.nodes) + 1)]
        self.node_tokens[0].append(Token(0, None, None))
        self._by_id: Dict[int, Token] = {0: self.node_tokens[0][0]}

    def observe(self, event, cache_obs=None) -> List[Match]:
        """Advance tokens for one (event, cache-state) observation.

        The sweep runs from the last node backwards so a single event
        advances any token by at most one node.  After transitions, every
        running TTL counter decrements; tokens expire at zero.
        """
        matches: List[Match] = []
        n = len(self.spec.nodes)
        for i in range(n - 1, -1, -1):
            np = self.spec.nodes[i]
            if not self.node_tokens[i]:
                continue
            if not satisfies(np, event, cache_obs):
                continue
            for src in self.node_tokens[i]:
                ttl = src.ttl
                if np.start_ttl is not None:
                    ttl = np.start_ttl
                elif np.stop_ttl:
                    ttl = -1
                tok = Token(self._next_id, src.id,
                            (event.pc, event.name, event.speculation), ttl)
                self._next_id += 1
                self._by_id[tok.id] = tok
                self.node_tokens[i + 1].append(tok)
                if i + 1 == n:
                    matches.append(Match(self.spec.name, self._chain(tok)))
        self._tick()
        return matches

    def _tick(self) -> None:
        # runs once per observed event; freshly created tokens count down too
        for node in self.node_tokens[1:]:
            kept: List[Token] = []
            for tok in node:
                if tok.ttl < 0:
                    kept.append(tok)
                    continue
                ttl = tok.ttl - 1
                if ttl == 0:
                    continue  # expired
                kept.append(Token(tok.id, tok.pid, tok.inst, ttl))
            node[:] = kept
            for tok in kept:
                self._by_id[tok.id] = tok

    def _chain(self, tok: Token) -> Tuple[Tuple[int, str, bool], ...]:
        chain = []
        cur: Optional[Token] = tok
        while cur is not None and cur.inst is not None:
            chain.append(cur.inst)
            cur = self._by_id.get(cur.pid) if cur.pid is not None else None
        return tuple(reversed(chain))

    def matched(self) -> bool:
        return bool(self.node_tokens[-1])

    def clone(self) -> "MonitorInstance":
        c = MonitorInstance.__new__(MonitorInstance)
        c.spec = self.spec
        c._next_id = self._next_id
        c.node_tokens = [list(node) for node in self.node_tokens]
        c._by_id = dict(self._by_id)
        return c


def verdict(any_match: bool, any_unknown: bool) -> str:
    """Aggregate run verdict: no token ever reached a final node and no
    query overran its budget means the program is leakage-free."""
    if any_match:
        return "leak"
    if any_unknown:
        return "unknown"
    return "leakage-free"
