"""Branch prediction logic.

Two-level global-history direction predictor (n-bit BHR indexing a table
of 2^n two-bit saturating counters), a set-associative tagged BTB, and a
static BTFNT fallback, composable into one configuration.  Named presets
model real processor families.

Conventions:
  - counters: 0..3, predict taken iff >= 2; BHR bit 0 is the most recent
    outcome and shifts left as branches resolve.
  - BTB indexing: set = pc mod sets; tag = the next tag_bits bits of the
    pc above the set bits.  pcs are instruction indices.
  - update() is called only for non-speculative branch resolutions; a
    speculative clone updates its BHR with predicted outcomes while the
    PHT and BTB stay frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple


@dataclass(frozen=True)
class PredictorConfig:
    pht_bits: Optional[int] = None
    btb_sets: Optional[int] = None
    btb_ways: int = 1
    btb_tag_bits: int = 4
    window: int = 16
    fallback: str = "none"  # "none" (predict not-taken) or "btfnt"
    init_counter: int = 2   # weakly taken; untrained predictors speculate
    preset_name: Optional[str] = None

    def __post_init__(self):
        if self.pht_bits is not None and not 0 < self.pht_bits <= 16:
            raise ValueError("pht_bits must be in 1..16")
        if self.btb_sets is not None and self.btb_sets & (self.btb_sets - 1):
            raise ValueError("btb_sets must be a power of two")
        if self.fallback not in ("none", "btfnt"):
            raise ValueError(f"unknown fallback {self.fallback!r}")
        if not 0 <= self.init_counter <= 3:
            raise ValueError("init_counter must be in 0..3")
        if self.window < 0:
            raise ValueError("window must be >= 0")


PRESETS = {
    "cortex-a53": PredictorConfig(pht_bits=12, btb_sets=256, window=32,
                                  preset_name="cortex-a53"),
    "cortex-a7": PredictorConfig(pht_bits=8, btb_sets=8, window=16,
                                 preset_name="cortex-a7"),
    "pentium4": PredictorConfig(btb_sets=4096, window=40, fallback="btfnt",
                                preset_name="pentium4"),
}


def preset(name: str) -> PredictorConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; "
                         f"known: {', '.join(sorted(PRESETS))}") from None


class TwoLevel:
    """n-bit BHR plus 2^n-entry PHT of 2-bit saturating counters."""

    def __init__(self, n: int, init_counter: int = 2):
        self.n = n
        self.bhr = 0
        self.pht = [init_counter] * (1 << n)

    def predict(self) -> bool:
        return self.pht[self.bhr] >= 2

    def update(self, taken: bool) -> None:
        counter = self.pht[self.bhr]
        counter = min(3, counter + 1) if taken else max(0, counter - 1)
        self.pht[self.bhr] = counter
        self.shift(taken)

    def shift(self, taken: bool) -> None:
        self.bhr = ((self.bhr << 1) | int(taken)) & ((1 << self.n) - 1)

    def clone(self) -> "TwoLevel":
        c = TwoLevel.__new__(TwoLevel)
        c.n = self.n
        c.bhr = self.bhr
        c.pht = list(self.pht)
        return c

    def __eq__(self, other) -> bool:
        return (isinstance(other, TwoLevel) and self.n == other.n
                and self.bhr == other.bhr and self.pht == other.pht)


class Btb:
    """Set-associative tagged BTB with LRU replacement.

    Each set is a list of (tag, target) pairs, most recently used first.
    A lookup hit refreshes recency; installs happen only at resolution.
    """

    def __init__(self, sets: int, ways: int = 1, tag_bits: int = 4):
        self.num_sets = sets
        self.ways = ways
        self.tag_bits = tag_bits
        self.set_bits = sets.bit_length() - 1
        self.sets: List[List[Tuple[int, int]]] = [[] for _ in range(sets)]

    def _index(self, pc: int) -> Tuple[int, int]:
        s = pc % self.num_sets
        tag = (pc >> self.set_bits) & ((1 << self.tag_bits) - 1)
        return s, tag

    def lookup(self, pc: int) -> Optional[int]:
        s, tag = self._index(pc)
        entries = self.sets[s]
        for i, (t, target) in enumerate(entries):
            if t == tag:
                entries.insert(0, entries.pop(i))
                return target
        return None

    def install(self, pc: int, target: int) -> None:
        s, tag = self._index(pc)
        entries = self.sets[s]
        for i, (t, _) in enumerate(entries):
            if t == tag:
                entries.pop(i)
                break
        entries.insert(0, (tag, target))
        del entries[self.ways:]

    def clone(self) -> "Btb":
        c = Btb.__new__(Btb)
        c.num_sets = self.num_sets
        c.ways = self.ways
        c.tag_bits = self.tag_bits
        c.set_bits = self.set_bits
        c.sets = [list(entries) for entries in self.sets]
        return c

    def __eq__(self, other) -> bool:
        return (isinstance(other, Btb) and self.num_sets == other.num_sets
                and self.ways == other.ways and self.tag_bits == other.tag_bits
                and self.sets == other.sets)


class PredictorState:
    """Composite predictor owned by exactly one execution path."""

    def __init__(self, cfg: PredictorConfig):
        self.cfg = cfg
        self.two_level = (TwoLevel(cfg.pht_bits, cfg.init_counter)
                          if cfg.pht_bits is not None else None)
        self.btb = (Btb(cfg.btb_sets, cfg.btb_ways, cfg.btb_tag_bits)
                    if cfg.btb_sets is not None else None)

    def _static_fallback(self, pc: int, taken_target: int,
                         fallthrough: int) -> Tuple[bool, int]:
        if self.cfg.fallback == "btfnt" and taken_target < pc:
            return True, taken_target
        return False, fallthrough

    def predict_conditional(self, pc: int, taken_target: int,
                            fallthrough: int) -> Tuple[bool, int]:
        """Predicted (direction, next pc) for the conditional branch at pc.

        With a two-level predictor the direction comes from the counters;
        the target of a predicted-taken branch comes from the BTB when it
        hits (possibly a stale or aliased target) and otherwise from the
        statically known taken edge.  BTB-primary configurations predict
        taken-to-stored-target on a hit and fall back to the static policy
        on a miss.
        """
        if self.two_level is not None:
            if not self.two_level.predict():
                return False, fallthrough
            stored = self.btb.lookup(pc) if self.btb is not None else None
            return True, stored if stored is not None else taken_target
        if self.btb is not None:
            stored = self.btb.lookup(pc)
            if stored is not None:
                return True, stored
        return self._static_fallback(pc, taken_target, fallthrough)

    def predict_direction(self, pc: int, taken_target: int,
                          fallthrough: int) -> bool:
        return self.predict_conditional(pc, taken_target, fallthrough)[0]

    def predict_target(self, pc: int) -> Optional[int]:
        """Predicted target for an indirect call site; None means no prediction."""
        if self.btb is None:
            return None
        return self.btb.lookup(pc)

    def update(self, pc: int, taken: bool, target: Optional[int],
               conditional: bool = True) -> None:
        """Non-speculative resolution: train counters/BHR and install the BTB
        entry of a taken branch.  Not-taken resolutions leave the BTB alone."""
        if conditional and self.two_level is not None:
            self.two_level.update(taken)
        if self.btb is not None and taken and target is not None:
            self.btb.install(pc, target)

    def spec_note_direction(self, taken: bool) -> None:
        """Shadow-BHR update with a *predicted* outcome during speculation."""
        if self.two_level is not None:
            self.two_level.shift(taken)

    def clone(self) -> "PredictorState":
        c = PredictorState.__new__(PredictorState)
        c.cfg = self.cfg
        c.two_level = self.two_level.clone() if self.two_level else None
        c.btb = self.btb.clone() if self.btb else None
        return c

    def __eq__(self, other) -> bool:
        return (isinstance(other, PredictorState) and self.cfg == other.cfg
                and self.two_level == other.two_level and self.btb == other.btb)
