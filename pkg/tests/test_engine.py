"""Exploration engine: architectural semantics, forking, speculation
sandboxing, taint-aware events, and the baseline mode."""

import pytest

from conftest import load_fixture, load_pattern_fixture
from specsim import layout_regions, parse_program
from specsim.cache import CacheConfig
from specsim.engine import Engine, EngineError
from specsim.expr import Const
from specsim.predictor import PredictorConfig


def build(src, **kwargs):
    program = layout_regions(parse_program(src))
    return Engine(program, **kwargs)


def final_regs(result, index=0):
    """Registers of the index-th finished path, as a dict name -> Expr."""
    _key, _cond, fp = result.stats.path_summaries[index]
    return dict(fp[1])


class TestStraightLine:
    def test_const_arith(self):
        e = build("  const r1, 6\n  const r2, 7\n  mul r3, r1, r2\n  halt\n")
        r = e.run()
        assert r.stats.paths == 1
        r3 = final_regs(r)["r3"]
        assert isinstance(r3, Const) and r3.value == 42

    def test_store_load_roundtrip_w32(self):
        e = build("region m 64\n"
                  "  addrof r1, m\n"
                  "  const r2, 0xdeadbeef\n"
                  "  store r1, r2\n"
                  "  load r3, r1\n"
                  "  load.8 r4, r1\n"
                  "  halt\n")
        r = e.run()
        regs = final_regs(r)
        assert regs["r3"].value == 0xDEADBEEF
        assert regs["r4"].value == 0xEF  # little-endian low byte

    def test_region_init_visible_to_loads(self):
        e = build("region t 4 init=a1b2c3d4\n"
                  "  const r1, 0x1002\n  load.8 r2, r1\n  halt\n")
        assert final_regs(e.run())["r2"].value == 0xC3

    def test_secret_region_bytes_are_secret_symbols(self):
        e = build("region k 2 secret\n"
                  "  const r1, 0x1001\n  load.8 r2, r1\n  halt\n")
        v = final_regs(e.run())["r2"]
        assert v.taint.secret and v.name == "k[1]"

    def test_unset_register_is_an_error(self):
        e = build("  add r1, r1, r2\n  halt\n")
        with pytest.raises(EngineError):
            e.run()

    def test_unmapped_load_reads_zero_with_diagnostic(self):
        e = build("  const r1, 0x9000\n  load.8 r2, r1\n  halt\n")
        r = e.run()
        assert final_regs(r)["r2"].value == 0
        assert any("unmapped" in d for d in r.diagnostics)

    def test_symbolic_store_skipped_with_diagnostic(self):
        e = build("region m 16\n"
                  "  sym r1, a\n  const r2, 5\n  store.8 r1, r2\n  halt\n")
        r = e.run()
        assert any("symbolic store" in d for d in r.diagnostics)
        assert r.stats.paths == 1


class TestControlFlow:
    def test_symbolic_branch_forks_both_ways(self):
        e = build("  sym.8 r1, x\n  const r2, 10\n  lt r3, r1, r2\n"
                  "  br r3, a, b\na:\n  halt\nb:\n  halt\n")
        r = e.run()
        assert r.stats.paths == 2
        conds = {cond for _k, cond, _fp in r.stats.path_summaries}
        assert len(conds) == 2 and any("ne" in c for c in conds)

    def test_concrete_branch_takes_one_path(self):
        e = build("  const r1, 0\n  br r1, a, b\na:\n  halt\nb:\n  halt\n")
        r = e.run()
        assert r.stats.paths == 1
        assert r.stats.path_summaries[0][0] == ((1, False),)

    def test_infeasible_direction_pruned(self):
        e = build("  sym.8 r1, x\n  const r2, 0\n  lt r3, r1, r2\n"
                  "  br r3, a, b\na:\n  halt\nb:\n  halt\n")
        assert e.run().stats.paths == 1  # unsigned x < 0 is unsatisfiable

    def test_call_ret(self):
        e = build("  call f\n  const r9, 1\n  halt\nf:\n  const r1, 5\n  ret\n")
        r = e.run()
        assert r.stats.paths == 1 and final_regs(r)["r9"].value == 1

    def test_ret_past_stack_bottom_ends_path(self):
        e = build("  ret\n  halt\n")
        assert e.run().stats.paths == 1

    def test_icall_concrete_target(self):
        e = build("  addrof r1, f\n  icall r1\n  halt\nf:\n  const r2, 3\n  ret\n")
        r = e.run()
        assert final_regs(r)["r2"].value == 3

    def test_icall_symbolic_target_is_error(self):
        e = build("  sym r1, t\n  icall r1\n  halt\n")
        r = e.run()
        assert any(f.kind == "error" for f in r.findings)
        assert r.verdict == "unknown"


class TestSpeculation:
    CFG = PredictorConfig(pht_bits=1, window=16)

    def test_window_zero_spawns_nothing(self):
        e = Engine(load_fixture("v01.sir"),
                   PredictorConfig(pht_bits=1, window=0))
        assert e.run().stats.spec_traces == 0

    def test_window_bounds_trace_length(self):
        e = Engine(load_fixture("v01.sir"),
                   PredictorConfig(pht_bits=1, window=3))
        st = e.run().stats
        assert st.spec_traces == 1 and st.spec_instructions <= 3

    def test_architectural_state_identical_with_and_without_speculation(self):
        # rollback exactness, observed end to end: final per-path state and
        # path conditions match a speculation-disabled engine
        for name in ("v01.sir", "v02.sir", "v09.sir", "v2.sir"):
            spec = Engine(load_fixture(name), self.CFG).run()
            nospec = Engine(load_fixture(name), self.CFG,
                            no_speculation=True).run()
            assert spec.stats.path_summaries == nospec.stats.path_summaries

    def test_rollback_check_active_on_fixture_runs(self):
        e = Engine(load_fixture("v01.sir"), self.CFG, check_rollback=True)
        assert e.run().stats.spec_traces == 1  # and no EngineError raised

    def test_speculative_events_carry_value_taint(self):
        # the first gadget load has a public address but a secret value
        pattern = load_pattern_fixture("br-ld-ld.json")
        e = Engine(load_fixture("v01.sir"), self.CFG, patterns=[pattern])
        r = e.run()
        assert r.verdict == "leak"
        (finding,) = r.findings
        assert [pc for pc, _n, _s in finding.chain] == [4, 6, 11]
        assert finding.chain[1][2] and finding.chain[2][2]  # speculative loads

    def test_leak_witness_pair_attached(self):
        pattern = load_pattern_fixture("br-ld-ld.json")
        e = Engine(load_fixture("v01.sir"), self.CFG, patterns=[pattern])
        (finding,) = e.run().findings
        m1, m2 = finding.witness
        assert m1.assignment["x"] == m2.assignment["x"]
        assert finding.observable is not None

    def test_event_log_replayable(self):
        pattern = load_pattern_fixture("br-ld-ld.json")
        e = Engine(load_fixture("v01.sir"), self.CFG, patterns=[pattern])
        (finding,) = e.run().findings
        assert finding.event_log  # consumed by the replay acceptance check


class TestBaseline:
    def test_baseline_spawns_on_every_conditional(self):
        src = ("  const r1, 1\n  br r1, a, b\na:\n  halt\nb:\n  halt\n")
        e = build(src, predictor_cfg=PredictorConfig(pht_bits=1, window=8))
        assert e.run(baseline=True).stats.spec_traces == 1
        assert e.run().stats.spec_traces == 0  # predicted taken, was taken

    def test_baseline_ignores_indirect_calls(self):
        e = Engine(load_fixture("v2.sir"),
                   PredictorConfig(btb_sets=4, window=16))
        assert e.run(baseline=True).stats.spec_traces == 1  # just the br
        assert e.run().stats.spec_traces == 2

    def test_baseline_detects_fall_through_gadget(self):
        pattern = load_pattern_fixture("br-ld-ld.json")
        cfg = PredictorConfig(pht_bits=1, window=16)
        e = Engine(load_fixture("v02.sir"), cfg, patterns=[pattern])
        assert e.run(baseline=True).verdict == "leak"
        e2 = Engine(load_fixture("v02.sir"), cfg, patterns=[pattern])
        assert e2.run().verdict == "leakage-free"


class TestDeterminism:
    def test_repeated_runs_identical(self):
        pattern = load_pattern_fixture("br-ld-ld.json")
        cfg = PredictorConfig(pht_bits=4, window=32)

        def one():
            e = Engine(load_fixture("v09.sir"), cfg, patterns=[pattern])
            r = e.run()
            return ([f.to_dict() for f in r.findings], r.stats.paths,
                    r.stats.spec_traces, r.stats.trace_identities)

        assert one() == one()

    def test_step_api_matches_run(self):
        e = build("  const r1, 2\n  const r2, 3\n  add r3, r1, r2\n  halt\n")
        from specsim.cache import CacheState
        from specsim.engine import ExecState
        from specsim.predictor import PredictorState
        s = ExecState(0, PredictorState(e.predictor_cfg),
                      CacheState(e.cache_cfg), [])
        states = [s]
        while states:
            s = states[0]
            states = e.step(s)
        assert s.regs["r3"].value == 5
