from __future__ import annotations

import time

import numpy as np
import pytest

from camo.equiv import check_equivalence
from camo.errors import CamoError, PassError
from camo.interp import OutOfFuel, Returned, run_function
from camo.ir.model import BasicBlock, BinOp, GlobalVar, IrFunction, IrModule, NameGen, Ret, Switch
from camo.ir.parser import parse_module
from camo.ir.printer import print_module
from camo.ir.types import I1, I32, ConstInt, IntType, LocalRef
from camo.ir.validate import validate
from camo.passes import pipeline
from camo.passes.bogus import insert_bogus_flow
from camo.passes.config import ObfConfig, PassContext
from camo.passes.flatten import draw_state_ids, flatten
from camo.passes.predicates import FAMILIES, Truth, build_predicate
from camo.passes.split import split_blocks
from camo.passes.substitution import RULES, add_via_neg, substitute_instructions
from camo.rng import SplitMix64

from conftest import corpus_files, flattening_violations, load

I8 = IntType(8)

STRAIGHT = """
define i32 @mix(i32 %a, i32 %b) {
entry:
  %s = add i32 %a, %b
  %t = mul i32 %s, 3
  %u = xor i32 %t, %a
  %v = sub i32 %u, %b
  ret i32 %v
}
"""

DIAMOND = """
define i32 @pick(i1 %c, i32 %a, i32 %b) {
entry:
  br i1 %c, label %left, label %right
left:
  %x = add i32 %a, 1
  br label %join
right:
  %y = mul i32 %b, 2
  br label %join
join:
  %r = phi i32 [ %x, %left ], [ %y, %right ]
  ret i32 %r
}
"""


def cfg_for(passes: str, seed: int = 1, **kw) -> ObfConfig:
    return ObfConfig(seed=seed, pass_list=tuple(p for p in passes.split(",") if p), **kw)


# --- substitution -----------------------------------------------------------------------

_NP_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "and": np.bitwise_and,
    "or": np.bitwise_or,
    "xor": np.bitwise_xor,
}


def _eval_chain(insts, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Evaluate an i8 BinOp chain over whole operand arrays at once."""
    env = {"a": a, "b": b}

    def val(v):
        if isinstance(v, LocalRef):
            return env[v.name]
        return np.uint8(v.value & 0xFF)

    for inst in insts:
        assert isinstance(inst, BinOp) and inst.ty == I8
        env[inst.result] = _NP_OPS[inst.op](val(inst.lhs), val(inst.rhs)).astype(np.uint8)
    return env["r"]


def _all_rules():
    return [(op, rule) for op, rules in RULES.items() for rule in rules]


def test_substitution_rules_are_exhaustively_sound_at_8_bits():
    grid = np.arange(256, dtype=np.uint8)
    a, b = (x.ravel() for x in np.meshgrid(grid, grid, indexing="ij"))
    assert a.size == 65536
    start = time.perf_counter()
    for op, rule in _all_rules():
        names = NameGen({"a", "b", "r"})
        chain = rule("r", I8, LocalRef("a"), LocalRef("b"), lambda: names.fresh("t"))
        got = _eval_chain(chain, a, b)
        want = _NP_OPS[op](a, b).astype(np.uint8)
        assert int(np.count_nonzero(got != want)) == 0, rule.__name__
    assert time.perf_counter() - start < 2.0


def test_add_rewrites_through_a_negation():
    names = NameGen({"a", "b", "sum"})
    chain = add_via_neg("sum", I32, LocalRef("a"), LocalRef("b"), lambda: names.fresh("sum"))
    assert [(i.op, i.lhs, i.rhs) for i in chain] == [
        ("sub", ConstInt(I32, 0), LocalRef("b")),
        ("sub", LocalRef("a"), LocalRef(chain[0].result)),
    ]
    assert chain[-1].result == "sum"


def test_every_rule_ends_by_defining_the_original_result():
    for _, rule in _all_rules():
        names = NameGen({"a", "b", "r"})
        chain = rule("r", I32, LocalRef("a"), LocalRef("b"), lambda: names.fresh("t"))
        assert chain[-1].result == "r"
        assert len({i.result for i in chain}) == len(chain)


def test_substitution_without_eligible_ops_is_identity():
    m = load("shifts.ll")
    for fn in m.defined_functions():
        if any(isinstance(i, BinOp) and i.op in RULES for b in fn.blocks for i in b.body):
            continue
        ctx = PassContext(module=m)
        assert substitute_instructions(fn, cfg_for("sub"), SplitMix64(1), ctx) == fn
        assert ctx.stats.instructions_substituted == 0


def test_substitution_counts_and_preserves():
    m = parse_module(STRAIGHT)
    ctx = PassContext(module=m)
    fn = substitute_instructions(m.function("mix"), cfg_for("sub"), SplitMix64(3), ctx)
    assert ctx.stats.instructions_substituted == 3
    out = m.replace_function(fn)
    assert validate(out) == []
    assert check_equivalence(m, out, "mix").equivalent


def test_substitution_rounds_compound():
    m = parse_module(STRAIGHT)
    one = substitute_instructions(m.function("mix"), cfg_for("sub", subst_rounds=1), SplitMix64(3))
    two = substitute_instructions(m.function("mix"), cfg_for("sub", subst_rounds=2), SplitMix64(3))
    assert len(two.entry.body) > len(one.entry.body)
    assert check_equivalence(m, m.replace_function(two), "mix").equivalent


# --- opaque predicates ------------------------------------------------------------------


def _predicate_module(family: str, gx: int, gy: int, gg: int) -> tuple[IrModule, Truth]:
    pred = build_predicate(family, NameGen(set()), {"g": "g", "x": "x", "y": "y"})
    fn = IrFunction("p", I1, (), (BasicBlock("entry", (), pred.instructions, Ret(I1, LocalRef(pred.result))),))
    gvars = tuple(GlobalVar(n, I32, ConstInt(I32, v)) for n, v in (("x", gx), ("y", gy), ("g", gg)))
    return IrModule(gvars, (fn,)), pred.truth


@pytest.mark.parametrize("family", FAMILIES)
def test_predicates_hold_for_random_global_states(family):
    rng = SplitMix64(2024)
    for i in range(256):
        if i < 4:
            gx, gy, gg = [(0, 0, 0), (-1, -1, -1), (7, 7, 2**31 - 1), (5, 6, -(2**31))][i]
        else:
            gx, gy, gg = (rng.next_u32() - 2**31 for _ in range(3))
        m, truth = _predicate_module(family, gx, gy, gg)
        want = 1 if truth is Truth.ALWAYS_TRUE else 0
        assert run_function(m, "p", []).outcome == Returned(want), (gx, gy, gg)


def test_families_cover_both_truth_values():
    truths = {build_predicate(f, NameGen(set()), {"g": "g", "x": "x", "y": "y"}).truth for f in FAMILIES}
    assert truths == {Truth.ALWAYS_TRUE, Truth.ALWAYS_FALSE}


# --- bogus control flow -----------------------------------------------------------------


def test_bcf_probability_zero_is_identity():
    m = load("gcd_loop.ll")
    out, report = pipeline.run_pipeline(m, cfg_for("bcf", bcf_probability=0.0))
    assert print_module(out) == print_module(m)
    assert report.passes["bcf"].predicates_inserted == 0


def test_bcf_inserts_dead_junk_blocks():
    m = load("nested_loops.ll")
    out, report = pipeline.run_pipeline(m, cfg_for("bcf", seed=7, bcf_probability=0.3))
    assert report.passes["bcf"].predicates_inserted > 0
    for fn in m.defined_functions():
        junk = report.junk_blocks.get(fn.name, [])
        rep = check_equivalence(m, out, fn.name, junk_blocks=junk)
        assert rep.equivalent
        assert all(hits == 0 for hits in rep.coverage.values())


def test_bcf_always_guards_every_block():
    m = parse_module(DIAMOND)
    ctx = PassContext(module=m)
    fn = insert_bogus_flow(m.function("pick"), cfg_for("bcf", bcf_probability=1.0), SplitMix64(5), ctx)
    assert ctx.stats.predicates_inserted == 4
    assert len(ctx.junk_blocks) == 4
    assert all(label in fn.labels() for label in ctx.junk_blocks)


# --- split ------------------------------------------------------------------------------


def test_split_four_instructions_into_two_blocks():
    m = parse_module(STRAIGHT)
    ctx = PassContext(module=m)
    fn = split_blocks(m.function("mix"), cfg_for("split", split_chunk=2), ctx=ctx)
    assert [len(b.body) for b in fn.blocks] == [2, 2]
    assert fn.blocks[0].label == "entry"
    assert ctx.stats.blocks_split == 1
    assert check_equivalence(m, m.replace_function(fn), "mix").equivalent


def test_split_leaves_short_blocks_alone():
    m = load("calculate_printf.ll")
    fn = m.function("calculate")
    assert len(fn.entry.body) == 1
    assert split_blocks(fn, cfg_for("split", split_chunk=1)) == fn


def test_split_relabels_successor_phis():
    m = parse_module(DIAMOND.replace("%x = add i32 %a, 1", "%x0 = add i32 %a, 1\n  %x = add i32 %x0, 1"))
    fn = split_blocks(m.function("pick"), cfg_for("split", split_chunk=1), ctx=PassContext(module=m))
    join = fn.block("join")
    incoming = [lbl for _, lbl in join.phis[0].incoming]
    assert "left" not in incoming and all(lbl in fn.labels() for lbl in incoming)
    assert check_equivalence(m, m.replace_function(fn), "pick").equivalent


# --- flatten ----------------------------------------------------------------------------


def test_flatten_skips_single_block_functions():
    m = parse_module(STRAIGHT)
    ctx = PassContext(module=m)
    assert flatten(m.function("mix"), cfg_for("flatten"), SplitMix64(1), ctx) == m.function("mix")
    assert ctx.stats.states_assigned == 0


def test_flatten_diamond_structure():
    m = parse_module(DIAMOND)
    before = m.function("pick")
    after = flatten(before, cfg_for("flatten"), SplitMix64(1), PassContext(module=m))
    switches = [b for b in after.blocks if isinstance(b.term, Switch)]
    assert len(switches) == 1 and len(switches[0].term.cases) == 4
    assert flattening_violations(before, after) == []
    assert check_equivalence(m, m.replace_function(after), "pick").equivalent


IF_ELSE = """
define i32 @sign(i32 %a) {
entry:
  %neg = icmp slt i32 %a, 0
  br i1 %neg, label %minus, label %plus
minus:
  ret i32 -1
plus:
  ret i32 1
}
"""


def test_flatten_three_block_if_else_has_three_cases():
    m = parse_module(IF_ELSE)
    before = m.function("sign")
    after = flatten(before, cfg_for("flatten"), SplitMix64(1), PassContext(module=m))
    (dispatch,) = [b for b in after.blocks if isinstance(b.term, Switch)]
    assert len(dispatch.term.cases) == 3
    originals = set(before.labels())
    for b in after.blocks:
        assert not originals & set(b.term.successors()) or b is dispatch
    assert check_equivalence(m, m.replace_function(after), "sign").equivalent


def test_flatten_loop_is_equivalent_but_slower():
    m = load("countdown_loop.ll")
    out, report = pipeline.run_pipeline(m, cfg_for("flatten"))
    assert report.flattened == ["countdown"]
    assert check_equivalence(m, out, "countdown").equivalent
    a, b = run_function(m, "countdown", [10]), run_function(out, "countdown", [10])
    assert a.outcome == b.outcome == Returned(55)
    assert b.steps > a.steps


def test_state_ids_are_distinct_i32():
    labels = [f"b{i}" for i in range(500)]
    ids = draw_state_ids(labels, SplitMix64(11))
    assert len(set(ids.values())) == 500
    assert all(-(2**31) <= v < 2**31 for v in ids.values())


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_flatten_structure_on_corpus(path):
    m = parse_module(path.read_text())
    for fn in m.defined_functions():
        after = flatten(fn, cfg_for("flatten"), SplitMix64(1), PassContext(module=m))
        if len(fn.blocks) < 2:
            assert after == fn
        else:
            assert flattening_violations(fn, after) == []


# --- pipeline ---------------------------------------------------------------------------


def test_empty_pass_list_is_identity():
    m = load("switch_grade.ll")
    out, report = pipeline.run_pipeline(m, cfg_for(""))
    assert out == m and report.passes == {}


def test_pipeline_is_deterministic_per_seed():
    m = load("gcd_loop.ll")
    full = ObfConfig.all_passes(seed=9)
    a, ra = pipeline.run_pipeline(m, full)
    b, rb = pipeline.run_pipeline(m, full)
    c, _ = pipeline.run_pipeline(m, ObfConfig.all_passes(seed=10))
    assert print_module(a) == print_module(b)
    assert ra.to_dict() == rb.to_dict()
    assert print_module(a) != print_module(c)


def test_function_order_does_not_change_output():
    m = load("calls_helper.ll")
    flipped = IrModule(m.globals, tuple(reversed(m.functions)))
    a, _ = pipeline.run_pipeline(m, ObfConfig.all_passes(seed=4))
    b, _ = pipeline.run_pipeline(flipped, ObfConfig.all_passes(seed=4))
    assert {f.name: f for f in a.functions} == {f.name: f for f in b.functions}


def test_pass_failure_names_pass_and_function(monkeypatch):
    def boom(fn, cfg, rng, ctx):
        raise CamoError("synthetic failure")

    monkeypatch.setitem(pipeline.PASSES, "split", boom)
    with pytest.raises(PassError) as info:
        pipeline.run_pipeline(load("gcd_loop.ll"), ObfConfig.all_passes(seed=1))
    assert info.value.pass_name == "split"
    assert info.value.function in {f.name for f in load("gcd_loop.ll").defined_functions()}


def test_calculate_end_to_end():
    m = load("calculate_printf.ll")
    out, report = pipeline.run_pipeline(m, ObfConfig.all_passes(seed=1, bcf_probability=1.0, split_chunk=1))
    assert validate(out) == []
    assert parse_module(print_module(out)) == out
    assert report.passes["sub"].instructions_substituted >= 1
    assert "calculate" in report.flattened
    assert run_function(out, "calculate", [5, 3]).outcome == Returned(8)
    assert run_function(out, "main", []).events == run_function(m, "main", []).events


@pytest.mark.parametrize("bad", [{"bcf_probability": 1.5}, {"split_chunk": 0}, {"seed": -1}])
def test_config_rejects_out_of_range(bad):
    kw = {"seed": 1} | bad
    with pytest.raises(ValueError):
        ObfConfig(**kw)


def test_parse_pass_list():
    assert pipeline.parse_pass_list("split, sub") == ("split", "sub")
    assert pipeline.canonical_order(("split", "sub")) == ("sub", "split")
    with pytest.raises(ValueError):
        pipeline.parse_pass_list("sub,sub")
    with pytest.raises(ValueError):
        pipeline.parse_pass_list("inline")


def test_obfuscated_loop_still_terminates_within_budget():
    m = load("collatz_steps.ll")
    out, _ = pipeline.run_pipeline(m, ObfConfig.all_passes(seed=2))
    fn = m.defined_functions()[0].name
    r = run_function(out, fn, [27], fuel=10**6)
    assert not isinstance(r.outcome, OutOfFuel)
    assert r.outcome == run_function(m, fn, [27]).outcome
