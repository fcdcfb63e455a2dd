"""Bogus control flow: guard blocks with opaque predicates and dead clones.

A selected block ``L`` is rewritten into three blocks::

    L:      phis of L, opaque predicate, br pred, real, junk
    real:   original body and terminator
    junk:   mutated clone of the body plus filler, br L

The junk block loops back to the guard, so a static reader sees a cycle that
never runs.  The entry block cannot have predecessors, so there the guard is
a fresh block that the entry (now holding only its allocas) jumps to.
"""

from __future__ import annotations

from camo.ir.model import (
    Alloca,
    BasicBlock,
    BinOp,
    Br,
    CondBr,
    GlobalVar,
    ICmp,
    ICMP_PREDS,
    Instruction,
    IrFunction,
    IrModule,
    NameGen,
    Phi,
)
from camo.ir.types import I32, ConstInt, LocalRef, Value
from camo.ir.validate import check_function
from camo.passes.config import ObfConfig, PassContext
from camo.passes.predicates import FAMILIES, Truth, build_predicate
from camo.rng import SplitMix64

GLOBAL_ROLES = ("x", "y", "g")
_SWAPPABLE = ("add", "sub", "mul", "and", "or", "xor")


def choose_opaque_globals(m: IrModule) -> dict[str, str]:
    """Pick module-unique names for the predicate globals."""
    names = NameGen({g.name for g in m.globals} | {f.name for f in m.functions})
    return {role: names.claim(role) for role in GLOBAL_ROLES}


def add_opaque_globals(m: IrModule, mapping: dict[str, str]) -> IrModule:
    """Append the (mutable, zero-initialised) predicate globals to ``m``."""
    extra = tuple(
        GlobalVar(mapping[role], I32, ConstInt(I32, 0))
        for role in GLOBAL_ROLES
        if m.global_var(mapping[role]) is None
    )
    return IrModule(m.globals + extra, m.functions)


def _junk_body(body: tuple[Instruction, ...], names: NameGen, rng: SplitMix64) -> list[Instruction]:
    rename: dict[str, str] = {}

    def remap(v: Value) -> Value:
        if isinstance(v, LocalRef) and v.name in rename:
            return LocalRef(rename[v.name])
        return v

    # constant filler: d1 = 10 * 5; d2 = d1 > 50
    d1, d2 = names.fresh("dead"), names.fresh("dead")
    out: list[Instruction] = [
        BinOp(d1, "mul", I32, ConstInt(I32, 10), ConstInt(I32, 5)),
        ICmp(d2, "sgt", I32, LocalRef(d1), ConstInt(I32, 50)),
    ]
    for inst in body:
        inst = inst.map_values(remap)
        if isinstance(inst, BinOp) and inst.op in _SWAPPABLE:
            others = [op for op in _SWAPPABLE if op != inst.op]
            inst = BinOp(inst.result, others[rng.below(len(others))], inst.ty, inst.lhs, inst.rhs)
        elif isinstance(inst, ICmp):
            inst = ICmp(inst.result, ICMP_PREDS[rng.below(len(ICMP_PREDS))], inst.ty, inst.lhs, inst.rhs)
        if inst.result is not None:
            fresh = names.fresh(inst.result)
            rename[inst.result] = fresh
            inst = inst.renamed(fresh)
        out.append(inst)
    return out


def insert_bogus_flow(
    fn: IrFunction, cfg: ObfConfig, rng: SplitMix64, ctx: PassContext | None = None
) -> IrFunction:
    ctx = ctx or PassContext()
    check_function(fn, ctx.module, "bcf")
    if fn.is_declaration:
        return fn
    mapping = ctx.opaque_globals or {role: role for role in GLOBAL_ROLES}
    names = NameGen(fn.defined_names())
    out: list[BasicBlock] = []
    moved: dict[str, str] = {}
    guards: dict[str, str] = {}
    for idx, b in enumerate(fn.blocks):
        ctx.stats.blocks_processed += 1
        if cfg.bcf_probability <= 0 or rng.random() >= cfg.bcf_probability:
            out.append(b)
            continue
        family = FAMILIES[rng.below(len(FAMILIES))]
        pred = build_predicate(family, names, mapping)
        real, junk = names.fresh(b.label), names.fresh(b.label)
        if pred.truth is Truth.ALWAYS_TRUE:
            branch = CondBr(LocalRef(pred.result), real, junk)
        else:
            branch = CondBr(LocalRef(pred.result), junk, real)

        if idx == 0:
            allocas = tuple(i for i in b.body if isinstance(i, Alloca))
            rest = tuple(i for i in b.body if not isinstance(i, Alloca))
            guard = names.fresh(b.label)
            out.append(BasicBlock(b.label, (), allocas, Br(guard)))
            out.append(BasicBlock(guard, (), pred.instructions, branch))
        else:
            rest = b.body
            guard = b.label
            out.append(BasicBlock(b.label, b.phis, pred.instructions, branch))
        out.append(BasicBlock(real, (), rest, b.term))
        out.append(BasicBlock(junk, (), tuple(_junk_body(rest, names, rng)), Br(guard)))
        moved[b.label] = real
        guards[guard] = junk
        ctx.junk_blocks.append(junk)
        ctx.stats.predicates_inserted += 1

    if moved:
        fixed = []
        for b in out:
            phis = []
            for phi in b.phis:
                arms = tuple((v, moved.get(lbl, lbl)) for v, lbl in phi.incoming)
                if b.label in guards:
                    arms += ((LocalRef(phi.result), guards[b.label]),)
                phis.append(Phi(phi.result, phi.ty, arms))
            fixed.append(BasicBlock(b.label, tuple(phis), b.body, b.term))
        out = fixed
    return check_function(fn.with_blocks(out), _with_globals(ctx.module, mapping), "bcf")


def _with_globals(m: IrModule | None, mapping: dict[str, str]) -> IrModule | None:
    return add_opaque_globals(m, mapping) if m is not None else None
