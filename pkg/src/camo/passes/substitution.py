"""Instruction substitution: rewrite bitwise/additive ops as longer identities.

Every rule expands ``%r = op ty %a, %b`` into a short chain whose last
instruction defines ``%r`` again, so no use has to be renamed.
"""

from __future__ import annotations

from typing import Callable

from camo.ir.model import BasicBlock, BinOp, Instruction, IrFunction, NameGen
from camo.ir.types import ConstInt, IntType, LocalRef, Value
from camo.ir.validate import check_function
from camo.passes.config import ObfConfig, PassContext
from camo.rng import SplitMix64

Fresh = Callable[[], str]
Rule = Callable[[str, IntType, Value, Value, Fresh], list[Instruction]]


def _not(fresh: Fresh, ty: IntType, v: Value) -> tuple[Instruction, LocalRef]:
    name = fresh()
    return BinOp(name, "xor", ty, v, ConstInt(ty, -1)), LocalRef(name)


def _neg(fresh: Fresh, ty: IntType, v: Value) -> tuple[Instruction, LocalRef]:
    name = fresh()
    return BinOp(name, "sub", ty, ConstInt(ty, 0), v), LocalRef(name)


def add_via_neg(r: str, ty: IntType, a: Value, b: Value, fresh: Fresh) -> list[Instruction]:
    """a + b  ==  a - (0 - b)"""
    nb, vnb = _neg(fresh, ty, b)
    return [nb, BinOp(r, "sub", ty, a, vnb)]


def add_via_double_neg(r: str, ty: IntType, a: Value, b: Value, fresh: Fresh) -> list[Instruction]:
    """a + b  ==  0 - ((0 - a) + (0 - b))"""
    na, vna = _neg(fresh, ty, a)
    nb, vnb = _neg(fresh, ty, b)
    s = fresh()
    return [na, nb, BinOp(s, "add", ty, vna, vnb), BinOp(r, "sub", ty, ConstInt(ty, 0), LocalRef(s))]


def sub_via_neg(r: str, ty: IntType, a: Value, b: Value, fresh: Fresh) -> list[Instruction]:
    """a - b  ==  a + (0 - b)"""
    nb, vnb = _neg(fresh, ty, b)
    return [nb, BinOp(r, "add", ty, a, vnb)]


def xor_via_and_or(r: str, ty: IntType, a: Value, b: Value, fresh: Fresh) -> list[Instruction]:
    """a ^ b  ==  (a & ~b) | (~a & b)"""
    nb, vnb = _not(fresh, ty, b)
    na, vna = _not(fresh, ty, a)
    left, right = fresh(), fresh()
    return [
        nb,
        na,
        BinOp(left, "and", ty, a, vnb),
        BinOp(right, "and", ty, vna, b),
        BinOp(r, "or", ty, LocalRef(left), LocalRef(right)),
    ]


def and_via_de_morgan(r: str, ty: IntType, a: Value, b: Value, fresh: Fresh) -> list[Instruction]:
    """a & b  ==  ~(~a | ~b)"""
    na, vna = _not(fresh, ty, a)
    nb, vnb = _not(fresh, ty, b)
    o = fresh()
    return [na, nb, BinOp(o, "or", ty, vna, vnb), BinOp(r, "xor", ty, LocalRef(o), ConstInt(ty, -1))]


def or_via_de_morgan(r: str, ty: IntType, a: Value, b: Value, fresh: Fresh) -> list[Instruction]:
    """a | b  ==  ~(~a & ~b)"""
    na, vna = _not(fresh, ty, a)
    nb, vnb = _not(fresh, ty, b)
    t = fresh()
    return [na, nb, BinOp(t, "and", ty, vna, vnb), BinOp(r, "xor", ty, LocalRef(t), ConstInt(ty, -1))]


RULES: dict[str, tuple[Rule, ...]] = {
    "add": (add_via_neg, add_via_double_neg),
    "sub": (sub_via_neg,),
    "xor": (xor_via_and_or,),
    "and": (and_via_de_morgan,),
    "or": (or_via_de_morgan,),
}


def substitute_instructions(
    fn: IrFunction, cfg: ObfConfig, rng: SplitMix64, ctx: PassContext | None = None
) -> IrFunction:
    ctx = ctx or PassContext()
    module = ctx.module
    check_function(fn, module, "sub")
    if fn.is_declaration:
        return fn
    names = NameGen(fn.defined_names())
    blocks = list(fn.blocks)
    for _ in range(cfg.subst_rounds):
        rewritten = []
        for b in blocks:
            body: list[Instruction] = []
            for inst in b.body:
                rules = RULES.get(inst.op) if isinstance(inst, BinOp) else None
                if not rules:
                    body.append(inst)
                    continue
                rule = rules[rng.below(len(rules))] if len(rules) > 1 else rules[0]
                base = inst.result
                body.extend(rule(inst.result, inst.ty, inst.lhs, inst.rhs, lambda: names.fresh(base)))
                ctx.stats.instructions_substituted += 1
            rewritten.append(BasicBlock(b.label, b.phis, tuple(body), b.term))
        blocks = rewritten
    ctx.stats.blocks_processed += len(blocks)
    return check_function(fn.with_blocks(blocks), module, "sub")
