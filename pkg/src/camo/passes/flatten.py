"""Control-flow flattening: route every edge through one switch dispatcher.

Layout after the pass::

    setup:     allocas of the old entry, %state = alloca i32, store first id
    dispatch:  %s = load %state; switch %s [one case per original block]
    <blocks>:  original bodies; the terminator becomes "store next id; br dispatch"
    default:   unreachable

Cross-block SSA values would lose dominance once every edge passes through
the dispatcher, so the function is demoted to memory first.
"""

from __future__ import annotations

from camo.ir.demote import demote_to_memory
from camo.ir.model import (
    Alloca,
    BasicBlock,
    Br,
    CondBr,
    ICmp,
    Instruction,
    IrFunction,
    Load,
    NameGen,
    Ret,
    Select,
    Store,
    Switch,
    Terminator,
    Unreachable,
)
from camo.ir.types import I32, PTR, ConstInt, LocalRef, Value, wrap
from camo.ir.validate import check_function
from camo.passes.config import ObfConfig, PassContext
from camo.rng import SplitMix64


def draw_state_ids(labels: list[str], rng: SplitMix64) -> dict[str, int]:
    """Distinct random u32 ids, stored as the signed i32 they print as."""
    ids: dict[str, int] = {}
    used: set[int] = set()
    for label in labels:
        while True:
            v = rng.next_u32()
            if v not in used:
                break
        used.add(v)
        ids[label] = wrap(v, 32)
    return ids


def _route(
    term: Terminator, ids: dict[str, int], state: str, dispatch: str, names: NameGen
) -> tuple[list[Instruction], Terminator]:
    def const(label: str) -> ConstInt:
        return ConstInt(I32, ids[label])

    if isinstance(term, Br):
        nxt: Value = const(term.target)
        return [Store(I32, nxt, PTR, LocalRef(state))], Br(dispatch)
    if isinstance(term, CondBr):
        sel = names.fresh("next")
        return [
            Select(sel, term.cond, I32, const(term.if_true), const(term.if_false)),
            Store(I32, LocalRef(sel), PTR, LocalRef(state)),
        ], Br(dispatch)
    if isinstance(term, Switch):
        insts: list[Instruction] = []
        acc: Value = const(term.default)
        for value, label in reversed(term.cases):
            hit, sel = names.fresh("case"), names.fresh("next")
            insts.append(ICmp(hit, "eq", term.ty, term.value, ConstInt(term.ty, value)))
            insts.append(Select(sel, LocalRef(hit), I32, const(label), acc))
            acc = LocalRef(sel)
        insts.append(Store(I32, acc, PTR, LocalRef(state)))
        return insts, Br(dispatch)
    if isinstance(term, (Ret, Unreachable)):
        return [], term
    raise TypeError(f"cannot route {term!r}")


def flatten(
    fn: IrFunction, cfg: ObfConfig, rng: SplitMix64, ctx: PassContext | None = None
) -> IrFunction:
    ctx = ctx or PassContext()
    check_function(fn, ctx.module, "flatten")
    if fn.is_declaration or len(fn.blocks) < 2:
        return fn
    fn = demote_to_memory(fn, ctx.module)
    names = NameGen(fn.defined_names())
    labels = fn.labels()
    ids = draw_state_ids(labels, rng)

    setup = names.fresh(fn.entry.label)
    dispatch = names.claim("dispatch")
    default = names.claim("dispatch.default")
    state = names.claim("state")
    loaded = names.claim("state.cur")

    entry = fn.entry
    hoisted = tuple(i for i in entry.body if isinstance(i, Alloca))
    setup_body = hoisted + (
        Alloca(state, I32),
        Store(I32, ConstInt(I32, ids[entry.label]), PTR, LocalRef(state)),
    )
    blocks = [
        BasicBlock(setup, (), setup_body, Br(dispatch)),
        BasicBlock(
            dispatch,
            (),
            (Load(loaded, I32, PTR, LocalRef(state)),),
            Switch(I32, LocalRef(loaded), default, tuple((ids[l], l) for l in labels)),
        ),
    ]
    for b in fn.blocks:
        body = b.body
        if b is entry:
            body = tuple(i for i in body if not isinstance(i, Alloca))
        extra, term = _route(b.term, ids, state, dispatch, names)
        blocks.append(BasicBlock(b.label, (), tuple(body) + tuple(extra), term))
    blocks.append(BasicBlock(default, (), (), Unreachable()))

    ctx.stats.blocks_processed += len(labels)
    ctx.stats.states_assigned += len(labels)
    return check_function(fn.with_blocks(blocks), ctx.module, "flatten")
