"""Memory demotion (reg2mem): dissolve phis and cross-block SSA values.

Flattening routes every edge through a dispatcher, after which a value
defined in one original block no longer dominates its uses in another.
Demotion makes every such value travel through a stack slot instead.
"""

from __future__ import annotations

from camo.ir.model import (
    Alloca,
    BasicBlock,
    Instruction,
    IrFunction,
    IrModule,
    Load,
    NameGen,
    Store,
)
from camo.ir.types import PTR, LocalRef, Value
from camo.ir.validate import check_function


def demote_to_memory(fn: IrFunction, module: IrModule | None = None) -> IrFunction:
    """Return ``fn`` without phis and without locals used outside their block.

    Allocas in the entry block are left alone since they dominate every
    block.  New slots are allocas prepended to the entry block.
    """
    check_function(fn, module, "demote_to_memory")
    names = NameGen(fn.defined_names())
    slots: list[Alloca] = []
    entry_label = fn.entry.label

    # phis become a slot stored at the end of each predecessor
    pred_stores: dict[str, list[Store]] = {}
    phi_loads: dict[str, list[Load]] = {}
    for b in fn.blocks:
        for phi in b.phis:
            slot = names.fresh(phi.result + ".slot")
            slots.append(Alloca(slot, phi.ty))
            phi_loads.setdefault(b.label, []).append(Load(phi.result, phi.ty, PTR, LocalRef(slot)))
            for v, pred in phi.incoming:
                pred_stores.setdefault(pred, []).append(Store(phi.ty, v, PTR, LocalRef(slot)))

    blocks: list[tuple[str, list[Instruction], object]] = []
    for b in fn.blocks:
        body = list(phi_loads.get(b.label, ())) + list(b.body) + pred_stores.get(b.label, [])
        blocks.append((b.label, body, b.term))

    # locate the defining block of each local
    home: dict[str, str] = {}
    for label, body, _ in blocks:
        for inst in body:
            if inst.result is not None:
                home[inst.result] = label
    entry_allocas = {
        inst.result for inst in fn.entry.body if isinstance(inst, Alloca)
    }

    def foreign_uses(label: str, insts, term) -> list[str]:
        seen: list[str] = []
        values: list[Value] = []
        for inst in insts:
            values.extend(inst.uses())
        values.extend(term.uses())
        for v in values:
            if isinstance(v, LocalRef) and v.name in home and home[v.name] != label:
                if v.name not in entry_allocas and v.name not in seen:
                    seen.append(v.name)
        return seen

    needed: dict[str, list[str]] = {}
    demoted: list[str] = []
    for label, body, term in blocks:
        used = foreign_uses(label, body, term)
        needed[label] = used
        for name in used:
            if name not in demoted:
                demoted.append(name)

    types: dict[str, object] = {}
    for _, body, _ in blocks:
        for inst in body:
            if inst.result is not None:
                types[inst.result] = inst.result_type
    slot_of: dict[str, str] = {}
    for name in demoted:
        slot = names.fresh(name + ".slot")
        slot_of[name] = slot
        slots.append(Alloca(slot, types[name]))

    out: list[BasicBlock] = []
    for label, body, term in blocks:
        rename: dict[str, str] = {}
        loads: list[Instruction] = []
        for name in needed[label]:
            local = names.fresh(name + ".reload")
            rename[name] = local
            loads.append(Load(local, types[name], PTR, LocalRef(slot_of[name])))

        def remap(v: Value, rename=rename) -> Value:
            if isinstance(v, LocalRef) and v.name in rename:
                return LocalRef(rename[v.name])
            return v

        new_body: list[Instruction] = []
        for inst in body:
            inst = inst.map_values(remap) if rename else inst
            new_body.append(inst)
            if inst.result in slot_of:
                new_body.append(
                    Store(types[inst.result], LocalRef(inst.result), PTR, LocalRef(slot_of[inst.result]))
                )
        new_body = loads + new_body
        if label == entry_label:
            new_body = list(slots) + new_body
        out.append(BasicBlock(label, (), tuple(new_body), term.map_values(remap) if rename else term))

    result = fn.with_blocks(out)
    return check_function(result, module, "demote_to_memory")
