"""Canonical text form: one instruction per line, two-space indent."""

from __future__ import annotations

from camo.ir.model import (
    Alloca,
    BinOp,
    Br,
    Call,
    Cast,
    CondBr,
    Gep,
    GlobalVar,
    ICmp,
    Instruction,
    IrFunction,
    IrModule,
    Load,
    Phi,
    Ret,
    Select,
    Store,
    Switch,
    Terminator,
    Unreachable,
)
from camo.ir.types import IntType, format_name
from camo.ir.validate import check


def _local(name: str) -> str:
    return "%" + format_name(name)


def format_instruction(inst: Instruction) -> str:
    lhs = f"{_local(inst.result)} = " if inst.result is not None else ""
    if isinstance(inst, BinOp):
        text = f"{inst.op} {inst.ty} {inst.lhs}, {inst.rhs}"
    elif isinstance(inst, ICmp):
        text = f"icmp {inst.pred} {inst.ty} {inst.lhs}, {inst.rhs}"
    elif isinstance(inst, Cast):
        text = f"{inst.op} {inst.src_ty} {inst.value} to {inst.dst_ty}"
    elif isinstance(inst, Alloca):
        text = f"alloca {inst.ty}"
    elif isinstance(inst, Load):
        text = f"load {inst.ty}, {inst.ptr_ty} {inst.ptr}"
    elif isinstance(inst, Store):
        text = f"store {inst.ty} {inst.value}, {inst.ptr_ty} {inst.ptr}"
    elif isinstance(inst, Gep):
        parts = [f"{inst.src_ty}", f"{inst.ptr_ty} {inst.ptr}"]
        parts += [f"{t} {v}" for t, v in inst.indices]
        kw = "getelementptr inbounds" if inst.inbounds else "getelementptr"
        text = f"{kw} " + ", ".join(parts)
    elif isinstance(inst, Call):
        ty = str(inst.fn_ty) if inst.fn_ty is not None else str(inst.ret_ty)
        args = ", ".join(f"{t} {v}" for t, v in inst.args)
        text = f"call {ty} @{format_name(inst.callee)}({args})"
    elif isinstance(inst, Select):
        text = (
            f"select i1 {inst.cond}, {inst.ty} {inst.if_true}, "
            f"{inst.ty} {inst.if_false}"
        )
    elif isinstance(inst, Phi):
        arms = ", ".join(f"[ {v}, {_local(lbl)} ]" for v, lbl in inst.incoming)
        text = f"phi {inst.ty} {arms}"
    else:
        raise TypeError(f"cannot print {inst!r}")
    return lhs + text


def format_terminator(term: Terminator) -> str:
    if isinstance(term, Ret):
        if term.value is None:
            return "ret void"
        return f"ret {term.ty} {term.value}"
    if isinstance(term, Br):
        return f"br label {_local(term.target)}"
    if isinstance(term, CondBr):
        return (
            f"br i1 {term.cond}, label {_local(term.if_true)}, "
            f"label {_local(term.if_false)}"
        )
    if isinstance(term, Switch):
        lines = [f"switch {term.ty} {term.value}, label {_local(term.default)} ["]
        for v, lbl in term.cases:
            lines.append(f"    {term.ty} {_case(term.ty, v)}, label {_local(lbl)}")
        lines.append("  ]")
        return "\n".join(lines)
    if isinstance(term, Unreachable):
        return "unreachable"
    raise TypeError(f"cannot print {term!r}")


def _case(ty: IntType, v: int) -> str:
    if ty.width == 1:
        return "true" if v else "false"
    return str(v)


def format_global(g: GlobalVar) -> str:
    kind = "constant" if g.constant else "global"
    return f"@{format_name(g.name)} = {kind} {g.ty} {g.init}"


def format_function(fn: IrFunction) -> str:
    params = []
    for p in fn.params:
        params.append(str(p.ty) if fn.is_declaration else f"{p.ty} {_local(p.name)}")
    if fn.variadic:
        params.append("...")
    head = f"{fn.ret_ty} @{format_name(fn.name)}({', '.join(params)})"
    if fn.is_declaration:
        return f"declare {head}"
    lines = [f"define {head} {{"]
    for i, b in enumerate(fn.blocks):
        if i:
            lines.append("")
        lines.append(f"{format_name(b.label)}:")
        for inst in b.instructions():
            lines.append("  " + format_instruction(inst))
        lines.append("  " + format_terminator(b.term))
    lines.append("}")
    return "\n".join(lines)


def print_module(m: IrModule) -> str:
    """Render ``m`` as canonical text; raises ValidationError if ``m`` is invalid."""
    check(m, "print_module")
    sections: list[str] = []
    if m.globals:
        sections.append("\n".join(format_global(g) for g in m.globals))
    run: list[str] = []
    for f in m.functions:
        if f.is_declaration:
            run.append(format_function(f))
            continue
        if run:
            sections.append("\n".join(run))
            run = []
        sections.append(format_function(f))
    if run:
        sections.append("\n".join(run))
    if not sections:
        return ""
    return "\n\n".join(sections) + "\n"
