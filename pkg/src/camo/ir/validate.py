"""Structural, type, and SSA checks over an :class:`IrModule`."""

from __future__ import annotations

from dataclasses import dataclass

from camo.errors import ValidationError
from camo.ir.cfg import Cfg, build_cfg, dominates, dominators
from camo.ir.model import (
    Alloca,
    BinOp,
    Call,
    Cast,
    CondBr,
    Gep,
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
)
from camo.ir.types import (
    INT_WIDTHS,
    ArrayType,
    ConstArray,
    ConstBytes,
    ConstInt,
    FuncType,
    GlobalRef,
    IntType,
    IrType,
    LocalRef,
    NullPtr,
    PtrType,
    Undef,
    Value,
    VoidType,
    ZeroInit,
    is_ptr,
)


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    function: str | None = None
    detail: str = ""

    def __str__(self) -> str:
        where = f"@{self.function}: " if self.function else ""
        extra = f" ({self.detail})" if self.detail else ""
        return f"{where}{self.kind}({self.subject}){extra}"


def same_type(a: IrType | None, b: IrType | None) -> bool:
    if isinstance(a, PtrType) and isinstance(b, PtrType):
        return True
    return a == b


def _bad_widths(ty: IrType) -> list[int]:
    if isinstance(ty, IntType):
        return [] if ty.width in INT_WIDTHS else [ty.width]
    if isinstance(ty, PtrType):
        return [] if ty.pointee is None else _bad_widths(ty.pointee)
    if isinstance(ty, ArrayType):
        return _bad_widths(ty.elem)
    if isinstance(ty, FuncType):
        out = _bad_widths(ty.ret)
        for p in ty.params:
            out += _bad_widths(p)
        return out
    return []


def _is_sized(ty: IrType) -> bool:
    return isinstance(ty, (IntType, PtrType, ArrayType))


def validate(m: IrModule) -> list[Violation]:
    out: list[Violation] = []
    seen: set[str] = set()
    for g in m.globals:
        if g.name in seen:
            out.append(Violation("DuplicateSymbol", f"@{g.name}"))
        seen.add(g.name)
        for w in _bad_widths(g.ty):
            out.append(Violation("InvalidIntWidth", f"@{g.name}", detail=f"i{w}"))
        out += _check_initializer(g.name, g.ty, g.init)
    for f in m.functions:
        if f.name in seen:
            out.append(Violation("DuplicateSymbol", f"@{f.name}"))
        seen.add(f.name)
    for f in m.functions:
        out += _FunctionChecker(m, f).run()
    return out


def check(m: IrModule, context: str = "") -> IrModule:
    """Return ``m`` unchanged or raise :class:`ValidationError`."""
    violations = validate(m)
    if violations:
        raise ValidationError(violations, context)
    return m


def validate_function(fn: IrFunction, module: IrModule | None = None) -> list[Violation]:
    """Check one function.  Without ``module``, globals and callees are not resolved."""
    return _FunctionChecker(module, fn).run()


def check_function(fn: IrFunction, module: IrModule | None = None, context: str = "") -> IrFunction:
    violations = validate_function(fn, module)
    if violations:
        raise ValidationError(violations, context)
    return fn


def _check_initializer(name: str, ty: IrType, init: Value) -> list[Violation]:
    ok = True
    if isinstance(init, ConstInt):
        ok = same_type(init.type, ty)
    elif isinstance(init, ConstBytes):
        ok = isinstance(ty, ArrayType) and ty.elem == IntType(8) and ty.length == len(init.data)
    elif isinstance(init, ConstArray):
        ok = isinstance(ty, ArrayType) and ty.length == len(init.items)
    elif isinstance(init, (ZeroInit, Undef)):
        ok = _is_sized(ty)
    elif isinstance(init, NullPtr):
        ok = isinstance(ty, PtrType)
    else:
        ok = False
    if ok:
        return []
    return [Violation("TypeMismatch", f"@{name}", detail=f"initializer {init} for {ty}")]


class _FunctionChecker:
    def __init__(self, module: IrModule | None, fn: IrFunction):
        self.module = module
        self.fn = fn
        self.out: list[Violation] = []
        self.types: dict[str, IrType] = {}

    def report(self, kind: str, subject: str, detail: str = "") -> None:
        self.out.append(Violation(kind, subject, self.fn.name, detail))

    def run(self) -> list[Violation]:
        fn = self.fn
        for w in _bad_widths(fn.signature):
            self.report("InvalidIntWidth", f"@{fn.name}", f"i{w}")
        for p in fn.params:
            if isinstance(p.ty, VoidType):
                self.report("TypeMismatch", f"%{p.name}", "void parameter")
        if fn.is_declaration:
            if fn.blocks:
                self.report("DeclarationWithBody", f"@{fn.name}")
            return self.out
        if not fn.blocks:
            self.report("MissingBody", f"@{fn.name}")
            return self.out
        if fn.variadic:
            self.report("VariadicDefinition", f"@{fn.name}")

        self._collect_definitions()
        labels = set()
        for b in fn.blocks:
            if b.label in labels:
                self.report("DuplicateLabel", f"%{b.label}")
            labels.add(b.label)
        missing = False
        for b in fn.blocks:
            for s in b.term.successors():
                if s not in labels:
                    self.report("UndefinedLabel", f"%{s}", f"in block %{b.label}")
                    missing = True
        if missing:
            return self.out
        cfg = build_cfg(fn)
        if fn.entry.phis:
            self.report("EntryHasPhi", f"%{fn.entry.label}")
        if cfg.predecessors[fn.entry.label]:
            self.report("EntryHasPredecessors", f"%{fn.entry.label}")

        for b in fn.blocks:
            for inst in b.instructions():
                self._check_instruction(inst)
            self._check_terminator(b.term)
            for phi in b.phis:
                self._check_phi(phi, b.label, cfg)
        self._check_dominance(cfg)
        return self.out

    # -- definitions -------------------------------------------------------

    def _collect_definitions(self) -> None:
        labels = {b.label for b in self.fn.blocks}
        for p in self.fn.params:
            if p.name in self.types:
                self.report("DuplicateDefinition", f"%{p.name}")
            self.types[p.name] = p.ty
        for b in self.fn.blocks:
            for inst in b.instructions():
                name = inst.result
                rty = inst.result_type
                if name is None:
                    if not isinstance(inst, (Store, Call)):
                        self.report("MissingResult", inst.opcode, f"in block %{b.label}")
                    continue
                if isinstance(rty, VoidType):
                    self.report("VoidResult", f"%{name}")
                    continue
                if name in self.types or name in labels:
                    self.report("DuplicateDefinition", f"%{name}")
                    continue
                self.types[name] = rty

    def type_of(self, v: Value) -> IrType | None:
        if isinstance(v, LocalRef):
            return self.types.get(v.name)
        if isinstance(v, ConstInt):
            return v.type
        if isinstance(v, (GlobalRef, NullPtr)):
            return PtrType(None)
        if isinstance(v, (Undef, ZeroInit)):
            return v.type
        return None

    def _operand(self, v: Value, expected: IrType, where: str) -> None:
        if isinstance(v, LocalRef) and v.name not in self.types:
            self.report("UndefinedValue", f"%{v.name}", where)
            return
        if isinstance(v, GlobalRef) and self.module is not None:
            if self.module.global_var(v.name) is None and self.module.get_function(v.name) is None:
                self.report("UndefinedGlobal", f"@{v.name}", where)
                return
        if isinstance(v, (ConstBytes, ConstArray)):
            if not isinstance(expected, ArrayType):
                self.report("TypeMismatch", str(v)[:20], f"{where}: aggregate for {expected}")
            return
        actual = self.type_of(v)
        if not same_type(actual, expected):
            self.report("TypeMismatch", str(v), f"{where}: expected {expected}, got {actual}")

    def _check_instruction(self, inst: Instruction) -> None:
        where = inst.opcode if inst.result is None else f"%{inst.result}"
        types = []
        if isinstance(inst, BinOp):
            types = [inst.ty]
            if not isinstance(inst.ty, IntType):
                self.report("TypeMismatch", where, "binary op on non-integer")
            self._operand(inst.lhs, inst.ty, where)
            self._operand(inst.rhs, inst.ty, where)
        elif isinstance(inst, ICmp):
            types = [inst.ty]
            if not isinstance(inst.ty, (IntType, PtrType)):
                self.report("TypeMismatch", where, "icmp operand type")
            self._operand(inst.lhs, inst.ty, where)
            self._operand(inst.rhs, inst.ty, where)
        elif isinstance(inst, Cast):
            types = [inst.src_ty, inst.dst_ty]
            self._operand(inst.value, inst.src_ty, where)
            if inst.op == "bitcast":
                if not (is_ptr(inst.src_ty) and is_ptr(inst.dst_ty)):
                    self.report("TypeMismatch", where, f"bitcast {inst.src_ty} to {inst.dst_ty}")
            elif not (isinstance(inst.src_ty, IntType) and isinstance(inst.dst_ty, IntType)):
                self.report("TypeMismatch", where, f"{inst.op} {inst.src_ty} to {inst.dst_ty}")
            elif (inst.op == "trunc") == (inst.dst_ty.width > inst.src_ty.width) or inst.dst_ty.width == inst.src_ty.width:
                self.report("TypeMismatch", where, f"{inst.op} {inst.src_ty} to {inst.dst_ty}")
        elif isinstance(inst, Alloca):
            types = [inst.ty]
            if not _is_sized(inst.ty):
                self.report("TypeMismatch", where, f"alloca of {inst.ty}")
        elif isinstance(inst, Load):
            types = [inst.ty, inst.ptr_ty]
            if not _is_sized(inst.ty):
                self.report("TypeMismatch", where, f"load of {inst.ty}")
            self._operand(inst.ptr, PtrType(None), where)
        elif isinstance(inst, Store):
            types = [inst.ty, inst.ptr_ty]
            self._operand(inst.value, inst.ty, where)
            self._operand(inst.ptr, PtrType(None), where)
        elif isinstance(inst, Gep):
            types = [inst.src_ty, inst.ptr_ty]
            self._operand(inst.ptr, PtrType(None), where)
            for ity, iv in inst.indices:
                types.append(ity)
                if ity.width not in (32, 64):
                    self.report("TypeMismatch", where, f"gep index type {ity}")
                self._operand(iv, ity, where)
            self._check_gep_shape(inst, where)
        elif isinstance(inst, Select):
            types = [inst.ty]
            self._operand(inst.cond, IntType(1), where)
            self._operand(inst.if_true, inst.ty, where)
            self._operand(inst.if_false, inst.ty, where)
        elif isinstance(inst, Call):
            types = [inst.ret_ty] + [t for t, _ in inst.args]
            self._check_call(inst, where)
        elif isinstance(inst, Phi):
            types = [inst.ty]
        for t in types:
            for w in _bad_widths(t):
                self.report("InvalidIntWidth", where, f"i{w}")

    def _check_gep_shape(self, inst: Gep, where: str) -> None:
        ty = inst.src_ty
        for _, _ in inst.indices[1:]:
            if not isinstance(ty, ArrayType):
                self.report("TypeMismatch", where, f"cannot index into {ty}")
                return
            ty = ty.elem
        if not inst.indices:
            self.report("TypeMismatch", where, "getelementptr without indices")

    def _check_call(self, inst: Call, where: str) -> None:
        if self.module is None:
            for aty, av in inst.args:
                self._operand(av, aty, where)
            return
        callee = self.module.get_function(inst.callee)
        if callee is None:
            self.report("UndefinedGlobal", f"@{inst.callee}", where)
            return
        sig = callee.signature
        if not same_type(sig.ret, inst.ret_ty):
            self.report("CallMismatch", where, f"@{inst.callee} returns {sig.ret}")
        if isinstance(sig.ret, VoidType) and inst.result is not None:
            self.report("VoidResult", where)
        n = len(sig.params)
        if len(inst.args) < n or (len(inst.args) > n and not sig.variadic):
            self.report("CallMismatch", where, f"@{inst.callee} expects {n} args")
            return
        for (aty, av), pty in zip(inst.args, sig.params):
            if not same_type(aty, pty):
                self.report("CallMismatch", where, f"argument type {aty} vs {pty}")
        for aty, av in inst.args:
            self._operand(av, aty, where)

    def _check_terminator(self, term: Terminator) -> None:
        where = term.opcode
        if isinstance(term, Ret):
            if isinstance(self.fn.ret_ty, VoidType):
                if term.value is not None:
                    self.report("TypeMismatch", "ret", "value returned from void function")
            elif term.value is None:
                self.report("TypeMismatch", "ret", f"missing {self.fn.ret_ty} return value")
            else:
                self._operand(term.value, self.fn.ret_ty, where)
        elif isinstance(term, CondBr):
            self._operand(term.cond, IntType(1), where)
        elif isinstance(term, Switch):
            self._operand(term.value, term.ty, where)
            values = [v for v, _ in term.cases]
            if len(set(values)) != len(values):
                self.report("DuplicateSwitchCase", where)

    def _check_phi(self, phi: Phi, label: str, cfg: Cfg) -> None:
        preds = set(cfg.predecessors[label])
        chosen: dict[str, Value] = {}
        for v, lbl in phi.incoming:
            self._operand(v, phi.ty, f"%{phi.result}")
            if lbl not in preds:
                self.report("PhiPredecessorMismatch", f"%{phi.result}", f"%{lbl} is not a predecessor")
            elif lbl in chosen and chosen[lbl] != v:
                self.report("PhiPredecessorMismatch", f"%{phi.result}", f"conflicting values for %{lbl}")
            chosen[lbl] = v
        for p in preds - set(chosen):
            self.report("PhiPredecessorMismatch", f"%{phi.result}", f"no entry for %{p}")

    # -- dominance ---------------------------------------------------------

    def _check_dominance(self, cfg: Cfg) -> None:
        idom = dominators(cfg)
        def_site: dict[str, tuple[str, int]] = {}
        params = {p.name for p in self.fn.params}
        for b in self.fn.blocks:
            for i, inst in enumerate(b.instructions()):
                if inst.result is not None and inst.result not in def_site:
                    def_site[inst.result] = (b.label, i)

        def visible(name: str, block: str, pos: int) -> bool:
            if name in params or name not in def_site:
                return True  # undefined names are reported elsewhere
            dblock, dpos = def_site[name]
            if dblock == block:
                return dpos < pos
            return dominates(idom, dblock, block)

        for b in self.fn.blocks:
            if b.label not in idom:
                continue  # unreachable code is dominated by everything
            n_phi = len(b.phis)
            for phi in b.phis:
                for v, pred in phi.incoming:
                    if isinstance(v, LocalRef) and pred in idom:
                        end = len(self.fn.block(pred)) + 1
                        if not visible(v.name, pred, end):
                            self.report("UseNotDominated", f"%{v.name}", f"phi %{phi.result}")
            for i, inst in enumerate(b.body, start=n_phi):
                for v in inst.uses():
                    if isinstance(v, LocalRef) and not visible(v.name, b.label, i):
                        self.report("UseNotDominated", f"%{v.name}", f"in block %{b.label}")
            end = n_phi + len(b.body)
            for v in b.term.uses():
                if isinstance(v, LocalRef) and not visible(v.name, b.label, end):
                    self.report("UseNotDominated", f"%{v.name}", f"terminator of %{b.label}")
