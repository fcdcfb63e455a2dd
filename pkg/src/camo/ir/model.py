"""Immutable SSA program representation.

Every structure here is a frozen dataclass holding tuples, so transformations
build new values instead of mutating shared ones.  Instructions expose
``uses()`` (operand values in order) and ``map_values(fn)`` (a copy with each
operand passed through ``fn``) so that passes can rename uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterator

from camo.ir.types import (
    I1,
    PTR,
    FuncType,
    IntType,
    IrType,
    Value,
    VOID,
)

ValueMap = Callable[[Value], Value]

BINARY_OPS = (
    "add", "sub", "mul", "sdiv", "udiv", "srem", "urem",
    "and", "or", "xor", "shl", "lshr", "ashr",
)
ICMP_PREDS = ("eq", "ne", "slt", "sle", "sgt", "sge", "ult", "ule", "ugt", "uge")
CAST_OPS = ("zext", "sext", "trunc", "bitcast")


class Instruction:
    """Base class for non-terminator instructions."""

    result: str | None
    opcode: str

    def uses(self) -> tuple[Value, ...]:
        return ()

    def map_values(self, fn: ValueMap) -> Instruction:
        return self

    @property
    def result_type(self) -> IrType:
        return VOID

    def renamed(self, result: str | None) -> Instruction:
        return replace(self, result=result)


@dataclass(frozen=True)
class BinOp(Instruction):
    result: str
    op: str
    ty: IntType
    lhs: Value
    rhs: Value

    @property
    def opcode(self) -> str:
        return self.op

    @property
    def result_type(self) -> IrType:
        return self.ty

    def uses(self) -> tuple[Value, ...]:
        return (self.lhs, self.rhs)

    def map_values(self, fn: ValueMap) -> BinOp:
        return replace(self, lhs=fn(self.lhs), rhs=fn(self.rhs))


@dataclass(frozen=True)
class ICmp(Instruction):
    result: str
    pred: str
    ty: IrType
    lhs: Value
    rhs: Value

    opcode = "icmp"

    @property
    def result_type(self) -> IrType:
        return I1

    def uses(self) -> tuple[Value, ...]:
        return (self.lhs, self.rhs)

    def map_values(self, fn: ValueMap) -> ICmp:
        return replace(self, lhs=fn(self.lhs), rhs=fn(self.rhs))


@dataclass(frozen=True)
class Cast(Instruction):
    result: str
    op: str
    src_ty: IrType  # IntType, or PtrType for bitcast
    value: Value
    dst_ty: IrType

    @property
    def opcode(self) -> str:
        return self.op

    @property
    def result_type(self) -> IrType:
        return self.dst_ty

    def uses(self) -> tuple[Value, ...]:
        return (self.value,)

    def map_values(self, fn: ValueMap) -> Cast:
        return replace(self, value=fn(self.value))


@dataclass(frozen=True)
class Alloca(Instruction):
    result: str
    ty: IrType

    opcode = "alloca"

    @property
    def result_type(self) -> IrType:
        return PTR


@dataclass(frozen=True)
class Load(Instruction):
    result: str
    ty: IrType
    ptr_ty: IrType
    ptr: Value

    opcode = "load"

    @property
    def result_type(self) -> IrType:
        return self.ty

    def uses(self) -> tuple[Value, ...]:
        return (self.ptr,)

    def map_values(self, fn: ValueMap) -> Load:
        return replace(self, ptr=fn(self.ptr))


@dataclass(frozen=True)
class Store(Instruction):
    ty: IrType
    value: Value
    ptr_ty: IrType
    ptr: Value
    result: None = None

    opcode = "store"

    def uses(self) -> tuple[Value, ...]:
        return (self.value, self.ptr)

    def map_values(self, fn: ValueMap) -> Store:
        return replace(self, value=fn(self.value), ptr=fn(self.ptr))


@dataclass(frozen=True)
class Gep(Instruction):
    result: str
    src_ty: IrType
    ptr_ty: IrType
    ptr: Value
    indices: tuple[tuple[IntType, Value], ...]
    inbounds: bool = False

    opcode = "getelementptr"

    @property
    def result_type(self) -> IrType:
        return self.ptr_ty

    def uses(self) -> tuple[Value, ...]:
        return (self.ptr,) + tuple(v for _, v in self.indices)

    def map_values(self, fn: ValueMap) -> Gep:
        return replace(
            self,
            ptr=fn(self.ptr),
            indices=tuple((t, fn(v)) for t, v in self.indices),
        )


@dataclass(frozen=True)
class Call(Instruction):
    result: str | None
    ret_ty: IrType
    callee: str
    args: tuple[tuple[IrType, Value], ...]
    fn_ty: FuncType | None = None

    opcode = "call"

    @property
    def result_type(self) -> IrType:
        return self.ret_ty

    def uses(self) -> tuple[Value, ...]:
        return tuple(v for _, v in self.args)

    def map_values(self, fn: ValueMap) -> Call:
        return replace(self, args=tuple((t, fn(v)) for t, v in self.args))


@dataclass(frozen=True)
class Select(Instruction):
    result: str
    cond: Value
    ty: IrType
    if_true: Value
    if_false: Value

    opcode = "select"

    @property
    def result_type(self) -> IrType:
        return self.ty

    def uses(self) -> tuple[Value, ...]:
        return (self.cond, self.if_true, self.if_false)

    def map_values(self, fn: ValueMap) -> Select:
        return replace(
            self,
            cond=fn(self.cond),
            if_true=fn(self.if_true),
            if_false=fn(self.if_false),
        )


@dataclass(frozen=True)
class Phi(Instruction):
    result: str
    ty: IrType
    incoming: tuple[tuple[Value, str], ...]

    opcode = "phi"

    @property
    def result_type(self) -> IrType:
        return self.ty

    def uses(self) -> tuple[Value, ...]:
        return tuple(v for v, _ in self.incoming)

    def map_values(self, fn: ValueMap) -> Phi:
        return replace(self, incoming=tuple((fn(v), lbl) for v, lbl in self.incoming))

    def relabel(self, old: str, new: str) -> Phi:
        return replace(
            self,
            incoming=tuple((v, new if lbl == old else lbl) for v, lbl in self.incoming),
        )


# --- terminators -----------------------------------------------------------


class Terminator:
    opcode: str

    def uses(self) -> tuple[Value, ...]:
        return ()

    def map_values(self, fn: ValueMap) -> Terminator:
        return self

    def successors(self) -> tuple[str, ...]:
        return ()

    def map_labels(self, fn: Callable[[str], str]) -> Terminator:
        return self


@dataclass(frozen=True)
class Ret(Terminator):
    ty: IrType = VOID
    value: Value | None = None

    opcode = "ret"

    def uses(self) -> tuple[Value, ...]:
        return () if self.value is None else (self.value,)

    def map_values(self, fn: ValueMap) -> Ret:
        if self.value is None:
            return self
        return replace(self, value=fn(self.value))


@dataclass(frozen=True)
class Br(Terminator):
    target: str

    opcode = "br"

    def successors(self) -> tuple[str, ...]:
        return (self.target,)

    def map_labels(self, fn: Callable[[str], str]) -> Br:
        return Br(fn(self.target))


@dataclass(frozen=True)
class CondBr(Terminator):
    cond: Value
    if_true: str
    if_false: str

    opcode = "br"

    def uses(self) -> tuple[Value, ...]:
        return (self.cond,)

    def map_values(self, fn: ValueMap) -> CondBr:
        return replace(self, cond=fn(self.cond))

    def successors(self) -> tuple[str, ...]:
        return (self.if_true, self.if_false)

    def map_labels(self, fn: Callable[[str], str]) -> CondBr:
        return replace(self, if_true=fn(self.if_true), if_false=fn(self.if_false))


@dataclass(frozen=True)
class Switch(Terminator):
    ty: IntType
    value: Value
    default: str
    cases: tuple[tuple[int, str], ...]

    opcode = "switch"

    def uses(self) -> tuple[Value, ...]:
        return (self.value,)

    def map_values(self, fn: ValueMap) -> Switch:
        return replace(self, value=fn(self.value))

    def successors(self) -> tuple[str, ...]:
        return (self.default,) + tuple(lbl for _, lbl in self.cases)

    def map_labels(self, fn: Callable[[str], str]) -> Switch:
        return replace(
            self,
            default=fn(self.default),
            cases=tuple((v, fn(lbl)) for v, lbl in self.cases),
        )


@dataclass(frozen=True)
class Unreachable(Terminator):
    opcode = "unreachable"


# --- containers ------------------------------------------------------------


@dataclass(frozen=True)
class BasicBlock:
    label: str
    phis: tuple[Phi, ...]
    body: tuple[Instruction, ...]
    term: Terminator

    def instructions(self) -> Iterator[Instruction]:
        yield from self.phis
        yield from self.body

    def __len__(self) -> int:
        return len(self.phis) + len(self.body) + 1


@dataclass(frozen=True)
class Param:
    name: str
    ty: IrType


@dataclass(frozen=True)
class IrFunction:
    name: str
    ret_ty: IrType
    params: tuple[Param, ...]
    blocks: tuple[BasicBlock, ...] = ()
    variadic: bool = False
    is_declaration: bool = False

    @property
    def signature(self) -> FuncType:
        return FuncType(self.ret_ty, tuple(p.ty for p in self.params), self.variadic)

    @property
    def entry(self) -> BasicBlock:
        return self.blocks[0]

    def block(self, label: str) -> BasicBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def labels(self) -> list[str]:
        return [b.label for b in self.blocks]

    def defined_names(self) -> set[str]:
        names = {p.name for p in self.params}
        names.update(b.label for b in self.blocks)
        for b in self.blocks:
            for inst in b.instructions():
                if inst.result is not None:
                    names.add(inst.result)
        return names

    def with_blocks(self, blocks) -> IrFunction:
        return replace(self, blocks=tuple(blocks))


@dataclass(frozen=True)
class GlobalVar:
    name: str
    ty: IrType
    init: Value
    constant: bool = False


@dataclass(frozen=True)
class IrModule:
    globals: tuple[GlobalVar, ...] = ()
    functions: tuple[IrFunction, ...] = ()

    def function(self, name: str) -> IrFunction:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def get_function(self, name: str) -> IrFunction | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def global_var(self, name: str) -> GlobalVar | None:
        for g in self.globals:
            if g.name == name:
                return g
        return None

    def defined_functions(self) -> list[IrFunction]:
        return [f for f in self.functions if not f.is_declaration]

    def replace_function(self, fn: IrFunction) -> IrModule:
        return replace(
            self,
            functions=tuple(fn if f.name == fn.name else f for f in self.functions),
        )


class NameGen:
    """Per-function fresh-name source using a monotone ``.N`` suffix."""

    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.counter = 0

    def fresh(self, base: str) -> str:
        while True:
            self.counter += 1
            name = f"{base}.{self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def claim(self, name: str) -> str:
        """Use ``name`` verbatim if free, else fall back to a fresh variant."""
        if name not in self.taken:
            self.taken.add(name)
            return name
        return self.fresh(name)
