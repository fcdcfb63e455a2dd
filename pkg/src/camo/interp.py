"""Deterministic interpreter for the IR subset.

Integers live as unsigned Python ints masked to their width; pointers are
``Ptr(alloc, offset)`` pairs into byte-addressed allocations.  Each function
is compiled once into per-instruction closures, which keeps the differential
oracle fast enough to run thousands of vectors per test session.
"""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence, Union

from camo.errors import ArgMismatch, UnknownFunction, UnsupportedParamType
from camo.ir.model import (
    Alloca,
    BinOp,
    Br,
    Call,
    Cast,
    CondBr,
    Gep,
    ICmp,
    Instruction,
    IrFunction,
    IrModule,
    Load,
    Ret,
    Select,
    Store,
    Switch,
    Terminator,
    Unreachable,
)
from camo.ir.types import (
    POINTER_SIZE,
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
    wrap,
)
from camo.rng import SplitMix64

DEFAULT_FUEL = 1_000_000
BUFFER_LEN = 16
MAX_CALL_DEPTH = 512
MAX_RENDER = 4096
# larger heap requests fail with a null pointer, as an exhausted allocator would
MAX_HEAP_ALLOC = 1 << 20


class TrapKind(str, enum.Enum):
    DIV_BY_ZERO = "DivByZero"
    SDIV_OVERFLOW = "SDivOverflow"
    OOB_ACCESS = "OobAccess"
    NULL_DEREF = "NullDeref"
    USE_AFTER_FREE = "UseAfterFree"
    BAD_POINTER = "BadPointer"
    POINTER_COMPARE = "PointerCompare"
    SHIFT_OVERFLOW = "ShiftOverflow"
    UNREACHABLE = "Unreachable"
    UNKNOWN_CALLEE = "UnknownCallee"
    STACK_OVERFLOW = "StackOverflow"
    UNSUPPORTED = "Unsupported"


class Ptr(NamedTuple):
    alloc: int
    offset: int


NULL = Ptr(0, 0)
RuntimeValue = Union[int, Ptr]


@dataclass(frozen=True)
class Returned:
    value: object = None


@dataclass(frozen=True)
class Trapped:
    kind: TrapKind
    detail: str = field(default="", compare=False)


@dataclass(frozen=True)
class OutOfFuel:
    pass


Outcome = Union[Returned, Trapped, OutOfFuel]


@dataclass(frozen=True)
class ExternEvent:
    callee: str
    args: tuple


@dataclass(frozen=True)
class ExecResult:
    outcome: Outcome
    events: tuple[ExternEvent, ...]
    steps: int
    block_hits: dict[str, int]
    # final contents of pointer-argument buffers, in parameter order
    arg_memory: tuple[bytes, ...] = ()


class UnknownCalleePolicy(str, enum.Enum):
    TRAP = "trap"
    RETURN_ZERO = "return_zero"


@dataclass(frozen=True)
class ExternPolicy:
    default_return: dict[str, int] = field(default_factory=dict)
    unknown_callee: UnknownCalleePolicy = UnknownCalleePolicy.RETURN_ZERO
    builtins: bool = True


@dataclass(frozen=True)
class Buffer:
    """A pointer argument: a fresh allocation of ``len(values)`` elements."""

    elem_width: int
    values: tuple[int, ...]

    def to_bytes(self) -> bytes:
        size = (self.elem_width + 7) // 8
        return b"".join((v & ((1 << (size * 8)) - 1)).to_bytes(size, "little") for v in self.values)


Arg = Union[int, ConstInt, Buffer]


class _Trap(Exception):
    def __init__(self, kind: TrapKind, detail: str = ""):
        self.kind = kind
        self.detail = detail


class _Fuel(Exception):
    pass


def _signed(v: int, width: int) -> int:
    if v >> (width - 1):
        return v - (1 << width)
    return v


def _mask(width: int) -> int:
    return (1 << width) - 1


def type_size(ty: IrType) -> int:
    return ty.size()


class _Allocation:
    __slots__ = ("data", "ptrs", "live", "label")

    def __init__(self, size: int, label: str):
        self.data = bytearray(size)
        self.ptrs: dict[int, Ptr] = {}
        self.live = True
        self.label = label


class _State:
    """Mutable per-run state: memory, fuel, trace, coverage."""

    def __init__(self, fuel: int, entry: str):
        self.fuel = fuel
        self.steps = 0
        self.entry = entry
        self.events: list[ExternEvent] = []
        self.hits: dict[str, int] = {}
        self.allocs: dict[int, _Allocation] = {}
        self.next_id = 1
        self.heap_count = 0
        self.depth = 0

    def allocate(self, size: int, label: str) -> Ptr:
        aid = self.next_id
        self.next_id += 1
        self.allocs[aid] = _Allocation(size, label)
        return Ptr(aid, 0)

    def region(self, p: RuntimeValue, size: int) -> _Allocation:
        if not isinstance(p, Ptr):
            raise _Trap(TrapKind.BAD_POINTER, "integer used as pointer")
        if p.alloc == 0:
            raise _Trap(TrapKind.NULL_DEREF)
        a = self.allocs.get(p.alloc)
        if a is None:
            raise _Trap(TrapKind.BAD_POINTER)
        if not a.live:
            raise _Trap(TrapKind.USE_AFTER_FREE, a.label)
        if p.offset < 0 or p.offset + size > len(a.data):
            raise _Trap(TrapKind.OOB_ACCESS, f"{a.label}+{p.offset}/{size}")
        return a

    def load(self, p: RuntimeValue, ty: IrType) -> RuntimeValue:
        if isinstance(ty, IntType):
            size = ty.size()
            a = self.region(p, size)
            off = p.offset
            if a.ptrs and any(off - POINTER_SIZE < k < off + size for k in a.ptrs):
                raise _Trap(TrapKind.BAD_POINTER, "integer load of pointer bytes")
            return int.from_bytes(a.data[off : off + size], "little") & _mask(ty.width)
        if isinstance(ty, PtrType):
            a = self.region(p, POINTER_SIZE)
            hit = a.ptrs.get(p.offset)
            if hit is not None:
                return hit
            if not any(a.data[p.offset : p.offset + POINTER_SIZE]):
                return NULL
            raise _Trap(TrapKind.BAD_POINTER, "pointer load of integer bytes")
        raise _Trap(TrapKind.UNSUPPORTED, f"load of {ty}")

    def _clear_ptrs(self, a: _Allocation, off: int, size: int) -> None:
        if a.ptrs:
            for k in [k for k in a.ptrs if off - POINTER_SIZE < k < off + size]:
                del a.ptrs[k]

    def store(self, p: RuntimeValue, ty: IrType, v: RuntimeValue) -> None:
        if isinstance(ty, IntType):
            size = ty.size()
            a = self.region(p, size)
            self._clear_ptrs(a, p.offset, size)
            a.data[p.offset : p.offset + size] = (v & _mask(size * 8)).to_bytes(size, "little")
        elif isinstance(ty, PtrType):
            a = self.region(p, POINTER_SIZE)
            self._clear_ptrs(a, p.offset, POINTER_SIZE)
            a.data[p.offset : p.offset + POINTER_SIZE] = bytes(POINTER_SIZE)
            if v != NULL:
                a.ptrs[p.offset] = v
        else:
            raise _Trap(TrapKind.UNSUPPORTED, f"store of {ty}")

    def store_bytes(self, p: RuntimeValue, data: bytes) -> None:
        a = self.region(p, len(data))
        self._clear_ptrs(a, p.offset, len(data))
        a.data[p.offset : p.offset + len(data)] = data

    def read_bytes(self, p: RuntimeValue, n: int) -> bytes:
        a = self.region(p, n)
        if n and a.ptrs and any(p.offset - POINTER_SIZE < k < p.offset + n for k in a.ptrs):
            raise _Trap(TrapKind.BAD_POINTER, "byte copy of pointer")
        return bytes(a.data[p.offset : p.offset + n])

    def c_string(self, p: RuntimeValue) -> bytes:
        a = self.region(p, 0)
        out = bytearray()
        off = p.offset
        while True:
            if off >= len(a.data):
                raise _Trap(TrapKind.OOB_ACCESS, f"unterminated string in {a.label}")
            b = a.data[off]
            if b == 0:
                return bytes(out)
            out.append(b)
            off += 1

    def render(self, v: RuntimeValue, ty: IrType) -> object:
        if isinstance(v, Ptr):
            if v == NULL:
                return "<null>"
            a = self.allocs.get(v.alloc)
            if a is None or not a.live or not 0 <= v.offset <= len(a.data):
                return "<invalid>"
            raw = bytes(a.data[v.offset : v.offset + MAX_RENDER])
            return raw.split(b"\0", 1)[0].decode("latin-1")
        if isinstance(ty, IntType):
            return _signed(v, ty.width) if ty.width > 1 else v
        return v

    def describe(self, v: RuntimeValue, ty: IrType) -> object:
        if isinstance(v, Ptr):
            if v == NULL:
                return "null"
            a = self.allocs.get(v.alloc)
            return f"&{a.label if a else '?'}+{v.offset}"
        if isinstance(ty, IntType):
            return _signed(v, ty.width) if ty.width > 1 else v
        return None


# --- constant materialization ------------------------------------------------


def _const_bytes(v: Value, ty: IrType) -> bytes:
    size = ty.size()
    if isinstance(v, ConstBytes):
        data = v.data
    elif isinstance(v, ConstArray):
        esize = ty.elem.size() if isinstance(ty, ArrayType) else 0
        data = b"".join(
            (item.value & _mask(esize * 8)).to_bytes(esize, "little") if isinstance(item, ConstInt) else bytes(esize)
            for item in v.items
        )
    elif isinstance(v, ConstInt):
        data = (v.value & _mask(size * 8)).to_bytes(size, "little")
    else:
        data = b""
    return data[:size].ljust(size, b"\0")


# --- compilation -------------------------------------------------------------

Getter = Callable[[dict], RuntimeValue]


@dataclass
class _Block:
    label: str
    phis: list[tuple[str, dict[str, Getter]]]
    ops: list[Callable[[dict, _State], None]]
    term: Callable[[dict, _State], tuple]


@dataclass
class _Function:
    fn: IrFunction
    blocks: dict[str, _Block]
    entry: str


class Machine:
    """Compiled view of a module; reusable across many runs."""

    def __init__(self, module: IrModule, policy: ExternPolicy | None = None):
        self.module = module
        self.policy = policy or ExternPolicy()
        self.global_ids: dict[str, int] = {}
        for i, g in enumerate(module.globals, start=1):
            self.global_ids[g.name] = i
        base = len(module.globals) + 1
        for i, f in enumerate(module.functions):
            self.global_ids.setdefault(f.name, base + i)
        self.first_dynamic = base + len(module.functions)
        self.compiled: dict[str, _Function] = {}

    # -- public API --------------------------------------------------------

    def run(self, name: str, args: Sequence[Arg], fuel: int = DEFAULT_FUEL) -> ExecResult:
        fn = self.module.get_function(name)
        if fn is None or fn.is_declaration:
            raise UnknownFunction(f"no defined function @{name}")
        if len(args) != len(fn.params):
            raise ArgMismatch(f"@{name} takes {len(fn.params)} arguments, got {len(args)}")
        st = _State(fuel, name)
        st.next_id = self.first_dynamic
        self._init_globals(st)
        values: list[RuntimeValue] = []
        buffers: list[Ptr] = []
        for i, (p, a) in enumerate(zip(fn.params, args)):
            values.append(self._materialize_arg(st, i, p.ty, a, buffers))
        try:
            ret = self._call(self._compiled(name), values, st)
            outcome: Outcome = Returned(st.describe(ret, fn.ret_ty) if ret is not None else None)
        except _Trap as t:
            outcome = Trapped(t.kind, t.detail)
        except _Fuel:
            outcome = OutOfFuel()
        memory = tuple(bytes(st.allocs[b.alloc].data) for b in buffers)
        return ExecResult(outcome, tuple(st.events), st.steps, dict(st.hits), memory)

    # -- setup -------------------------------------------------------------

    def _init_globals(self, st: _State) -> None:
        for g in self.module.globals:
            aid = self.global_ids[g.name]
            alloc = _Allocation(g.ty.size(), f"@{g.name}")
            st.allocs[aid] = alloc
        for g in self.module.globals:
            p = Ptr(self.global_ids[g.name], 0)
            if isinstance(g.ty, PtrType):
                target = self._getter(g.init)({})
                st.store(p, g.ty, target)
            elif isinstance(g.init, (ConstInt, ConstBytes, ConstArray)):
                st.store_bytes(p, _const_bytes(g.init, g.ty))
        for f in self.module.functions:
            st.allocs.setdefault(self.global_ids[f.name], _Allocation(0, f"@{f.name}"))

    def _materialize_arg(self, st: _State, i: int, ty: IrType, a: Arg, buffers: list) -> RuntimeValue:
        if isinstance(ty, IntType):
            if isinstance(a, ConstInt):
                if a.type != ty:
                    raise ArgMismatch(f"argument {i}: expected {ty}, got {a.type}")
                return a.value & ty.mask
            if isinstance(a, int) and not isinstance(a, bool):
                return a & ty.mask
            raise ArgMismatch(f"argument {i}: expected {ty}, got {a!r}")
        if isinstance(ty, PtrType):
            if not isinstance(a, Buffer):
                raise ArgMismatch(f"argument {i}: expected a buffer for {ty}")
            data = a.to_bytes()
            p = st.allocate(len(data), f"arg{i}")
            st.store_bytes(p, data)
            buffers.append(p)
            return p
        raise ArgMismatch(f"argument {i}: unsupported parameter type {ty}")

    # -- compilation -------------------------------------------------------

    def _compiled(self, name: str) -> _Function:
        cf = self.compiled.get(name)
        if cf is None:
            fn = self.module.function(name)
            blocks = {b.label: self._compile_block(b) for b in fn.blocks}
            cf = _Function(fn, blocks, fn.blocks[0].label)
            self.compiled[name] = cf
        return cf

    def _getter(self, v: Value) -> Getter:
        if isinstance(v, LocalRef):
            name = v.name
            return lambda env: env[name]
        if isinstance(v, ConstInt):
            c = v.value & v.type.mask
            return lambda env: c
        if isinstance(v, GlobalRef):
            p = Ptr(self.global_ids[v.name], 0)
            return lambda env: p
        if isinstance(v, NullPtr):
            return lambda env: NULL
        if isinstance(v, (Undef, ZeroInit)):
            z = NULL if isinstance(v.type, PtrType) else 0
            return lambda env: z
        raise TypeError(f"no runtime value for {v}")

    def _compile_block(self, b) -> _Block:
        phis = [(p.result, {lbl: self._getter(v) for v, lbl in p.incoming}) for p in b.phis]
        ops = [self._compile(inst) for inst in b.body]
        return _Block(b.label, phis, ops, self._compile_term(b.term))

    def _compile(self, inst: Instruction) -> Callable[[dict, _State], None]:
        if isinstance(inst, BinOp):
            return _compile_binop(inst, self._getter(inst.lhs), self._getter(inst.rhs))
        if isinstance(inst, ICmp):
            return _compile_icmp(inst, self._getter(inst.lhs), self._getter(inst.rhs))
        if isinstance(inst, Cast):
            return _compile_cast(inst, self._getter(inst.value))
        if isinstance(inst, Select):
            name = inst.result
            c, t, f = self._getter(inst.cond), self._getter(inst.if_true), self._getter(inst.if_false)

            def select(env, st):
                env[name] = t(env) if c(env) else f(env)

            return select
        if isinstance(inst, Alloca):
            name, size, label = inst.result, inst.ty.size(), f"%{inst.result}"

            def alloca(env, st):
                p = st.allocate(size, label)
                env["\0frame"].append(p.alloc)
                env[name] = p

            return alloca
        if isinstance(inst, Load):
            name, ty, ptr = inst.result, inst.ty, self._getter(inst.ptr)

            def load(env, st):
                env[name] = st.load(ptr(env), ty)

            return load
        if isinstance(inst, Store):
            ty, ptr = inst.ty, self._getter(inst.ptr)
            if isinstance(inst.value, (ConstBytes, ConstArray, ZeroInit)) or isinstance(ty, ArrayType):
                data = _const_bytes(inst.value, ty)

                def store_agg(env, st):
                    st.store_bytes(ptr(env), data)

                return store_agg
            val = self._getter(inst.value)

            def store(env, st):
                st.store(ptr(env), ty, val(env))

            return store
        if isinstance(inst, Gep):
            return _compile_gep(inst, self._getter(inst.ptr), [self._getter(v) for _, v in inst.indices])
        if isinstance(inst, Call):
            return self._compile_call(inst)
        raise TypeError(f"cannot execute {inst!r}")

    def _compile_call(self, inst: Call):
        callee = self.module.get_function(inst.callee)
        if callee is None:
            raise UnknownFunction(f"call to unknown @{inst.callee}")
        getters = [self._getter(v) for _, v in inst.args]
        types = [t for t, _ in inst.args]
        name = inst.result
        if not callee.is_declaration:
            target = inst.callee

            def call(env, st):
                args = [g(env) for g in getters]
                r = self._call(self._compiled(target), args, st)
                if name is not None:
                    env[name] = r

            return call
        ret_ty = callee.ret_ty

        def extern(env, st):
            args = [g(env) for g in getters]
            r = self._extern(inst.callee, args, types, ret_ty, st)
            if name is not None:
                env[name] = r

        return extern

    def _compile_term(self, term: Terminator):
        if isinstance(term, Ret):
            if term.value is None:
                return lambda env, st: ("ret", None)
            g = self._getter(term.value)
            return lambda env, st: ("ret", g(env))
        if isinstance(term, Br):
            target = ("br", term.target)
            return lambda env, st: target
        if isinstance(term, CondBr):
            c = self._getter(term.cond)
            yes, no = ("br", term.if_true), ("br", term.if_false)
            return lambda env, st: yes if c(env) else no
        if isinstance(term, Switch):
            g = self._getter(term.value)
            m = term.ty.mask
            table = {v & m: ("br", lbl) for v, lbl in term.cases}
            default = ("br", term.default)
            return lambda env, st: table.get(g(env), default)
        if isinstance(term, Unreachable):
            def unreachable(env, st):
                raise _Trap(TrapKind.UNREACHABLE)

            return unreachable
        raise TypeError(f"cannot execute {term!r}")

    # -- execution ---------------------------------------------------------

    def _call(self, cf: _Function, args: list, st: _State):
        if st.depth >= MAX_CALL_DEPTH:
            raise _Trap(TrapKind.STACK_OVERFLOW)
        st.depth += 1
        env: dict = {p.name: a for p, a in zip(cf.fn.params, args)}
        frame: list[int] = []
        env["\0frame"] = frame
        track = cf.fn.name == st.entry
        hits = st.hits
        blocks = cf.blocks
        label = cf.entry
        prev = None
        try:
            while True:
                blk = blocks[label]
                if st.steps >= st.fuel:
                    raise _Fuel
                if track:
                    hits[label] = hits.get(label, 0) + 1
                if blk.phis:
                    incoming = []
                    for name, arms in blk.phis:
                        if st.steps >= st.fuel:
                            raise _Fuel
                        st.steps += 1
                        incoming.append((name, arms[prev](env)))
                    for name, v in incoming:
                        env[name] = v
                for op in blk.ops:
                    if st.steps >= st.fuel:
                        raise _Fuel
                    st.steps += 1
                    op(env, st)
                if st.steps >= st.fuel:
                    raise _Fuel
                st.steps += 1
                kind, x = blk.term(env, st)
                if kind == "ret":
                    return x
                prev, label = label, x
        finally:
            for aid in frame:
                st.allocs[aid].live = False
            st.depth -= 1

    def _extern(self, callee: str, args: list, types: list, ret_ty: IrType, st: _State):
        st.events.append(ExternEvent(callee, tuple(st.render(a, t) for a, t in zip(args, types))))
        if self.policy.builtins:
            model = _BUILTINS.get(_builtin_key(callee))
            if model is not None:
                return model(st, args)
        if callee in self.policy.default_return:
            return _fit(self.policy.default_return[callee], ret_ty)
        if self.policy.unknown_callee is UnknownCalleePolicy.TRAP:
            raise _Trap(TrapKind.UNKNOWN_CALLEE, callee)
        if isinstance(ret_ty, VoidType):
            return None
        return _fit(0, ret_ty)


def _fit(v: int, ty: IrType) -> RuntimeValue:
    if isinstance(ty, IntType):
        return v & ty.mask
    if isinstance(ty, PtrType):
        return NULL
    return None


# --- instruction kernels -------------------------------------------------


def _compile_binop(inst: BinOp, a: Getter, b: Getter):
    name, width, op = inst.result, inst.ty.width, inst.op
    m = _mask(width)
    smin = 1 << (width - 1)

    if op == "add":
        def f(env, st):
            env[name] = (a(env) + b(env)) & m
    elif op == "sub":
        def f(env, st):
            env[name] = (a(env) - b(env)) & m
    elif op == "mul":
        def f(env, st):
            env[name] = (a(env) * b(env)) & m
    elif op == "and":
        def f(env, st):
            env[name] = a(env) & b(env)
    elif op == "or":
        def f(env, st):
            env[name] = a(env) | b(env)
    elif op == "xor":
        def f(env, st):
            env[name] = a(env) ^ b(env)
    elif op in ("udiv", "urem"):
        rem = op == "urem"

        def f(env, st):
            x, y = a(env), b(env)
            if y == 0:
                raise _Trap(TrapKind.DIV_BY_ZERO)
            env[name] = x % y if rem else x // y
    elif op in ("sdiv", "srem"):
        rem = op == "srem"

        def f(env, st):
            x, y = a(env), b(env)
            if y == 0:
                raise _Trap(TrapKind.DIV_BY_ZERO)
            if x == smin and y == m and width > 1:
                raise _Trap(TrapKind.SDIV_OVERFLOW)
            sx, sy = _signed(x, width), _signed(y, width)
            q = abs(sx) // abs(sy)
            if (sx < 0) != (sy < 0):
                q = -q
            env[name] = (sx - sy * q) & m if rem else q & m
    elif op in ("shl", "lshr", "ashr"):
        def f(env, st):
            x, s = a(env), b(env)
            if s >= width:
                raise _Trap(TrapKind.SHIFT_OVERFLOW)
            if op == "shl":
                env[name] = (x << s) & m
            elif op == "lshr":
                env[name] = x >> s
            else:
                env[name] = (_signed(x, width) >> s) & m
    else:
        raise TypeError(f"unknown binary op {op}")
    return f


_UNSIGNED_CMP = {
    "eq": lambda x, y: x == y,
    "ne": lambda x, y: x != y,
    "ult": lambda x, y: x < y,
    "ule": lambda x, y: x <= y,
    "ugt": lambda x, y: x > y,
    "uge": lambda x, y: x >= y,
}
_SIGNED_CMP = {
    "slt": lambda x, y: x < y,
    "sle": lambda x, y: x <= y,
    "sgt": lambda x, y: x > y,
    "sge": lambda x, y: x >= y,
}


def _compile_icmp(inst: ICmp, a: Getter, b: Getter):
    name, pred = inst.result, inst.pred
    if isinstance(inst.ty, PtrType):
        def f(env, st):
            x, y = a(env), b(env)
            if x.alloc != y.alloc:
                if pred in ("eq", "ne") and (x == NULL or y == NULL):
                    env[name] = int((x == y) == (pred == "eq"))
                    return
                raise _Trap(TrapKind.POINTER_COMPARE)
            cmp = _UNSIGNED_CMP.get(pred) or _SIGNED_CMP[pred]
            env[name] = int(cmp(x.offset, y.offset))

        return f
    width = inst.ty.width
    if pred in _UNSIGNED_CMP:
        cmp = _UNSIGNED_CMP[pred]

        def f(env, st):
            env[name] = int(cmp(a(env), b(env)))
    else:
        cmp = _SIGNED_CMP[pred]

        def f(env, st):
            env[name] = int(cmp(_signed(a(env), width), _signed(b(env), width)))
    return f


def _compile_cast(inst: Cast, a: Getter):
    name = inst.result
    if inst.op == "bitcast":  # pointers carry no type at run time
        def f(env, st):
            env[name] = a(env)
        return f
    src, dst = inst.src_ty.width, inst.dst_ty.width
    m = _mask(dst)
    if inst.op == "sext":
        def f(env, st):
            env[name] = _signed(a(env), src) & m
    else:  # zext leaves the bits alone; trunc masks them
        def f(env, st):
            env[name] = a(env) & m
    return f


def _compile_gep(inst: Gep, base: Getter, idx: list[Getter]):
    name = inst.result
    widths = [t.width for t, _ in inst.indices]
    strides = []
    ty: IrType = inst.src_ty
    strides.append(ty.size())
    for _ in inst.indices[1:]:
        ty = ty.elem  # validated as ArrayType
        strides.append(ty.size())
    steps = list(zip(idx, widths, strides))

    def f(env, st):
        p = base(env)
        if not isinstance(p, Ptr):
            raise _Trap(TrapKind.BAD_POINTER)
        off = p.offset
        for g, w, stride in steps:
            off += _signed(g(env), w) * stride
        env[name] = Ptr(p.alloc, off)

    return f


# --- builtin models of common libc externs ------------------------------------


def _builtin_key(callee: str) -> str:
    if callee.startswith("llvm.memcpy") or callee.startswith("llvm.memmove"):
        return "memcpy"
    if callee.startswith("llvm.memset"):
        return "memset"
    return callee


def _b_memcpy(st: _State, args):
    dst, src, n = args[0], args[1], args[2]
    st.store_bytes(dst, st.read_bytes(src, n))
    return dst


def _b_memset(st: _State, args):
    dst, val, n = args[0], args[1], args[2]
    st.region(dst, n)  # trap before building an oversized fill
    st.store_bytes(dst, bytes([val & 0xFF]) * n)
    return dst


def _b_strlen(st: _State, args):
    return len(st.c_string(args[0]))


def _b_strcpy(st: _State, args):
    data = st.c_string(args[1]) + b"\0"
    st.store_bytes(args[0], data)
    return args[0]


def _b_strncpy(st: _State, args):
    n = args[2]
    st.region(args[0], n)
    raw = bytearray()
    a = st.region(args[1], 0)
    off = args[1].offset
    while len(raw) < n:
        if off >= len(a.data):
            raise _Trap(TrapKind.OOB_ACCESS, "strncpy source")
        if a.data[off] == 0:
            break
        raw.append(a.data[off])
        off += 1
    st.store_bytes(args[0], bytes(raw).ljust(n, b"\0"))
    return args[0]


def _heap(st: _State, size: int) -> Ptr:
    if size > MAX_HEAP_ALLOC:
        return NULL
    st.heap_count += 1
    return st.allocate(size, f"heap{st.heap_count}")


def _b_malloc(st: _State, args):
    return _heap(st, args[0])


def _b_calloc(st: _State, args):
    return _heap(st, args[0] * args[1])


def _b_free(st: _State, args):
    p = args[0]
    if p == NULL:
        return None
    a = st.region(p, 0)
    if p.offset != 0 or not a.label.startswith("heap"):
        raise _Trap(TrapKind.BAD_POINTER, "free of non-heap pointer")
    a.live = False
    return None


_BUILTINS = {
    "memcpy": _b_memcpy,
    "memmove": _b_memcpy,
    "memset": _b_memset,
    "strlen": _b_strlen,
    "strcpy": _b_strcpy,
    "strncpy": _b_strncpy,
    "malloc": _b_malloc,
    "calloc": _b_calloc,
    "free": _b_free,
}


# --- module-level conveniences ------------------------------------------------

_MACHINES: OrderedDict[tuple[int, int], tuple[IrModule, Machine]] = OrderedDict()
_CACHE_SIZE = 64


def machine_for(module: IrModule, policy: ExternPolicy | None = None) -> Machine:
    key = (id(module), id(policy))
    hit = _MACHINES.get(key)
    if hit is not None and hit[0] is module:
        _MACHINES.move_to_end(key)
        return hit[1]
    m = Machine(module, policy)
    _MACHINES[key] = (module, m)
    while len(_MACHINES) > _CACHE_SIZE:
        _MACHINES.popitem(last=False)
    return m


def run_function(
    m: IrModule,
    name: str,
    args: Sequence[Arg],
    fuel: int = DEFAULT_FUEL,
    policy: ExternPolicy | None = None,
) -> ExecResult:
    return machine_for(m, policy).run(name, args, fuel)


# --- input vectors ---------------------------------------------------------------


def _boundaries(width: int) -> list[int]:
    return [wrap(v, width) for v in (0, 1, -1, -(1 << (width - 1)), (1 << (width - 1)) - 1)]


def _param_width(ty: IrType) -> int:
    if isinstance(ty, IntType):
        return ty.width
    if isinstance(ty, PtrType):
        if ty.pointee is None:
            return 32
        if isinstance(ty.pointee, IntType):
            return ty.pointee.width
    raise UnsupportedParamType(f"cannot generate inputs for {ty}")


def gen_vectors(sig: FuncType, n: int, seed: int) -> list[list[Arg]]:
    """Seeded argument vectors for ``sig``.

    The first ``5 * arity`` vectors walk the boundary set
    ``{0, 1, -1, min, max}`` (vector ``k`` gives parameter ``j`` boundary
    ``(k + j * (k // 5)) % 5``, so the walk starts at all-zeros and then
    shears the parameters against each other); the rest are SplitMix64 draws.
    Pointer parameters get a fresh 16-element buffer whose last element is
    zero, so string scans stay inside it.
    """
    widths = [_param_width(p) for p in sig.params]
    rng = SplitMix64(seed)
    arity = len(widths)
    out: list[list[Arg]] = []
    for k in range(n):
        vec: list[Arg] = []
        boundary = k < 5 * arity
        for j, (ty, w) in enumerate(zip(sig.params, widths)):
            if isinstance(ty, PtrType):
                vals = [wrap(rng.next_u64(), w) for _ in range(BUFFER_LEN - 1)] + [0]
                if boundary:
                    b = _boundaries(w)[(k + j * (k // 5)) % 5]
                    vals[0] = b
                vec.append(Buffer(w, tuple(vals)))
            elif boundary:
                vec.append(_boundaries(w)[(k + j * (k // 5)) % 5])
            else:
                vec.append(wrap(rng.next_u64(), w))
        out.append(vec)
    return out
