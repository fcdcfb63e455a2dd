"""IR types and operand values."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

INT_WIDTHS = (1, 8, 16, 32, 64)
POINTER_SIZE = 8


class IrType:
    """Base class for every IR type."""

    def size(self) -> int:
        raise TypeError(f"type {self} has no storage size")


@dataclass(frozen=True)
class VoidType(IrType):
    def __str__(self) -> str:
        return "void"


@dataclass(frozen=True)
class IntType(IrType):
    width: int

    def __str__(self) -> str:
        return f"i{self.width}"

    def size(self) -> int:
        return (self.width + 7) // 8

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1

    @property
    def min_signed(self) -> int:
        return -(1 << (self.width - 1))

    @property
    def max_signed(self) -> int:
        return (1 << (self.width - 1)) - 1


@dataclass(frozen=True)
class PtrType(IrType):
    """Pointer, always printed as opaque ``ptr``.

    ``pointee`` remembers a typed spelling such as ``i8*`` from the input.
    It only guides input generation and takes no part in equality, matching
    LLVM's opaque-pointer model.
    """

    pointee: IrType | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return "ptr"

    def size(self) -> int:
        return POINTER_SIZE


@dataclass(frozen=True)
class ArrayType(IrType):
    length: int
    elem: IrType

    def __str__(self) -> str:
        return f"[{self.length} x {self.elem}]"

    def size(self) -> int:
        return self.length * self.elem.size()


@dataclass(frozen=True)
class FuncType(IrType):
    ret: IrType
    params: tuple[IrType, ...] = ()
    variadic: bool = False

    def __str__(self) -> str:
        parts = [str(p) for p in self.params]
        if self.variadic:
            parts.append("...")
        return f"{self.ret} ({', '.join(parts)})"


VOID = VoidType()
I1 = IntType(1)
I8 = IntType(8)
I16 = IntType(16)
I32 = IntType(32)
I64 = IntType(64)
PTR = PtrType()


def is_ptr(ty: IrType) -> bool:
    return isinstance(ty, PtrType)


def wrap(value: int, width: int) -> int:
    """Wrap ``value`` to a signed two's-complement integer of ``width`` bits.

    ``i1`` is the exception: it is kept as 0/1 so that ``true`` reads as 1.
    """
    value &= (1 << width) - 1
    if width > 1 and value >> (width - 1):
        value -= 1 << width
    return value


class Value:
    """Base class for instruction operands."""


@dataclass(frozen=True)
class LocalRef(Value):
    name: str

    def __str__(self) -> str:
        return f"%{format_name(self.name)}"


@dataclass(frozen=True)
class GlobalRef(Value):
    name: str

    def __str__(self) -> str:
        return f"@{format_name(self.name)}"


@dataclass(frozen=True)
class ConstInt(Value):
    type: IntType
    value: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", wrap(self.value, self.type.width))

    def __str__(self) -> str:
        if self.type.width == 1:
            return "true" if self.value else "false"
        return str(self.value)


@dataclass(frozen=True)
class Undef(Value):
    type: IrType

    def __str__(self) -> str:
        return "undef"


@dataclass(frozen=True)
class NullPtr(Value):
    def __str__(self) -> str:
        return "null"


@dataclass(frozen=True)
class ConstBytes(Value):
    """A ``c"..."`` byte-array constant."""

    data: bytes

    def __str__(self) -> str:
        out = []
        for b in self.data:
            ch = chr(b)
            if 0x20 <= b < 0x7F and ch not in '"\\':
                out.append(ch)
            else:
                out.append(f"\\{b:02X}")
        return 'c"' + "".join(out) + '"'


@dataclass(frozen=True)
class ZeroInit(Value):
    type: IrType

    def __str__(self) -> str:
        return "zeroinitializer"


@dataclass(frozen=True)
class ConstArray(Value):
    """An ``[i32 1, i32 2]`` aggregate of integer constants."""

    elem: IrType
    items: tuple[Value, ...]

    def __str__(self) -> str:
        return "[" + ", ".join(f"{self.elem} {v}" for v in self.items) + "]"


_PLAIN_NAME = re.compile(r"[A-Za-z$._-][A-Za-z0-9$._-]*|[0-9]+")


def format_name(name: str) -> str:
    """Render an identifier, quoting it when it leaves the plain charset."""
    if _PLAIN_NAME.fullmatch(name):
        return name
    escaped = "".join(
        c if 0x20 <= ord(c) < 0x7F and c not in '"\\' else f"\\{ord(c):02X}"
        for c in name
    )
    return f'"{escaped}"'
