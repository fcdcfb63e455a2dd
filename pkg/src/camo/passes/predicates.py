"""Opaque predicates whose truth value holds for every global-state assignment."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from camo.ir.model import BinOp, ICmp, Instruction, Load, NameGen
from camo.ir.types import I1, I32, PTR, ConstInt, GlobalRef, LocalRef


class Truth(str, enum.Enum):
    ALWAYS_TRUE = "AlwaysTrue"
    ALWAYS_FALSE = "AlwaysFalse"


@dataclass(frozen=True)
class OpaquePredicate:
    instructions: tuple[Instruction, ...]
    result: str
    truth: Truth
    globals_used: tuple[str, ...]


def consecutive_product_even(names: NameGen, g: str) -> OpaquePredicate:
    """``g * (g + 1)`` is even for every ``g``, also under 32-bit wrapping."""
    v, v1, prod, low, res = (names.fresh("op") for _ in range(5))
    insts = (
        Load(v, I32, PTR, GlobalRef(g)),
        BinOp(v1, "add", I32, LocalRef(v), ConstInt(I32, 1)),
        BinOp(prod, "mul", I32, LocalRef(v), LocalRef(v1)),
        BinOp(low, "and", I32, LocalRef(prod), ConstInt(I32, 1)),
        ICmp(res, "eq", I32, LocalRef(low), ConstInt(I32, 0)),
    )
    return OpaquePredicate(insts, res, Truth.ALWAYS_TRUE, (g,))


def equal_and_unequal(names: NameGen, x: str, y: str) -> OpaquePredicate:
    """``x == y && x != y`` cannot hold for any pair."""
    vx, vy, eq, ne, res = (names.fresh("op") for _ in range(5))
    insts = (
        Load(vx, I32, PTR, GlobalRef(x)),
        Load(vy, I32, PTR, GlobalRef(y)),
        ICmp(eq, "eq", I32, LocalRef(vx), LocalRef(vy)),
        ICmp(ne, "ne", I32, LocalRef(vx), LocalRef(vy)),
        BinOp(res, "and", I1, LocalRef(eq), LocalRef(ne)),
    )
    return OpaquePredicate(insts, res, Truth.ALWAYS_FALSE, (x, y))


FAMILIES = ("T1", "F1")


def build_predicate(family: str, names: NameGen, globals_: dict[str, str]) -> OpaquePredicate:
    """``globals_`` maps the roles ``g``, ``x`` and ``y`` to module global names."""
    if family == "T1":
        return consecutive_product_even(names, globals_["g"])
    if family == "F1":
        return equal_and_unequal(names, globals_["x"], globals_["y"])
    raise ValueError(f"unknown predicate family {family!r}")
