from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camo.errors import ArgMismatch, UnknownFunction, UnsupportedParamType
from camo.interp import (
    BUFFER_LEN,
    Buffer,
    ExternEvent,
    ExternPolicy,
    OutOfFuel,
    Returned,
    Trapped,
    TrapKind,
    UnknownCalleePolicy,
    gen_vectors,
    run_function,
)
from camo.ir.parser import parse_module
from camo.ir.types import ConstInt, FuncType, IntType, PtrType

from conftest import load

I32 = IntType(32)

LOOP_FOREVER = """
define i32 @spin() {
entry:
  br label %loop
loop:
  br label %loop
}
"""


def single(body: str, ret: str = "i32") -> str:
    return f"define {ret} @t() {{\nentry:\n{body}\n}}\n"


def test_calculate_returns_eight_in_two_steps():
    r = run_function(load("calculate_printf.ll"), "calculate", [5, 3])
    assert r.outcome == Returned(8)
    assert r.steps == 2


def test_main_emits_printf_event():
    r = run_function(load("calculate_printf.ll"), "main", [])
    assert r.outcome == Returned(0)
    # the 12-byte literal is stored into a 10-byte slot; only 10 bytes land
    assert r.events == (ExternEvent("printf", ("Result: %d", 8)),)


def test_add_wraps():
    m = parse_module(single("  %x = add i32 2147483647, 1\n  ret i32 %x"))
    assert run_function(m, "t", []).outcome == Returned(-2147483648)


@pytest.mark.parametrize(
    "expr, kind",
    [
        ("sdiv i32 1, 0", TrapKind.DIV_BY_ZERO),
        ("udiv i32 1, 0", TrapKind.DIV_BY_ZERO),
        ("srem i32 1, 0", TrapKind.DIV_BY_ZERO),
        ("urem i32 1, 0", TrapKind.DIV_BY_ZERO),
        ("sdiv i32 -2147483648, -1", TrapKind.SDIV_OVERFLOW),
        ("srem i32 -2147483648, -1", TrapKind.SDIV_OVERFLOW),
        ("shl i32 1, 32", TrapKind.SHIFT_OVERFLOW),
    ],
)
def test_arithmetic_traps(expr, kind):
    m = parse_module(single(f"  %x = {expr}\n  ret i32 %x"))
    out = run_function(m, "t", []).outcome
    assert isinstance(out, Trapped) and out.kind is kind


def test_division_results():
    m = load("div_traps.ll")
    assert run_function(m, "ratio", [-7, 2]).outcome == Returned(-3 + -1)
    assert run_function(m, "ratio", [7, 0]).outcome == Trapped(TrapKind.DIV_BY_ZERO)


def test_infinite_loop_runs_out_of_fuel_exactly():
    r = run_function(parse_module(LOOP_FOREVER), "spin", [], fuel=1000)
    assert isinstance(r.outcome, OutOfFuel)
    assert r.steps == 1000


def test_icmp_yields_i1():
    m = parse_module(single("  %c = icmp slt i32 -1, 0\n  %z = zext i1 %c to i32\n  ret i32 %z"))
    assert run_function(m, "t", []).outcome == Returned(1)


def test_out_of_bounds_store_traps():
    m = load("unchecked_index.ll")
    ok = run_function(m, "set_slot", [Buffer(32, (0,) * 4), 3, 9])
    assert ok.outcome == Returned(None)
    assert ok.arg_memory[0][12:16] == (9).to_bytes(4, "little")
    bad = run_function(m, "set_slot", [Buffer(32, (0,) * 4), 4, 9])
    assert bad.outcome == Trapped(TrapKind.OOB_ACCESS)


def test_use_after_free_traps():
    m = load("use_after_free.ll")
    assert run_function(m, "stale_read", [0, 5]).outcome == Returned(5)
    assert run_function(m, "stale_read", [1, 5]).outcome == Trapped(TrapKind.USE_AFTER_FREE)


def test_heap_round_trip():
    assert run_function(load("heap_buffer.ll"), "heap_sum", [4]).outcome == Returned(12)


def test_oversized_malloc_returns_null():
    text = (
        "define i1 @big() {\nentry:\n  %p = call ptr @malloc(i64 4294967296)\n"
        "  %z = icmp eq ptr %p, null\n  ret i1 %z\n}\ndeclare ptr @malloc(i64)\n"
    )
    assert run_function(parse_module(text), "big", []).outcome == Returned(1)


def test_strcpy_overflow_traps_and_fit_succeeds():
    m = load("string_copy.ll")
    short = Buffer(8, tuple(b"abc") + (0,))
    assert run_function(m, "greet", [short]).outcome == Returned(3)
    long = Buffer(8, tuple(b"abcdefghij") + (0,))
    assert run_function(m, "greet", [long]).outcome == Trapped(TrapKind.OOB_ACCESS)


def test_memset_memcpy_intrinsics():
    src = Buffer(8, tuple(range(1, 17)))
    assert run_function(load("memset_memcpy.ll"), "copy8", [src]).outcome == Returned(sum(range(1, 9)))


def test_internal_calls_are_not_events():
    r = run_function(load("calls_helper.ll"), "sum_of_squares", [3, 4])
    assert r.outcome == Returned(25)
    assert r.events == ()


def test_unreachable_traps():
    text = single("  unreachable")
    assert run_function(parse_module(text), "t", []).outcome == Trapped(TrapKind.UNREACHABLE)


def test_extern_policy_default_return_and_unknown_trap():
    text = "declare i32 @probe(i32)\n" + single("  %r = call i32 @probe(i32 7)\n  ret i32 %r")
    m = parse_module(text)
    assert run_function(m, "t", []).outcome == Returned(0)
    r = run_function(m, "t", [], policy=ExternPolicy(default_return={"probe": 42}))
    assert r.outcome == Returned(42)
    assert r.events == (ExternEvent("probe", (7,)),)
    strict = ExternPolicy(unknown_callee=UnknownCalleePolicy.TRAP)
    assert run_function(m, "t", [], policy=strict).outcome == Trapped(TrapKind.UNKNOWN_CALLEE)


def test_cross_allocation_pointer_compare_traps():
    text = single(
        "  %a = alloca i32\n  %b = alloca i32\n  %c = icmp ult ptr %a, %b\n  %z = zext i1 %c to i32\n  ret i32 %z"
    )
    assert run_function(parse_module(text), "t", []).outcome == Trapped(TrapKind.POINTER_COMPARE)


def test_globals_reset_between_runs():
    m = load("global_counter.ll")
    first = run_function(m, "bump_twice", [3])
    second = run_function(m, "bump_twice", [3])
    assert first.outcome == second.outcome == Returned(6)


def test_precondition_errors():
    m = load("calculate_printf.ll")
    with pytest.raises(UnknownFunction):
        run_function(m, "nope", [])
    with pytest.raises(UnknownFunction):
        run_function(m, "printf", [])
    with pytest.raises(ArgMismatch):
        run_function(m, "calculate", [1])
    with pytest.raises(ArgMismatch):
        run_function(m, "calculate", [ConstInt(IntType(64), 1), 2])


def test_block_hits_cover_only_visited_blocks():
    m = load("diamond_max.ll")
    r = run_function(m, "max2", [5, 1])
    assert r.block_hits == {"entry": 1, "then": 1, "join": 1}
    assert sum(r.block_hits.values()) <= r.steps


def test_determinism_including_events():
    m = load("printf_report.ll")
    runs = [run_function(m, "report", [12]) for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]
    assert runs[0].events == (ExternEvent("printf", ("value = %d\n", 12)),)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=-(2**31), max_value=2**31 - 1), st.integers(min_value=0, max_value=200))
def test_fuel_monotonicity(n, extra):
    m = load("collatz_steps.ll")
    fn = m.defined_functions()[0].name
    full = run_function(m, fn, [n])
    assert not isinstance(full.outcome, OutOfFuel)
    exact = run_function(m, fn, [n], fuel=full.steps)
    more = run_function(m, fn, [n], fuel=full.steps + extra)
    assert exact == full and more == full
    if full.steps > 1:
        assert isinstance(run_function(m, fn, [n], fuel=full.steps - 1).outcome, OutOfFuel)


# --- gen_vectors ------------------------------------------------------------------------


def test_vectors_start_with_boundaries():
    vs = gen_vectors(FuncType(I32, (I32, I32)), 2, seed=99)
    assert vs[0] == [0, 0]
    assert vs[1] == [1, 1]


def test_vectors_are_deterministic():
    sig = FuncType(I32, (I32, IntType(8)))
    assert gen_vectors(sig, 30, 7) == gen_vectors(sig, 30, 7)
    assert gen_vectors(sig, 30, 7) != gen_vectors(sig, 30, 8)


def test_vectors_n64_seed42_contain_boundaries():
    vs = gen_vectors(FuncType(I32, (I32,)), 64, 42)
    assert len(vs) == 64
    boundary = {0, 1, -1, -(2**31), 2**31 - 1}
    assert len({v[0] for v in vs} & boundary) >= 5
    assert all(-(2**31) <= v[0] < 2**31 for v in vs)


def test_boundary_walk_shears_parameters():
    vs = gen_vectors(FuncType(I32, (I32, I32)), 10, 0)
    lo, hi = -(2**31), 2**31 - 1
    assert [v[0] for v in vs[5:10]] == [0, 1, -1, lo, hi]
    assert [v[1] for v in vs[5:10]] == [1, -1, lo, hi, 0]


def test_pointer_params_get_terminated_buffers():
    vs = gen_vectors(FuncType(I32, (PtrType(IntType(8)), I32)), 12, 1)
    for v in vs:
        buf = v[0]
        assert isinstance(buf, Buffer) and buf.elem_width == 8
        assert len(buf.values) == BUFFER_LEN and buf.values[-1] == 0
    assert gen_vectors(FuncType(I32, (PtrType(),)), 1, 1)[0][0].elem_width == 32


def test_unsupported_param_type():
    from camo.ir.types import ArrayType

    with pytest.raises(UnsupportedParamType):
        gen_vectors(FuncType(I32, (PtrType(ArrayType(4, PtrType())),)), 1, 0)
