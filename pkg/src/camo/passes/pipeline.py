"""Seeded composition of the four passes over a whole module."""

from __future__ import annotations

from dataclasses import asdict
from typing import Callable

from camo.errors import CamoError, PassError, ValidationError
from camo.ir.model import IrFunction, IrModule
from camo.ir.validate import check
from camo.passes.bogus import add_opaque_globals, choose_opaque_globals, insert_bogus_flow
from camo.passes.config import CANONICAL_ORDER, ObfConfig, ObfReport, PassContext, PassStats
from camo.passes.flatten import flatten
from camo.passes.split import split_blocks
from camo.passes.substitution import substitute_instructions
from camo.rng import SplitMix64, function_stream

PassFn = Callable[[IrFunction, ObfConfig, SplitMix64, PassContext], IrFunction]

PASSES: dict[str, PassFn] = {
    "sub": substitute_instructions,
    "bcf": insert_bogus_flow,
    "split": split_blocks,
    "flatten": flatten,
}


def run_pipeline(m: IrModule, cfg: ObfConfig) -> tuple[IrModule, ObfReport]:
    """Apply ``cfg.pass_list`` to every defined function of ``m``.

    Each function draws from its own stream seeded by ``seed ^ hash(name)``,
    so the result does not depend on function order.
    """
    check(m, "run_pipeline")
    report = ObfReport(seed=cfg.seed, config=asdict(cfg))
    report.config["pass_list"] = list(cfg.pass_list)
    for name in cfg.pass_list:
        report.passes[name] = PassStats()

    uses_bcf = "bcf" in cfg.pass_list and cfg.bcf_probability > 0
    opaque = choose_opaque_globals(m) if uses_bcf else {}
    context_module = add_opaque_globals(m, opaque) if uses_bcf else m

    functions = []
    any_predicate = False
    for fn in m.functions:
        if fn.is_declaration:
            functions.append(fn)
            continue
        rng = function_stream(cfg.seed, fn.name)
        for pass_name in cfg.pass_list:
            ctx = PassContext(module=context_module, opaque_globals=opaque)
            try:
                fn = PASSES[pass_name](fn, cfg, rng, ctx)
            except CamoError as exc:
                raise PassError(pass_name, fn.name, exc) from exc
            report.passes[pass_name].add(ctx.stats)
            if ctx.junk_blocks:
                report.junk_blocks.setdefault(fn.name, []).extend(ctx.junk_blocks)
            if ctx.stats.predicates_inserted:
                any_predicate = True
            if pass_name == "flatten" and ctx.stats.states_assigned:
                report.flattened.append(fn.name)
        functions.append(fn)

    out = IrModule(m.globals, tuple(functions))
    if any_predicate:
        out = add_opaque_globals(out, opaque)
    try:
        check(out, "run_pipeline")
    except ValidationError as exc:  # a pass bug, not a user error
        raise PassError(",".join(cfg.pass_list), "<module>", exc) from exc
    return out, report


def parse_pass_list(text: str) -> tuple[str, ...]:
    """``"split,sub"`` -> ``("split", "sub")``; empty text selects nothing."""
    items = tuple(p.strip() for p in text.split(",") if p.strip())
    ObfConfig(seed=0, pass_list=items)  # validates names and uniqueness
    return items


def canonical_order(passes: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(p for p in CANONICAL_ORDER if p in passes)
