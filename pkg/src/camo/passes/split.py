"""Basic-block splitting: cut long blocks into chains joined by ``br``."""

from __future__ import annotations

from camo.ir.model import BasicBlock, Br, IrFunction, NameGen, Phi
from camo.ir.validate import check_function
from camo.passes.config import ObfConfig, PassContext
from camo.rng import SplitMix64


def split_blocks(
    fn: IrFunction, cfg: ObfConfig, rng: SplitMix64 | None = None, ctx: PassContext | None = None
) -> IrFunction:
    """Chunk every body longer than ``cfg.split_chunk`` instructions.

    The head keeps the original label and the phis, so incoming edges are
    untouched; successors' phis are relabelled to the last piece.  Cuts are
    at fixed offsets, so ``rng`` is accepted for interface symmetry only.
    """
    ctx = ctx or PassContext()
    check_function(fn, ctx.module, "split")
    if fn.is_declaration:
        return fn
    names = NameGen(fn.defined_names())
    k = cfg.split_chunk
    out: list[BasicBlock] = []
    tail_of: dict[str, str] = {}
    for b in fn.blocks:
        ctx.stats.blocks_processed += 1
        if len(b.body) <= k:
            out.append(b)
            continue
        chunks = [b.body[i : i + k] for i in range(0, len(b.body), k)]
        labels = [b.label] + [names.fresh(b.label) for _ in chunks[1:]]
        for i, chunk in enumerate(chunks):
            last = i == len(chunks) - 1
            term = b.term if last else Br(labels[i + 1])
            out.append(BasicBlock(labels[i], b.phis if i == 0 else (), chunk, term))
        tail_of[b.label] = labels[-1]
        ctx.stats.blocks_split += 1
    if tail_of:
        out = [
            BasicBlock(
                b.label,
                tuple(Phi(p.result, p.ty, tuple((v, tail_of.get(l, l)) for v, l in p.incoming)) for p in b.phis),
                b.body,
                b.term,
            )
            for b in out
        ]
    return check_function(fn.with_blocks(out), ctx.module, "split")
