"""Control-flow graph and dominator computation."""

from __future__ import annotations

from dataclasses import dataclass

from camo.errors import ValidationError
from camo.ir.model import IrFunction


@dataclass(frozen=True)
class Cfg:
    entry: str
    successors: dict[str, list[str]]
    predecessors: dict[str, list[str]]

    def reachable(self) -> set[str]:
        seen = {self.entry}
        stack = [self.entry]
        while stack:
            for s in self.successors[stack.pop()]:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return seen

    def reverse_postorder(self) -> list[str]:
        order: list[str] = []
        seen = {self.entry}
        # iterative DFS; successor order follows terminator operand order
        stack = [(self.entry, iter(self.successors[self.entry]))]
        while stack:
            node, it = stack[-1]
            for s in it:
                if s not in seen:
                    seen.add(s)
                    stack.append((s, iter(self.successors[s])))
                    break
            else:
                stack.pop()
                order.append(node)
        order.reverse()
        return order


def build_cfg(fn: IrFunction) -> Cfg:
    if fn.is_declaration or not fn.blocks:
        raise ValueError(f"@{fn.name} is a declaration")
    labels = fn.labels()
    known = set(labels)
    succs: dict[str, list[str]] = {}
    preds: dict[str, list[str]] = {lbl: [] for lbl in labels}
    missing = []
    for b in fn.blocks:
        out: list[str] = []
        for s in b.term.successors():
            if s not in known:
                missing.append(f"undefined label %{s} in @{fn.name}")
                continue
            # switch arms may repeat a target; the edge exists once
            if s not in out:
                out.append(s)
        succs[b.label] = out
    if missing:
        raise ValidationError(missing)
    for lbl in labels:
        for s in succs[lbl]:
            preds[s].append(lbl)
    return Cfg(labels[0], succs, preds)


def dominators(cfg: Cfg) -> dict[str, str | None]:
    """Immediate dominators of reachable blocks (Cooper, Harvey & Kennedy).

    The entry maps to None.  Unreachable blocks are absent.
    """
    rpo = cfg.reverse_postorder()
    index = {lbl: i for i, lbl in enumerate(rpo)}
    idom: dict[str, str | None] = {cfg.entry: cfg.entry}

    def intersect(a: str, b: str) -> str:
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for lbl in rpo[1:]:
            new = None
            for p in cfg.predecessors[lbl]:
                if p in idom:
                    new = p if new is None else intersect(p, new)
            if idom.get(lbl) != new:
                idom[lbl] = new
                changed = True
    idom[cfg.entry] = None
    return idom


def dominates(idom: dict[str, str | None], a: str, b: str) -> bool:
    """True if block ``a`` dominates block ``b`` (reflexive)."""
    node: str | None = b
    while node is not None:
        if node == a:
            return True
        node = idom.get(node)
    return False
