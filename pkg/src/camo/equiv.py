"""Differential oracle: run two versions of a function on the same inputs.

Observable behaviour is the outcome (returned value or trap class), the
ordered extern-call trace, and the final contents of pointer arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from camo.errors import SignatureMismatch, UnknownFunction
from camo.interp import (
    DEFAULT_FUEL,
    Buffer,
    ExecResult,
    ExternPolicy,
    OutOfFuel,
    Returned,
    Trapped,
    gen_vectors,
    machine_for,
)
from camo.ir.model import IrModule

OBF_FUEL_FACTOR = 16
INCONCLUSIVE_SKIP_RATIO = 0.25


@dataclass(frozen=True)
class Equivalent:
    def __str__(self) -> str:
        return "Equivalent"


@dataclass(frozen=True)
class Diverged:
    index: int
    vector: tuple
    orig: dict
    obf: dict

    def __str__(self) -> str:
        return f"Diverged at vector {self.index} {list(self.vector)}: {self.orig} vs {self.obf}"


@dataclass(frozen=True)
class Inconclusive:
    reason: str

    def __str__(self) -> str:
        return f"Inconclusive ({self.reason})"


Verdict = Union[Equivalent, Diverged, Inconclusive]


@dataclass
class EquivalenceReport:
    function: str
    requested: int
    vectors_run: int
    skipped: int
    verdict: Verdict
    coverage: dict[str, int] = field(default_factory=dict)

    @property
    def equivalent(self) -> bool:
        return isinstance(self.verdict, Equivalent)

    def to_dict(self) -> dict:
        out = {
            "function": self.function,
            "requested": self.requested,
            "vectors_run": self.vectors_run,
            "skipped": self.skipped,
            "verdict": type(self.verdict).__name__,
            "coverage": self.coverage,
        }
        if isinstance(self.verdict, Diverged):
            out["diverged"] = {
                "index": self.verdict.index,
                "vector": list(self.verdict.vector),
                "orig": self.verdict.orig,
                "obf": self.verdict.obf,
            }
        elif isinstance(self.verdict, Inconclusive):
            out["reason"] = self.verdict.reason
        return out


def observable(r: ExecResult) -> tuple:
    o = r.outcome
    if isinstance(o, Returned):
        key: tuple = ("ret", o.value)
    elif isinstance(o, Trapped):
        key = ("trap", o.kind.value)  # trap class only; detail may legitimately move
    else:
        key = ("fuel",)
    return key, r.events, r.arg_memory


def summarize(r: ExecResult) -> dict:
    o = r.outcome
    if isinstance(o, Returned):
        outcome = f"Returned({o.value})"
    elif isinstance(o, Trapped):
        outcome = f"Trapped({o.kind.value})"
    else:
        outcome = "OutOfFuel"
    return {
        "outcome": outcome,
        "events": [[e.callee, list(e.args)] for e in r.events],
        "steps": r.steps,
    }


def _show_arg(a) -> object:
    if isinstance(a, Buffer):
        return {"buffer": list(a.values)}
    return a


def check_equivalence(
    orig: IrModule,
    obf: IrModule,
    fn: str,
    n: int = 64,
    seed: int = 0,
    fuel: int = DEFAULT_FUEL,
    policy: ExternPolicy | None = None,
    junk_blocks: Iterable[str] = (),
) -> EquivalenceReport:
    """Compare ``fn`` in both modules over ``gen_vectors(sig, n, seed)``.

    The obfuscated side gets ``16 * fuel``.  Vectors where either side runs
    out of fuel are skipped; more than a quarter skipped is Inconclusive.
    ``junk_blocks`` names blocks whose visit counts are summed into
    ``coverage`` (they should stay at zero).
    """
    f1, f2 = orig.get_function(fn), obf.get_function(fn)
    if f1 is None or f1.is_declaration:
        raise UnknownFunction(f"@{fn} is not defined in the original module")
    if f2 is None or f2.is_declaration:
        raise UnknownFunction(f"@{fn} is not defined in the obfuscated module")
    if f1.signature != f2.signature:
        raise SignatureMismatch(f"@{fn}: {f1.signature} vs {f2.signature}")

    policy = policy or ExternPolicy()
    m1, m2 = machine_for(orig, policy), machine_for(obf, policy)
    junk = list(junk_blocks)
    coverage = {label: 0 for label in junk}
    skipped = 0
    run = 0
    vectors = gen_vectors(f1.signature, n, seed)
    for i, vec in enumerate(vectors):
        a = m1.run(fn, vec, fuel)
        b = m2.run(fn, vec, fuel * OBF_FUEL_FACTOR)
        run += 1
        for label in junk:
            coverage[label] += b.block_hits.get(label, 0)
        if isinstance(a.outcome, OutOfFuel) or isinstance(b.outcome, OutOfFuel):
            skipped += 1
            continue
        if observable(a) != observable(b):
            verdict = Diverged(i, tuple(_show_arg(x) for x in vec), summarize(a), summarize(b))
            return EquivalenceReport(fn, n, run, skipped, verdict, coverage)
    if n and skipped / n > INCONCLUSIVE_SKIP_RATIO:
        verdict: Verdict = Inconclusive(f"{skipped} of {n} vectors ran out of fuel")
    else:
        verdict = Equivalent()
    return EquivalenceReport(fn, n, run, skipped, verdict, coverage)
