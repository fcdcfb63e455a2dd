"""Pass configuration and the statistics each pass reports back."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from camo.ir.model import IrModule

PASS_NAMES = ("sub", "bcf", "split", "flatten")
CANONICAL_ORDER = PASS_NAMES


@dataclass(frozen=True)
class ObfConfig:
    seed: int
    bcf_probability: float = 0.3
    split_chunk: int = 3
    subst_rounds: int = 1
    pass_list: tuple[str, ...] = PASS_NAMES

    def __post_init__(self) -> None:
        if not 0.0 <= self.bcf_probability <= 1.0:
            raise ValueError(f"bcf_probability must lie in [0, 1], got {self.bcf_probability}")
        if self.split_chunk < 1:
            raise ValueError("split_chunk must be at least 1")
        if self.subst_rounds < 0:
            raise ValueError("subst_rounds must be non-negative")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        unknown = [p for p in self.pass_list if p not in PASS_NAMES]
        if unknown:
            raise ValueError(f"unknown passes: {', '.join(unknown)}")
        if len(set(self.pass_list)) != len(self.pass_list):
            raise ValueError("pass names must be unique")
        object.__setattr__(self, "pass_list", tuple(self.pass_list))

    @classmethod
    def all_passes(cls, seed: int, **kw) -> ObfConfig:
        return cls(seed=seed, pass_list=PASS_NAMES, **kw)


@dataclass
class PassStats:
    blocks_processed: int = 0
    blocks_split: int = 0
    predicates_inserted: int = 0
    instructions_substituted: int = 0
    states_assigned: int = 0

    def add(self, other: PassStats) -> None:
        for k, v in asdict(other).items():
            setattr(self, k, getattr(self, k) + v)


@dataclass
class PassContext:
    """Module-level facts a per-function pass may need.

    ``module`` resolves callees and globals during validation; bcf records
    the opaque-predicate globals it relies on in ``opaque_globals`` and its
    dead blocks in ``junk_blocks`` so callers can probe their coverage.
    """

    module: IrModule | None = None
    stats: PassStats = field(default_factory=PassStats)
    opaque_globals: dict[str, str] = field(default_factory=dict)
    junk_blocks: list[str] = field(default_factory=list)


@dataclass
class ObfReport:
    seed: int
    config: dict
    passes: dict[str, PassStats] = field(default_factory=dict)
    junk_blocks: dict[str, list[str]] = field(default_factory=dict)
    flattened: list[str] = field(default_factory=list)

    def totals(self) -> PassStats:
        total = PassStats()
        for s in self.passes.values():
            total.add(s)
        return total

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config,
            "passes": {k: asdict(v) for k, v in self.passes.items()},
            "totals": asdict(self.totals()),
            "junk_blocks": self.junk_blocks,
            "flattened": self.flattened,
        }
