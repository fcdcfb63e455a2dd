"""Repeated zero-shot trials, majority voting and run persistence.

A run directory holds::

    trials.jsonl      one TrialRecord per line, ordered by (sample, kind, trial)
    majorities.json   one MajorityResult per (sample, kind)
    run.json          adapter, kinds, repeats and settings used
    raw/              request/response bodies (HTTP adapters only)
"""

from __future__ import annotations

import json
import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from camo.bench.adapters import Adapter, AdapterUnavailable, RequestKey
from camo.bench.prompts import (
    Invalid,
    PromptKind,
    Verdict,
    build_prompt,
    parse_verdict,
    verdict_from_json,
    verdict_to_json,
)
from camo.dataset import Manifest
from camo.errors import CamoError

log = logging.getLogger(__name__)

DEFAULT_REPEATS = 3
DEFAULT_REASKS = 2
DEFAULT_IN_FLIGHT = 2


class MixedKeyError(CamoError):
    pass


class MissingArtifact(CamoError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    sample_id: str
    kind: str
    trial: int
    adapter_id: str
    raw_response: str
    verdict: Verdict
    attempts: int = 1
    responses: tuple[str, ...] = ()
    error: str | None = None
    latency_ms: int = 0
    timestamp: str = ""

    def to_json(self) -> dict:
        d = {
            "sample": self.sample_id,
            "kind": self.kind,
            "trial": self.trial,
            "adapter": self.adapter_id,
            "raw": self.raw_response,
            "attempts": self.attempts,
            "responses": list(self.responses),
            "error": self.error,
            "latency_ms": self.latency_ms,
            "timestamp": self.timestamp,
        }
        d.update(verdict_to_json(self.verdict))
        return d

    @classmethod
    def from_json(cls, d: dict) -> TrialRecord:
        return cls(
            sample_id=d["sample"],
            kind=d["kind"],
            trial=d["trial"],
            adapter_id=d["adapter"],
            raw_response=d["raw"],
            verdict=verdict_from_json(d, d["raw"]),
            attempts=d.get("attempts", 1),
            responses=tuple(d.get("responses", ())),
            error=d.get("error"),
            latency_ms=d.get("latency_ms", 0),
            timestamp=d.get("timestamp", ""),
        )


@dataclass(frozen=True)
class MajorityResult:
    sample_id: str
    kind: str
    final: str  # "Secure" | "Insecure" | "Inconclusive"
    votes: dict[str, int] = field(default_factory=dict)
    valid_count: int = 0

    def to_json(self) -> dict:
        return {
            "sample": self.sample_id,
            "kind": self.kind,
            "final": self.final,
            "votes": self.votes,
            "valid_count": self.valid_count,
        }

    @classmethod
    def from_json(cls, d: dict) -> MajorityResult:
        return cls(d["sample"], d["kind"], d["final"], dict(d["votes"]), d["valid_count"])


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def run_trials(
    sample_id: str,
    kind: PromptKind | str,
    code: str,
    adapter: Adapter,
    repeats: int = DEFAULT_REPEATS,
    reasks: int = DEFAULT_REASKS,
) -> list[TrialRecord]:
    """Query ``adapter`` ``repeats`` times, each a fresh request with the prompt alone.

    An Invalid verdict is re-asked up to ``reasks`` times within the same
    trial.  Adapter failures count as Invalid and are recorded, not raised.
    Offline adapters get zero latency and an empty timestamp so that their
    records are reproducible byte for byte.
    """
    kind = PromptKind(kind)
    prompt = build_prompt(kind, code)
    records = []
    for trial in range(1, repeats + 1):
        responses: list[str] = []
        verdict: Verdict = Invalid("")
        error = None
        started = time.monotonic()
        stamp = "" if adapter.offline else _now()
        attempts = 0
        for attempt in range(1, reasks + 2):
            attempts = attempt
            key = RequestKey(sample_id, kind.value, trial, attempt)
            try:
                completion = adapter.complete(prompt, key)
            except AdapterUnavailable as exc:
                error = f"AdapterUnavailable: {exc}"
                verdict = Invalid("")
                break
            responses.append(completion.text)
            verdict = parse_verdict(completion.text)
            _log_raw(adapter, key, completion)
            if not isinstance(verdict, Invalid):
                error = None
                break
        latency = 0 if adapter.offline else int((time.monotonic() - started) * 1000)
        records.append(
            TrialRecord(
                sample_id,
                kind.value,
                trial,
                adapter.adapter_id,
                responses[-1] if responses else "",
                verdict,
                attempts,
                tuple(responses),
                error,
                latency,
                stamp,
            )
        )
    return records


def _log_raw(adapter: Adapter, key: RequestKey, completion) -> None:
    raw_dir = getattr(adapter, "raw_dir", None)
    if raw_dir is None or completion.request is None:
        return
    raw_dir.mkdir(parents=True, exist_ok=True)
    name = f"{key.sample_id}__{key.kind}__{key.trial}"
    if key.attempt > 1:
        name += f".retry{key.attempt - 1}"
    doc = {"request": completion.request, "response": completion.response}
    (raw_dir / f"{name}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def majority(trials: Sequence[TrialRecord]) -> MajorityResult:
    if not trials:
        raise MixedKeyError("no trials to aggregate")
    keys = {(t.sample_id, t.kind) for t in trials}
    if len(keys) != 1:
        raise MixedKeyError(f"trials mix samples or kinds: {sorted(keys)}")
    sample_id, kind = keys.pop()
    tally = Counter(str(t.verdict) for t in trials)
    votes = {"Secure": tally["Secure"], "Insecure": tally["Insecure"], "Invalid": tally["Invalid"]}
    valid = votes["Secure"] + votes["Insecure"]
    if valid < 2 or votes["Secure"] == votes["Insecure"]:
        final = "Inconclusive"
    else:
        final = "Secure" if votes["Secure"] > votes["Insecure"] else "Insecure"
    return MajorityResult(sample_id, kind, final, votes, valid)


@dataclass
class BenchRun:
    directory: Path
    trials: list[TrialRecord]
    majorities: list[MajorityResult]


def run_bench(
    manifest: Manifest,
    adapter: Adapter,
    kinds: Iterable[PromptKind | str],
    run_dir: Path,
    repeats: int = DEFAULT_REPEATS,
    reasks: int = DEFAULT_REASKS,
    max_in_flight: int = DEFAULT_IN_FLIGHT,
) -> BenchRun:
    kinds = [PromptKind(k) for k in kinds]
    jobs = []
    for s in manifest.samples:
        for kind in kinds:
            code = manifest.read(s.id, kind.artifact)
            if code is None:
                raise MissingArtifact(f"sample {s.id} has no {kind.artifact} artifact for {kind.value}")
            jobs.append((s.id, kind, code))

    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    if hasattr(adapter, "raw_dir"):
        adapter.raw_dir = run_dir / "raw"

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        batches = list(pool.map(lambda j: run_trials(j[0], j[1], j[2], adapter, repeats, reasks), jobs))
    trials = sorted((t for b in batches for t in b), key=lambda t: (t.sample_id, t.kind, t.trial))
    groups: dict[tuple[str, str], list[TrialRecord]] = {}
    for t in trials:
        groups.setdefault((t.sample_id, t.kind), []).append(t)
    majorities = [majority(ts) for _, ts in sorted(groups.items())]

    with (run_dir / "trials.jsonl").open("w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(json.dumps(t.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
    (run_dir / "majorities.json").write_text(
        json.dumps([m.to_json() for m in majorities], indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    meta = {
        "adapter": adapter.adapter_id,
        "kinds": [k.value for k in kinds],
        "repeats": repeats,
        "reasks": reasks,
        "samples": len(manifest.samples),
        "dataset": str(manifest.provenance.get("ingested_from", "")),
    }
    temp = getattr(adapter, "temperature", None)
    if not adapter.offline:
        meta["temperature"] = temp if temp is not None else "provider default"
    (run_dir / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return BenchRun(run_dir, trials, majorities)


def load_trials(run_dir: Path) -> list[TrialRecord]:
    lines = (Path(run_dir) / "trials.jsonl").read_text(encoding="utf-8").splitlines()
    return [TrialRecord.from_json(json.loads(line)) for line in lines if line.strip()]


def load_majorities(run_dir: Path) -> list[MajorityResult]:
    doc = json.loads((Path(run_dir) / "majorities.json").read_text(encoding="utf-8"))
    return [MajorityResult.from_json(d) for d in doc]


def load_run_meta(run_dir: Path) -> dict:
    p = Path(run_dir) / "run.json"
    return json.loads(p.read_text(encoding="utf-8")) if p.exists() else {}

