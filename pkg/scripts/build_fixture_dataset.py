"""Regenerate tests/fixtures/dataset from samples.jsonl.

Run from the repository root (needs clang on PATH)::

    python3 scripts/build_fixture_dataset.py

Steps: ingest the JSON-Lines file, compile each function with clang -O0,
obfuscate with seed 1, write synthetic replay responses, then rebuild the
golden report.  The replay responses are synthetic: a seeded coin decides
each answer, with lower accuracy on obfuscated IR.  They are not recorded
from any real model.
"""

from __future__ import annotations

import hashlib
import shutil
import sys
import tempfile
from pathlib import Path

from camo.cli import main as camo
from camo.dataset import Label, Role, attach_ir, compile_external, ingest
from camo.ir.parser import parse_module
from camo.ir.printer import print_module
from camo.passes.config import ObfConfig
from camo.passes.pipeline import run_pipeline

ROOT = Path("tests/fixtures/dataset")
REPLAY = ROOT / "replay"
GOLDEN = ROOT / "golden"
OBF_SEED = 1
COMPILE = "clang -O0 -S -emit-llvm -fno-discard-value-names -include string.h -include stdlib.h {in} -o {out}"
KINDS = ("c", "llvm-orig", "llvm-obf")
TRIALS = 3

# chance that a single synthetic answer matches the label, per prompt kind
ACCURACY = {"c": 0.85, "llvm-orig": 0.75, "llvm-obf": 0.55}
INVALID_RATE = 0.1
# every attempt for this (sample, kind) is unusable, so its majority is Inconclusive
ALWAYS_INVALID = ("fx40", "llvm-obf")

REASONS = (
    "an index is used without checking it against the buffer size.",
    "the length passed to the copy is not validated.",
    "memory is used after it has been released.",
    "the divisor can be zero.",
    "the loop bound allows a write past the end of the array.",
    "the allocation result is not checked for NULL.",
)
SECURE = ("Yes, the code is secure.", "**Yes, the code is secure.**", "yes, the code is secure.")
INSECURE = ("No, the code is insecure because {r}", "```\nNo, the code is insecure because {r}\n```")
INVALID = (
    "I would need more context about how this function is called.",
    "The function looks mostly fine, although edge cases may exist.",
    "Sure! Let me walk through the code line by line.",
)


def _u(*parts: object) -> float:
    digest = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _pick(options: tuple[str, ...], *parts: object) -> str:
    return options[int(_u("pick", *parts) * len(options))]


def synthetic_answer(sample: str, vulnerable: bool, kind: str, trial: int) -> str:
    correct = _u("correct", sample, kind, trial) < ACCURACY[kind]
    says_insecure = vulnerable == correct
    if says_insecure:
        reason = _pick(REASONS, "reason", sample, kind, trial)
        return _pick(INSECURE, "shape", sample, kind, trial).format(r=reason) + "\n"
    return _pick(SECURE, "shape", sample, kind, trial) + "\n"


def write_replay(manifest) -> None:
    if REPLAY.exists():
        shutil.rmtree(REPLAY)
    REPLAY.mkdir(parents=True)
    for s in manifest.samples:
        vulnerable = s.label is Label.VULNERABLE
        for kind in KINDS:
            for trial in range(1, TRIALS + 1):
                stem = f"{s.id}__{kind}__{trial}"
                if (s.id, kind) == ALWAYS_INVALID:
                    files = [_pick(INVALID, "inv", s.id, kind, trial, a) + "\n" for a in range(3)]
                else:
                    files = []
                    attempt = 0
                    while attempt < 2 and _u("invalid", s.id, kind, trial, attempt) < INVALID_RATE * (3 if attempt else 1):
                        files.append(_pick(INVALID, "inv", s.id, kind, trial, attempt) + "\n")
                        attempt += 1
                    files.append(synthetic_answer(s.id, vulnerable, kind, trial))
                for i, text in enumerate(files):
                    suffix = "" if i == 0 else f".retry{i}"
                    (REPLAY / f"{stem}{suffix}.txt").write_text(text, encoding="utf-8")


def main() -> int:
    if not (ROOT / "samples.jsonl").exists():
        print("run from the repository root", file=sys.stderr)
        return 2
    for sub in ("samples", "manifest.json"):
        p = ROOT / sub
        if p.is_dir():
            shutil.rmtree(p)
        elif p.exists():
            p.unlink()
    manifest = ingest(ROOT / "samples.jsonl", ROOT, require_balanced=True)
    cfg = ObfConfig.all_passes(OBF_SEED)
    for s in manifest.samples:
        manifest = compile_external(manifest, s.id, COMPILE)
        obf, _ = run_pipeline(parse_module(manifest.read(s.id, "orig")), cfg)
        manifest = attach_ir(manifest, s.id, Role.OBF, print_module(obf))
    write_replay(manifest)

    with tempfile.TemporaryDirectory() as tmp:
        rc = camo(["bench", "--dataset", str(ROOT / "manifest.json"), "--adapter", f"replay:{REPLAY}",
                   "--out", tmp, "--run-id", "golden"])
        rc = rc or camo(["report", str(Path(tmp) / "golden"), "--model", "Replay fixture"])
        if rc:
            return rc
        GOLDEN.mkdir(exist_ok=True)
        for name in ("report.md", "report.csv", "majorities.json"):
            shutil.copy(Path(tmp) / "golden" / name, GOLDEN / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
