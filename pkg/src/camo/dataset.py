"""Labelled samples on disk.

Layout under a dataset root::

    manifest.json
    samples/<id>/source.c
    samples/<id>/orig.ll
    samples/<id>/obf.ll

The manifest is one JSON document with sorted keys and samples ordered by
id, so re-ingesting the same input produces identical bytes.
"""

from __future__ import annotations

import enum
import json
import logging
import re
import shlex
import shutil
import subprocess
from dataclasses import dataclass, field, replace
from pathlib import Path

from camo.config import COMPILE_COMMAND_ENV, COMPILE_COMMAND_KEY
from camo.errors import CamoError
from camo.ir.parser import parse_module

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
_ID_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")


class Label(str, enum.Enum):
    VULNERABLE = "Vulnerable"
    SAFE = "Safe"


class Role(str, enum.Enum):
    ORIG = "orig"
    OBF = "obf"


class MalformedLine(CamoError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class DuplicateId(CamoError):
    pass


class UnknownId(CamoError):
    pass


class Unbalanced(CamoError):
    pass


class ToolMissing(CamoError):
    pass


class ToolFailed(CamoError):
    def __init__(self, exit_code: int, stderr: str):
        self.exit_code = exit_code
        self.stderr = stderr
        super().__init__(f"compile command exited with {exit_code}: {stderr.strip()[:500]}")


@dataclass(frozen=True)
class Sample:
    id: str
    label: Label
    source_path: str | None = None
    ll_orig_path: str | None = None
    ll_obf_path: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": self.label.value,
            "source": self.source_path,
            "orig": self.ll_orig_path,
            "obf": self.ll_obf_path,
        }

    @classmethod
    def from_json(cls, d: dict) -> Sample:
        return cls(d["id"], Label(d["label"]), d.get("source"), d.get("orig"), d.get("obf"))


@dataclass(frozen=True)
class Manifest:
    root: Path
    samples: tuple[Sample, ...] = ()
    provenance: dict = field(default_factory=dict)
    require_balanced: bool = False

    def __post_init__(self) -> None:
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise DuplicateId("sample ids must be unique")
        object.__setattr__(self, "samples", tuple(sorted(self.samples, key=lambda s: s.id)))
        if self.require_balanced:
            self.check_balanced()

    @property
    def counts(self) -> dict[str, int]:
        out = {label.value: 0 for label in Label}
        for s in self.samples:
            out[s.label.value] += 1
        return out

    def check_balanced(self) -> None:
        c = self.counts
        if c[Label.VULNERABLE.value] != c[Label.SAFE.value]:
            raise Unbalanced(f"label counts differ: {c}")

    def sample(self, sample_id: str) -> Sample:
        for s in self.samples:
            if s.id == sample_id:
                return s
        raise UnknownId(f"no sample {sample_id!r}")

    def path(self, rel: str) -> Path:
        return self.root / rel

    def read(self, sample_id: str, what: str) -> str | None:
        """Text of ``source``, ``orig`` or ``obf`` for a sample, or None if absent."""
        s = self.sample(sample_id)
        rel = {"source": s.source_path, "orig": s.ll_orig_path, "obf": s.ll_obf_path}[what]
        if rel is None:
            return None
        return self.path(rel).read_text(encoding="utf-8")

    def with_sample(self, sample: Sample) -> Manifest:
        others = [s for s in self.samples if s.id != sample.id]
        return replace(self, samples=tuple(others) + (sample,))

    def to_json(self) -> str:
        doc = {
            "counts": self.counts,
            "provenance": self.provenance,
            "require_balanced": self.require_balanced,
            "samples": [s.to_json() for s in self.samples],
        }
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def save(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.root / MANIFEST_NAME
        p.write_text(self.to_json(), encoding="utf-8")
        return p


def load_manifest(path: str | Path) -> Manifest:
    """Load from a ``manifest.json`` path or the directory containing it."""
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST_NAME
    doc = json.loads(p.read_text(encoding="utf-8"))
    return Manifest(
        root=p.parent,
        samples=tuple(Sample.from_json(d) for d in doc.get("samples", [])),
        provenance=doc.get("provenance", {}),
        require_balanced=doc.get("require_balanced", False),
    )


def _sample_id(obj: dict, line: int) -> str:
    raw = obj.get("id", obj.get("index"))
    if raw is None or isinstance(raw, bool):
        raise MalformedLine(line, "missing 'id' or 'index'")
    sid = str(raw)
    if not _ID_RE.fullmatch(sid):
        raise MalformedLine(line, f"id {sid!r} is not a safe file name")
    return sid


def ingest(path: str | Path, root: str | Path, require_balanced: bool = False) -> Manifest:
    """Read a JSON-Lines file of ``{id|index, func, target}`` objects into ``root``."""
    src = Path(path)
    root = Path(root)
    parsed: list[tuple[str, Label, str]] = []
    seen: set[str] = set()
    with src.open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for no, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedLine(no, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise MalformedLine(no, "expected a JSON object")
        sid = _sample_id(obj, no)
        if "target" not in obj:
            raise MalformedLine(no, "missing 'target'")
        if obj["target"] not in (0, 1) or isinstance(obj["target"], bool):
            raise MalformedLine(no, f"target must be 0 or 1, got {obj['target']!r}")
        func = obj.get("func")
        if not isinstance(func, str):
            raise MalformedLine(no, "missing 'func' text")
        if sid in seen:
            raise DuplicateId(f"line {no}: duplicate id {sid!r}")
        seen.add(sid)
        label = Label.VULNERABLE if obj["target"] == 1 else Label.SAFE
        parsed.append((sid, label, func))
    # write only once the whole file is known to be well formed
    samples: list[Sample] = []
    for sid, label, func in parsed:
        rel = f"samples/{sid}/source.c"
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(func, encoding="utf-8")
        samples.append(Sample(sid, label, rel))
    if not samples:
        log.warning("%s contains no samples", src)
    manifest = Manifest(
        root=root,
        samples=tuple(samples),
        provenance={"ingested_from": src.name},
        require_balanced=require_balanced,
    )
    manifest.save()
    return manifest


def attach_ir(manifest: Manifest, sample_id: str, role: Role | str, ll_text: str) -> Manifest:
    """Store IR text for a sample; unparseable text leaves everything untouched."""
    role = Role(role)
    sample = manifest.sample(sample_id)
    parse_module(ll_text)
    rel = f"samples/{sample_id}/{role.value}.ll"
    target = manifest.path(rel)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(ll_text, encoding="utf-8")
    if role is Role.ORIG:
        sample = replace(sample, ll_orig_path=rel)
    else:
        sample = replace(sample, ll_obf_path=rel)
    updated = manifest.with_sample(sample)
    updated.save()
    return updated


def compile_external(manifest: Manifest, sample_id: str, command: str | None, timeout: float = 120.0) -> Manifest:
    """Run an external C-to-IR command template with ``{in}``/``{out}`` placeholders."""
    sample = manifest.sample(sample_id)
    if not command:
        raise ToolMissing(
            f"no compile command configured; set '{COMPILE_COMMAND_KEY}' in the config file "
            f"or ${COMPILE_COMMAND_ENV}"
        )
    if sample.source_path is None:
        raise UnknownId(f"sample {sample_id!r} has no C source")
    src = manifest.path(sample.source_path)
    out = src.parent / "orig.ll"
    argv = [part.replace("{in}", str(src)).replace("{out}", str(out)) for part in shlex.split(command)]
    if not argv or shutil.which(argv[0]) is None:
        raise ToolMissing(f"compile command not found: {argv[0] if argv else command!r}")
    proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    if proc.returncode != 0:
        raise ToolFailed(proc.returncode, proc.stderr)
    updated = attach_ir(manifest, sample_id, Role.ORIG, out.read_text(encoding="utf-8"))
    prov = dict(updated.provenance)
    compiled = dict(prov.get("compile", {}))
    compiled[sample_id] = {"command": command, "exit_status": proc.returncode}
    prov["compile"] = compiled
    updated = replace(updated, provenance=prov)
    updated.save()
    return updated
