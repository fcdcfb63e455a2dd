from __future__ import annotations

import json
import logging
import shutil
import sys

import pytest

from camo.dataset import (
    MANIFEST_NAME,
    DuplicateId,
    Label,
    MalformedLine,
    Role,
    ToolFailed,
    ToolMissing,
    Unbalanced,
    UnknownId,
    attach_ir,
    compile_external,
    ingest,
    load_manifest,
)
from camo.errors import ParseError

from conftest import DATASET

GOOD_IR = "define i32 @f(i32 %a) {\nentry:\n  ret i32 %a\n}\n"


def write_jsonl(path, rows) -> None:
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")


def test_fixture_set_ingests_balanced(tmp_path):
    m = ingest(DATASET / "samples.jsonl", tmp_path / "ds", require_balanced=True)
    assert len(m.samples) == 40
    assert m.counts == {"Vulnerable": 20, "Safe": 20}
    assert (tmp_path / "ds" / MANIFEST_NAME).exists()
    assert all(m.read(s.id, "source") for s in m.samples)


def test_index_field_is_accepted(tmp_path):
    write_jsonl(tmp_path / "in.jsonl", [{"index": 7, "target": 0, "func": "int f(void) { return 0; }"}])
    m = ingest(tmp_path / "in.jsonl", tmp_path / "ds")
    assert m.sample("7").label is Label.SAFE


def test_empty_file_warns_and_yields_no_samples(tmp_path, caplog):
    (tmp_path / "empty.jsonl").write_text("\n\n")
    with caplog.at_level(logging.WARNING):
        m = ingest(tmp_path / "empty.jsonl", tmp_path / "ds")
    assert m.samples == ()
    assert "no samples" in caplog.text


@pytest.mark.parametrize(
    "bad",
    [
        "{not json",
        '{"target": 1, "func": "x"}',
        '{"id": "a", "func": "x"}',
        '{"id": "a", "target": 2, "func": "x"}',
        '{"id": "a", "target": true, "func": "x"}',
        '{"id": "a", "target": 1}',
        '{"id": "../up", "target": 1, "func": "x"}',
        "[1, 2]",
    ],
)
def test_malformed_line_reports_its_number(tmp_path, bad):
    good = json.dumps({"id": "ok", "target": 0, "func": "int f(void) { return 0; }"})
    (tmp_path / "in.jsonl").write_text(f"{good}\n{bad}\n")
    with pytest.raises(MalformedLine) as info:
        ingest(tmp_path / "in.jsonl", tmp_path / "ds")
    assert info.value.line == 2
    assert not (tmp_path / "ds").exists()


def test_duplicate_ids_rejected(tmp_path):
    row = {"id": "dup", "target": 1, "func": "x"}
    write_jsonl(tmp_path / "in.jsonl", [row, row])
    with pytest.raises(DuplicateId):
        ingest(tmp_path / "in.jsonl", tmp_path / "ds")


def test_reingest_is_byte_identical(tmp_path):
    ingest(DATASET / "samples.jsonl", tmp_path / "a")
    first = (tmp_path / "a" / MANIFEST_NAME).read_bytes()
    ingest(DATASET / "samples.jsonl", tmp_path / "a")
    assert (tmp_path / "a" / MANIFEST_NAME).read_bytes() == first


def test_unbalanced_set_rejected_when_required(tmp_path):
    write_jsonl(tmp_path / "in.jsonl", [{"id": "a", "target": 1, "func": "x"}])
    assert ingest(tmp_path / "in.jsonl", tmp_path / "ok").counts == {"Vulnerable": 1, "Safe": 0}
    with pytest.raises(Unbalanced):
        ingest(tmp_path / "in.jsonl", tmp_path / "ds", require_balanced=True)


def test_attach_ir_both_roles(tmp_path):
    m = ingest(DATASET / "samples.jsonl", tmp_path / "ds")
    m = attach_ir(m, "fx01", Role.ORIG, GOOD_IR)
    m = attach_ir(m, "fx01", "obf", GOOD_IR)
    s = load_manifest(tmp_path / "ds").sample("fx01")
    assert s.ll_orig_path == "samples/fx01/orig.ll"
    assert s.ll_obf_path == "samples/fx01/obf.ll"
    assert m.read("fx01", "obf") == GOOD_IR


def test_attach_ir_unknown_id(tmp_path):
    m = ingest(DATASET / "samples.jsonl", tmp_path / "ds")
    with pytest.raises(UnknownId):
        attach_ir(m, "nope", Role.ORIG, GOOD_IR)


def test_attach_unparseable_ir_leaves_manifest_unchanged(tmp_path):
    m = ingest(DATASET / "samples.jsonl", tmp_path / "ds")
    before = (tmp_path / "ds" / MANIFEST_NAME).read_bytes()
    with pytest.raises(ParseError):
        attach_ir(m, "fx02", Role.ORIG, "define i32 @f(")
    assert (tmp_path / "ds" / MANIFEST_NAME).read_bytes() == before
    assert not (tmp_path / "ds" / "samples" / "fx02" / "orig.ll").exists()


def test_compile_without_command_names_the_setting(tmp_path):
    m = ingest(DATASET / "samples.jsonl", tmp_path / "ds")
    with pytest.raises(ToolMissing) as info:
        compile_external(m, "fx01", None)
    assert "compile.command" in str(info.value)
    with pytest.raises(ToolMissing):
        compile_external(m, "fx01", "definitely-not-a-compiler {in} {out}")


def test_compile_nonzero_exit_is_tool_failed(tmp_path):
    m = ingest(DATASET / "samples.jsonl", tmp_path / "ds")
    cmd = f"{sys.executable} -c 'import sys; sys.stderr.write(\"boom\"); sys.exit(3)' {{in}} {{out}}"
    with pytest.raises(ToolFailed) as info:
        compile_external(m, "fx01", cmd)
    assert info.value.exit_code == 3 and "boom" in info.value.stderr


def test_compile_with_stand_in_tool_records_provenance(tmp_path):
    m = ingest(DATASET / "samples.jsonl", tmp_path / "ds")
    script = tmp_path / "fakecc.py"
    script.write_text(f"import sys\nopen(sys.argv[2], 'w').write({GOOD_IR!r})\n")
    m = compile_external(m, "fx01", f"{sys.executable} {script} {{in}} {{out}}")
    assert m.read("fx01", "orig") == GOOD_IR
    assert m.provenance["compile"]["fx01"]["exit_status"] == 0


@pytest.mark.skipif(shutil.which("clang") is None, reason="clang not installed")
def test_compile_with_clang(tmp_path):
    m = ingest(DATASET / "samples.jsonl", tmp_path / "ds")
    m = compile_external(m, "fx02", "clang -O0 -S -emit-llvm {in} -o {out}")
    assert "read_slot_checked" in m.read("fx02", "orig")


def test_shipped_fixture_manifest_is_complete():
    m = load_manifest(DATASET)
    assert m.counts == {"Vulnerable": 20, "Safe": 20}
    for s in m.samples:
        assert s.source_path and s.ll_orig_path and s.ll_obf_path
        assert m.path(s.ll_obf_path).exists()

