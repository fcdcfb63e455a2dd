from __future__ import annotations

import json
import shutil

import pytest

from camo.cli import main
from camo.ir.parser import parse_module
from camo.ir.printer import print_module

from conftest import CORPUS, DATASET

CALC = str(CORPUS / "calculate_printf.ll")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_prints_canonical_text(capsys):
    code, out, _ = run(capsys, "parse", CALC)
    assert code == 0
    assert out == print_module(parse_module(CORPUS.joinpath("calculate_printf.ll").read_text()))


def test_parse_error_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.ll"
    bad.write_text("define i32 @f(")
    code, _, err = run(capsys, "parse", str(bad))
    assert code == 1 and "ParseError" in err


def test_missing_file_exit_one(capsys):
    code, _, err = run(capsys, "parse", "/nonexistent/x.ll")
    assert code == 1 and "cannot read" in err


def test_usage_errors_exit_two(capsys):
    assert run(capsys, "obfuscate", CALC, "-o", "x.ll")[0] == 2  # --seed is required
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys)[0] == 2


def test_validate(tmp_path, capsys):
    assert run(capsys, "validate", CALC)[:2] == (0, "valid\n")
    bad = tmp_path / "dup.ll"
    bad.write_text("define i32 @f() {\nentry:\n  %x = add i32 1, 2\n  %x = add i32 3, 4\n  ret i32 %x\n}\n")
    code, _, err = run(capsys, "validate", str(bad))
    assert code == 1 and "DuplicateDefinition" in err


def test_interp(capsys):
    code, out, _ = run(capsys, "interp", CALC, "calculate", "5", "3")
    assert code == 0 and json.loads(out) == {"steps": 2, "events": [], "returned": 8}
    code, out, _ = run(capsys, "interp", str(CORPUS / "sum_buffer.ll"), "sum_buf", "[1,2,3,0]", "3")
    assert code == 0 and json.loads(out)["returned"] == 6
    assert run(capsys, "interp", CALC, "nope")[0] == 1


def test_interp_reports_traps(capsys):
    code, out, _ = run(capsys, "interp", str(CORPUS / "div_traps.ll"), "ratio", "7", "0")
    assert code == 0 and json.loads(out)["trapped"] == "DivByZero"


def test_obfuscate_matches_fixture_output(tmp_path, capsys):
    orig = DATASET / "samples" / "fx05" / "orig.ll"
    out = tmp_path / "o.ll"
    code, stdout, _ = run(capsys, "obfuscate", str(orig), "-o", str(out), "--seed", "1")
    assert code == 0
    assert out.read_text() == (DATASET / "samples" / "fx05" / "obf.ll").read_text()
    report = json.loads(stdout)
    assert report["seed"] == 1 and report["config"]["pass_list"] == ["sub", "bcf", "split", "flatten"]


def test_obfuscate_is_deterministic_and_seed_sensitive(tmp_path, capsys):
    paths = [tmp_path / f"{i}.ll" for i in range(3)]
    for p, seed in zip(paths, ("7", "7", "8")):
        assert run(capsys, "obfuscate", str(CORPUS / "gcd_loop.ll"), "-o", str(p), "--seed", seed)[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes() != paths[2].read_bytes()


def test_obfuscate_rejects_bad_values(tmp_path, capsys):
    out = str(tmp_path / "o.ll")
    assert run(capsys, "obfuscate", CALC, "-o", out, "--seed", "1", "--passes", "sub,inline")[0] == 2
    assert run(capsys, "obfuscate", CALC, "-o", out, "--seed", "1", "--bcf-probability", "2")[0] == 2
    assert run(capsys, "obfuscate", CALC, "-o", out, "--seed", "-4")[0] == 2


def test_verify_exit_codes(tmp_path, capsys):
    obf = tmp_path / "o.ll"
    run(capsys, "obfuscate", CALC, "-o", str(obf), "--seed", "2")
    code, out, _ = run(capsys, "verify", CALC, str(obf), "--fn", "calculate")
    assert (code, out.strip()) == (0, "Equivalent")
    broken = tmp_path / "b.ll"
    broken.write_text(CORPUS.joinpath("calculate_printf.ll").read_text().replace("add i32 %a, %b", "sub i32 %a, %b"))
    code, out, _ = run(capsys, "verify", CALC, str(broken), "--fn", "calculate", "--json")
    assert code == 1 and json.loads(out)["verdict"] == "Diverged"


def test_config_file_and_flag_precedence(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "camo.toml"
    cfg.write_text('[obfuscate]\npasses = "split"\nsplit_chunk = 1\n')
    src = str(CORPUS / "gcd_loop.ll")
    code, out, _ = run(capsys, "--config", str(cfg), "obfuscate", src, "-o", str(tmp_path / "a.ll"), "--seed", "1")
    assert code == 0 and json.loads(out)["config"]["pass_list"] == ["split"]
    assert json.loads(out)["config"]["split_chunk"] == 1
    monkeypatch.setenv("CAMO_CONFIG", str(cfg))
    code, out, _ = run(capsys, "obfuscate", src, "-o", str(tmp_path / "b.ll"), "--seed", "1", "--split-chunk", "2")
    assert json.loads(out)["config"]["split_chunk"] == 2
    code, out, _ = run(capsys, "obfuscate", src, "-o", str(tmp_path / "c.ll"), "--seed", "1", "--bcf-probability", "0", "--passes", "bcf")
    assert json.loads(out)["config"]["bcf_probability"] == 0.0


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "--config", str(tmp_path / "none.toml"), "parse", CALC)
    assert code == 1 and "ConfigError" in err


def test_ingest_with_obfuscation(tmp_path, capsys):
    fake = tmp_path / "fakecc.sh"
    fake.write_text(f"#!/bin/sh\ncp {DATASET}/samples/fx01/orig.ll \"$2\"\n")
    fake.chmod(0o755)
    code, out, _ = run(
        capsys, "ingest", str(DATASET / "samples.jsonl"), "--out", str(tmp_path / "ds"), "--balanced",
        "--compile", "--compile-command", f"{fake} {{in}} {{out}}", "--seed", "1",
    )
    assert code == 0
    assert json.loads(out)["counts"] == {"Safe": 20, "Vulnerable": 20}
    assert (tmp_path / "ds" / "samples" / "fx33" / "obf.ll").exists()


def test_ingest_compile_without_command(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("CAMO_COMPILE_COMMAND", raising=False)
    code, _, err = run(capsys, "ingest", str(DATASET / "samples.jsonl"), "--out", str(tmp_path / "ds"), "--compile")
    assert code == 1 and "compile.command" in err


def test_bench_and_report_with_stub(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--dataset", str(DATASET), "--out", str(tmp_path), "--run-id", "r1", "--kind", "c")
    assert code == 0
    run_dir = tmp_path / "r1"
    assert out.strip() == str(run_dir)
    meta = json.loads((run_dir / "run.json").read_text())
    assert meta["run_id"] == "r1" and meta["adapter"] == "stub:keyword"
    code, out, _ = run(capsys, "report", str(run_dir))
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 3 and lines[2].startswith("| stub:keyword | C source |")
    for name in ("report.md", "report.csv", "metrics.json"):
        assert (run_dir / name).exists()


def test_bench_refuses_to_overwrite(tmp_path, capsys):
    args = ("bench", "--dataset", str(DATASET), "--out", str(tmp_path), "--run-id", "same", "--kind", "c")
    assert run(capsys, *args)[0] == 0
    code, _, err = run(capsys, *args)
    assert code == 1 and "RunExists" in err


def test_default_run_id_embeds_seed(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--dataset", str(DATASET), "--out", str(tmp_path), "--kind", "c", "--seed", "5")
    assert code == 0 and out.strip().endswith("-s5")


def test_report_on_replay_matches_golden(tmp_path, capsys):
    replay = tmp_path / "replay"
    shutil.copytree(DATASET / "replay", replay)
    code, out, _ = run(
        capsys, "bench", "--dataset", str(DATASET), "--adapter", f"replay:{replay}", "--out", str(tmp_path), "--run-id", "g"
    )
    assert code == 0
    code, out, _ = run(capsys, "report", str(tmp_path / "g"), "--model", "Replay fixture")
    assert out == (DATASET / "golden" / "report.md").read_text()
    assert (tmp_path / "g" / "report.csv").read_text() == (DATASET / "golden" / "report.csv").read_text()


@pytest.mark.parametrize("flag", ["--repeats", "--reasks"])
def test_bench_rejects_non_integer_counts(tmp_path, capsys, flag):
    assert run(capsys, "bench", "--dataset", str(DATASET), flag, "x")[0] == 2
