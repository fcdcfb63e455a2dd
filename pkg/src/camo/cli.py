"""``camo`` command-line entry point.

Exit status: 0 on success, 1 on a domain error (message on stderr), 2 on a
usage error.  Settings come from the config file (``--config`` or
``$CAMO_CONFIG``), then flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from camo.bench.adapters import adapter_from_spec
from camo.bench.prompts import PromptKind
from camo.bench.runner import (
    DEFAULT_IN_FLIGHT,
    DEFAULT_REASKS,
    DEFAULT_REPEATS,
    load_majorities,
    load_run_meta,
    run_bench,
)
from camo.config import compile_command, load_config, resolve
from camo.dataset import Role, attach_ir, compile_external, ingest, load_manifest
from camo.equiv import Equivalent, check_equivalence
from camo.errors import CamoError
from camo.interp import DEFAULT_FUEL, Buffer, Returned, Trapped, run_function
from camo.ir.model import IrModule
from camo.ir.parser import parse_module, parse_unchecked
from camo.ir.printer import print_module
from camo.ir.types import IntType, PtrType
from camo.ir.validate import validate
from camo.metrics import compute, emit_report, metrics_json, tally
from camo.passes.config import PASS_NAMES, ObfConfig
from camo.passes.pipeline import parse_pass_list, run_pipeline


class RunExists(CamoError):
    pass


class UsageError(CamoError):
    """Bad flag values that argparse cannot catch; exits with status 2."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CamoError(f"cannot read {path}: {exc.strerror}") from exc


def _load(path: str) -> IrModule:
    return parse_module(_read(path))


def _dump(obj: object) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# --- subcommands ---------------------------------------------------------------


def cmd_parse(args, config) -> int:
    sys.stdout.write(print_module(_load(args.file)))
    return 0


def cmd_validate(args, config) -> int:
    violations = validate(parse_unchecked(_read(args.file)))
    if not violations:
        print("valid")
        return 0
    for v in violations:
        print(v, file=sys.stderr)
    return 1


def _parse_arg(text: str, ty) -> object:
    if isinstance(ty, PtrType):
        body = text.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise UsageError(f"pointer argument must look like [1,2,0], got {text!r}")
        values = [int(v, 0) for v in body[1:-1].split(",") if v.strip()]
        width = ty.pointee.width if isinstance(ty.pointee, IntType) else 32
        return Buffer(width, tuple(values))
    try:
        return int(text, 0)
    except ValueError as exc:
        raise UsageError(f"not an integer: {text!r}") from exc


def cmd_interp(args, config) -> int:
    m = _load(args.file)
    fn = m.get_function(args.fn)
    params = fn.params if fn is not None else ()
    values = [_parse_arg(a, p.ty) for a, p in zip(args.args, params)] + list(args.args[len(params):])
    r = run_function(m, args.fn, values, fuel=args.fuel)
    out: dict = {"steps": r.steps, "events": [[e.callee, list(e.args)] for e in r.events]}
    if isinstance(r.outcome, Returned):
        out["returned"] = r.outcome.value
    elif isinstance(r.outcome, Trapped):
        out["trapped"] = r.outcome.kind.value
        out["detail"] = r.outcome.detail
    else:
        out["out_of_fuel"] = True
    print(_dump(out))
    return 0


def _setting(config, key: str, flag, default):
    value = resolve(config, key, flag)
    return default if value is None else value


def _obf_config(args, config) -> ObfConfig:
    defaults = ObfConfig(seed=0)
    try:
        passes = _setting(config, "obfuscate.passes", args.passes, PASS_NAMES)
        if isinstance(passes, str):
            passes = parse_pass_list(passes)
        return ObfConfig(
            seed=args.seed,
            bcf_probability=float(_setting(config, "obfuscate.bcf_probability", args.bcf_probability, defaults.bcf_probability)),
            split_chunk=int(_setting(config, "obfuscate.split_chunk", args.split_chunk, defaults.split_chunk)),
            subst_rounds=int(_setting(config, "obfuscate.subst_rounds", args.subst_rounds, defaults.subst_rounds)),
            pass_list=tuple(passes),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_obfuscate(args, config) -> int:
    cfg = _obf_config(args, config)
    out, report = run_pipeline(_load(args.file), cfg)
    Path(args.output).write_text(print_module(out), encoding="utf-8")
    print(_dump(report.to_dict()))
    return 0


def cmd_verify(args, config) -> int:
    report = check_equivalence(
        _load(args.orig),
        _load(args.obf),
        args.fn,
        n=args.vectors,
        seed=args.seed,
        fuel=args.fuel,
        junk_blocks=args.junk,
    )
    if args.json:
        print(_dump(report.to_dict()))
    else:
        print(report.verdict)
    return 0 if isinstance(report.verdict, Equivalent) else 1


def cmd_ingest(args, config) -> int:
    manifest = ingest(args.jsonl, args.out, require_balanced=args.balanced)
    if args.compile:
        command = compile_command(config, args.compile_command)
        for s in manifest.samples:
            manifest = compile_external(manifest, s.id, command)
    if args.seed is not None:
        cfg = _obf_config(args, config)
        for s in manifest.samples:
            orig = manifest.read(s.id, "orig")
            if orig is None:
                continue
            out, _ = run_pipeline(parse_module(orig), cfg)
            manifest = attach_ir(manifest, s.id, Role.OBF, print_module(out))
    print(_dump({"root": str(manifest.root), "counts": manifest.counts}))
    return 0


def _run_id(seed: int) -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ") + f"-s{seed}"


def cmd_bench(args, config) -> int:
    manifest = load_manifest(args.dataset)
    adapter = adapter_from_spec(_setting(config, "bench.adapter", args.adapter, "stub:keyword"), config)
    repeats = int(_setting(config, "bench.repeats", args.repeats, DEFAULT_REPEATS))
    reasks = int(_setting(config, "bench.reasks", args.reasks, DEFAULT_REASKS))
    in_flight = int(_setting(config, "bench.max_in_flight", args.max_in_flight, DEFAULT_IN_FLIGHT))
    out_root = Path(_setting(config, "bench.out", args.out, "runs"))
    kinds = args.kind or [k.value for k in PromptKind]
    run_id = args.run_id or _run_id(args.seed)
    run_dir = out_root / run_id
    if run_dir.exists():
        raise RunExists(f"run {run_id!r} already exists under {out_root}")
    run = run_bench(manifest, adapter, kinds, run_dir, repeats, reasks, in_flight)
    meta_path = run_dir / "run.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta.update({"run_id": run_id, "seed": args.seed, "manifest": str(args.dataset)})
    meta_path.write_text(_dump(meta) + "\n", encoding="utf-8")
    print(str(run.directory))
    return 0


def cmd_report(args, config) -> int:
    run_dir = Path(args.run_dir)
    meta = load_run_meta(run_dir)
    dataset = args.dataset or meta.get("manifest")
    if not dataset:
        raise UsageError("no --dataset given and run.json does not name one")
    manifest = load_manifest(dataset)
    majorities = load_majorities(run_dir)
    model = args.model or meta.get("adapter", "model")
    rows, entries = {}, {}
    for kind in PromptKind:
        subset = [m for m in majorities if m.kind == kind.value]
        if not subset:
            continue
        cm = tally(subset, manifest)
        row = compute(cm)
        rows[(model, kind.column)] = row
        entries[(model, kind.column)] = (cm, row)
    md = emit_report(rows, "md")
    (run_dir / "report.md").write_text(md, encoding="utf-8")
    (run_dir / "report.csv").write_text(emit_report(rows, "csv"), encoding="utf-8")
    (run_dir / "metrics.json").write_text(metrics_json(entries), encoding="utf-8")
    sys.stdout.write(md)
    return 0


# --- argument parsing ----------------------------------------------------------------


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_obf_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--passes", help=f"comma-separated subset of {','.join(PASS_NAMES)}")
    p.add_argument("--bcf-probability", type=float)
    p.add_argument("--split-chunk", type=int)
    p.add_argument("--subst-rounds", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camo", description="LLVM IR obfuscation and LLM benchmark toolkit")
    parser.add_argument("--config", help="TOML config file (default: $CAMO_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("parse", help="print the canonical form of a .ll file")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("validate", help="check well-formedness and list violations")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("interp", help="run one function on concrete arguments")
    p.add_argument("file")
    p.add_argument("fn")
    p.add_argument("args", nargs="*", help="integers, or [a,b,...] for pointer parameters")
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("obfuscate", help="apply the obfuscation passes")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=_seed, required=True)
    _add_obf_flags(p)
    p.set_defaults(func=cmd_obfuscate)

    p = sub.add_parser("verify", help="differential equivalence check of one function")
    p.add_argument("orig")
    p.add_argument("obf")
    p.add_argument("--fn", required=True)
    p.add_argument("--vectors", type=int, default=64)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument("--junk", action="append", default=[], help="block label whose visits to count")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ingest", help="import a JSON-Lines dataset")
    p.add_argument("jsonl")
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--balanced", action="store_true", help="fail unless label counts match")
    p.add_argument("--compile", action="store_true", help="compile each source with the configured command")
    p.add_argument("--compile-command")
    p.add_argument("--seed", type=_seed, help="also write obf.ll for every sample with orig.ll")
    _add_obf_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bench", help="query a model adapter over a dataset")
    p.add_argument("--dataset", required=True, help="manifest.json or its directory")
    p.add_argument("--adapter", help="stub:keyword, replay:DIR or http:NAME")
    p.add_argument("--kind", action="append", choices=[k.value for k in PromptKind])
    p.add_argument("--repeats", type=int)
    p.add_argument("--reasks", type=int)
    p.add_argument("--max-in-flight", type=int)
    p.add_argument("--out", help="runs root directory (default: runs)")
    p.add_argument("--run-id")
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="compute metrics for a bench run")
    p.add_argument("run_dir")
    p.add_argument("--dataset", help="manifest (default: the one recorded in run.json)")
    p.add_argument("--model", help="label for the Model column (default: adapter id)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"camo: error: {exc}", file=sys.stderr)
        return 2
    except CamoError as exc:
        print(f"camo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
