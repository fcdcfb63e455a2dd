from __future__ import annotations

from pathlib import Path

import pytest

from camo.ir.model import IrFunction, IrModule, Ret, Switch, Unreachable
from camo.ir.parser import parse_module

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
DATASET = FIXTURES / "dataset"


def corpus_files() -> list[Path]:
    return sorted(CORPUS.glob("*.ll"))


def load(name: str) -> IrModule:
    return parse_module((CORPUS / name).read_text(encoding="utf-8"))


def flattening_violations(before: IrFunction, after: IrFunction) -> list[str]:
    """Structural problems in ``after`` as a flattening of ``before``; empty when sound."""
    switches = [b for b in after.blocks if isinstance(b.term, Switch)]
    if len(switches) != 1:
        return [f"expected one dispatcher switch, found {len(switches)}"]
    dispatch = switches[0]
    problems = []
    if len(dispatch.term.cases) != len(before.blocks):
        problems.append(f"{len(dispatch.term.cases)} cases for {len(before.blocks)} blocks")
    if {label for _, label in dispatch.term.cases} != set(before.labels()):
        problems.append("switch cases do not cover the original blocks")
    for b in after.blocks:
        if b is dispatch or isinstance(b.term, (Ret, Unreachable)):
            continue
        if b.term.successors() != (dispatch.label,):
            problems.append(f"{b.label} branches to {b.term.successors()} past the dispatcher")
    return problems


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture
def dataset_dir() -> Path:
    return DATASET


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, text)`` then run the checks in the block."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    class _Recorder:
        def __init__(self, number: int, text: str):
            self.number, self.text = number, text

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            status = "PASS" if exc_type is None else "FAIL"
            line = f"criterion {self.number}: {status}  {self.text}"
            if exc is not None:
                line += f"  ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
            lines.append(line)
            print(line)
            return False

    return _Recorder


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
