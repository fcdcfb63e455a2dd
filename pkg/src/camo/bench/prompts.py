"""Zero-shot prompt templates and response parsing."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Union

from camo.errors import CamoError


class PromptKind(str, enum.Enum):
    C_CODE = "c"
    LLVM_ORIG = "llvm-orig"
    LLVM_OBF = "llvm-obf"

    @property
    def artifact(self) -> str:
        """Manifest artifact holding the code for this kind."""
        return {"c": "source", "llvm-orig": "orig", "llvm-obf": "obf"}[self.value]

    @property
    def column(self) -> str:
        """Label used in the report's Obfuscation column."""
        return {"c": "C source", "llvm-orig": "Before", "llvm-obf": "After"}[self.value]


class EmptyCode(CamoError):
    pass


_SUBJECT = {
    PromptKind.C_CODE: "C source code",
    PromptKind.LLVM_ORIG: "LLVM source code",
    PromptKind.LLVM_OBF: "obfuscated LLVM source code",
}

_TEMPLATE = (
    "Analyze the provided {subject} for potential security vulnerabilities or signs of "
    "malicious behavior. Using exactly one of the following formats:\n"
    "- If the file is secure: Yes, the code is secure.\n"
    "- If the file is insecure: No, the code is insecure because [reason].\n"
    "Answer briefly.\n"
    "\n"
    "Code:\n"
)


def build_prompt(kind: PromptKind | str, code: str) -> str:
    kind = PromptKind(kind)
    if not code or not code.strip():
        raise EmptyCode(f"no code to send for {kind.value}")
    return _TEMPLATE.format(subject=_SUBJECT[kind]) + code


def code_of(prompt: str) -> str:
    """Recover the code section of a prompt built by :func:`build_prompt`."""
    _, sep, code = prompt.partition("\nCode:\n")
    return code if sep else prompt


@dataclass(frozen=True)
class Secure:
    def __str__(self) -> str:
        return "Secure"


@dataclass(frozen=True)
class Insecure:
    reason: str

    def __str__(self) -> str:
        return "Insecure"


@dataclass(frozen=True)
class Invalid:
    raw: str

    def __str__(self) -> str:
        return "Invalid"


Verdict = Union[Secure, Insecure, Invalid]

_FENCE = re.compile(r"^```[A-Za-z0-9_-]*\s*\n?|\n?```\s*$")
_SECURE = re.compile(r"yes\s*,\s*the\s+code\s+is\s+secure\b", re.I)
_INSECURE = re.compile(r"no\s*,\s*the\s+code\s+is\s+insecure\s+because\b\s*(.*)", re.I | re.S)


def _strip_wrappers(text: str) -> str:
    t = text.strip()
    for _ in range(3):
        before = t
        t = _FENCE.sub("", t).strip()
        t = "\n".join(line[1:].lstrip() if line.startswith(">") else line for line in t.splitlines()).strip()
        t = t.strip("\"'`*_ ").strip()
        if t == before:
            break
    return t


def parse_verdict(response: str) -> Verdict:
    """Match the two allowed answer shapes, case-insensitively, at the start."""
    text = _strip_wrappers(response)
    m = _INSECURE.match(text)
    if m:
        return Insecure(" ".join(m.group(1).split()))
    if _SECURE.match(text):
        return Secure()
    return Invalid(response)


def verdict_to_json(v: Verdict) -> dict:
    if isinstance(v, Insecure):
        return {"verdict": "Insecure", "reason": v.reason}
    if isinstance(v, Invalid):
        return {"verdict": "Invalid"}
    return {"verdict": "Secure"}


def verdict_from_json(d: dict, raw: str = "") -> Verdict:
    kind = d["verdict"]
    if kind == "Insecure":
        return Insecure(d.get("reason", ""))
    if kind == "Secure":
        return Secure()
    return Invalid(raw)
