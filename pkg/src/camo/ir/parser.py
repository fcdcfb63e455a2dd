"""Parser for the textual ``.ll`` subset.

Clang boilerplate that carries no semantics for the toolkit (``target``
lines, attribute groups, metadata, ``align``, linkage and parameter
attributes, ``nsw``/``nuw`` flags) is consumed and dropped.  Anything that is
valid LLVM but outside the supported subset raises
:class:`UnsupportedConstruct` naming the construct.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from camo.errors import ParseError, SourceSpan, UnsupportedConstruct
from camo.ir.model import (
    BINARY_OPS,
    CAST_OPS,
    ICMP_PREDS,
    Alloca,
    BasicBlock,
    BinOp,
    Br,
    Call,
    Cast,
    CondBr,
    Gep,
    GlobalVar,
    ICmp,
    Instruction,
    IrFunction,
    IrModule,
    Load,
    Param,
    Phi,
    Ret,
    Select,
    Store,
    Switch,
    Terminator,
    Unreachable,
)
from camo.ir.types import (
    VOID,
    ArrayType,
    ConstArray,
    ConstBytes,
    ConstInt,
    FuncType,
    GlobalRef,
    IntType,
    IrType,
    LocalRef,
    NullPtr,
    PtrType,
    Undef,
    Value,
    VoidType,
    ZeroInit,
)
from camo.ir.validate import check

_NAME = r'(?:[A-Za-z$._-][A-Za-z0-9$._-]*|[0-9]+|"[^"\n]*")'
_TOKEN_RE = re.compile(
    rf"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>;[^\n]*)
  | (?P<labeldef>{_NAME}:)
  | (?P<local>%{_NAME})
  | (?P<global>@{_NAME})
  | (?P<attrgrp>\#[0-9]+)
  | (?P<meta>![A-Za-z0-9._-]*)
  | (?P<cstr>c"[^"\n]*")
  | (?P<str>"[^"\n]*")
  | (?P<int>-?[0-9]+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<ellipsis>\.\.\.)
  | (?P<punct>[()\[\]{{}},=*<>:|])
    """,
    re.VERBOSE,
)

LINKAGE = frozenset(
    """private internal external weak weak_odr linkonce linkonce_odr common
    appending extern_weak available_externally default hidden protected
    dso_local dso_preemptable unnamed_addr local_unnamed_addr""".split()
)
PARAM_ATTRS = frozenset(
    """noundef nonnull nocapture readonly readnone writeonly signext zeroext
    noalias returned immarg nofree inreg noinline nounwind willreturn
    mustprogress optnone uwtable norecurse nosync""".split()
)
PARAM_ATTRS_WITH_ARG = frozenset(("dereferenceable", "dereferenceable_or_null", "align"))
CALL_PREFIX = frozenset(("tail", "musttail", "notail"))
UNSUPPORTED_TYPES = frozenset(("half", "float", "double", "fp128", "x86_fp80", "label", "metadata", "token", "opaque"))
UNSUPPORTED_OPS = frozenset(
    """fneg fadd fsub fmul fdiv frem fcmp bitcast ptrtoint inttoptr fptrunc fpext
    fptoui fptosi uitofp sitofp addrspacecast extractvalue insertvalue
    extractelement insertelement shufflevector invoke resume landingpad
    indirectbr callbr va_arg atomicrmw cmpxchg fence freeze catchswitch
    catchret cleanupret cleanuppad catchpad""".split()
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, max(1, len(self.text)))


def _unquote(name: str) -> str:
    if name.startswith('"'):
        return _decode_escapes(name[1:-1]).decode("latin-1")
    return name


def _decode_escapes(body: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            if body[i + 1 : i + 2] == "\\":
                out.append(0x5C)
                i += 2
                continue
            out.append(int(body[i + 1 : i + 3], 16))
            i += 3
        else:
            out.extend(ch.encode("utf-8"))
            i += 1
    return bytes(out)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(line, pos - line_start + 1)
            raise ParseError(span, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            if kind == "labeldef":
                tok = tok[:-1]
            tokens.append(Token(kind, tok, line, pos - line_start + 1))
        newlines = tok.count("\n") if kind == "ws" else 0
        if newlines:
            line += newlines
            line_start = m.start() + tok.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, message: str, expected: str | None = None, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        if t.kind == "eof":
            message = f"{message}, found end of input"
        else:
            message = f"{message}, found {t.text!r}"
        return ParseError(t.span, message, expected)

    def unsupported(self, construct: str, tok: Token | None = None) -> UnsupportedConstruct:
        return UnsupportedConstruct((tok or self.tok).span, construct)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("punct", "word", "ellipsis")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}", text)
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            raise self.error(f"expected {what}", kind)
        return self.advance()

    def expect_int(self) -> int:
        return int(self.expect_kind("int", "integer").text)

    # -- top level ---------------------------------------------------------

    def parse_module(self) -> IrModule:
        globals_: list[GlobalVar] = []
        functions: list[IrFunction] = []
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind == "word" and t.text == "define":
                functions.append(self.parse_define())
            elif t.kind == "word" and t.text == "declare":
                functions.append(self.parse_declare())
            elif t.kind == "global":
                globals_.append(self.parse_global())
            elif t.kind == "word" and t.text in ("source_filename", "target"):
                self.skip_line()
            elif t.kind == "word" and t.text == "attributes":
                self.skip_attribute_group()
            elif t.kind == "meta":
                self.skip_line()
            elif t.kind == "local" and self.peek().text == "=":
                raise self.unsupported("named type definition")
            elif t.kind == "word" and t.text in ("module", "comdat", "$"):
                raise self.unsupported(f"top-level {t.text}")
            else:
                raise self.error("expected a top-level entity", "define")
        return IrModule(tuple(globals_), tuple(functions))

    def skip_line(self) -> None:
        line = self.tok.line
        while self.tok.kind != "eof" and self.tok.line == line:
            self.advance()

    def skip_attribute_group(self) -> None:
        self.expect("attributes")
        self.expect_kind("attrgrp", "attribute group id")
        self.expect("=")
        self.expect("{")
        depth = 1
        while depth:
            t = self.advance()
            if t.kind == "eof":
                raise self.error("unterminated attribute group", "}")
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                depth -= 1

    def skip_linkage(self) -> None:
        while self.tok.kind == "word" and self.tok.text in LINKAGE:
            self.advance()

    def parse_global(self) -> GlobalVar:
        name = _unquote(self.advance().text[1:])
        self.expect("=")
        self.skip_linkage()
        if self.tok.text == "thread_local":
            raise self.unsupported("thread_local global")
        if self.accept("constant"):
            constant = True
        elif self.accept("global"):
            constant = False
        else:
            raise self.error("expected 'global' or 'constant'", "global")
        ty = self.parse_type()
        if self.tok.kind in ("punct",) and self.tok.text == ",":
            raise self.unsupported("external global without initializer")
        init = self.parse_constant(ty)
        while self.accept(","):
            if self.accept("align"):
                self.expect_int()
            elif self.tok.kind == "meta":
                self.advance()
                self.advance()
            elif self.tok.text in ("section", "comdat", "partition"):
                raise self.unsupported(f"global {self.tok.text}")
            else:
                raise self.error("expected global attribute")
        return GlobalVar(name, ty, init, constant)

    def parse_header(self) -> tuple[IrType, str, list[Param], bool]:
        self.skip_linkage()
        self.skip_return_attrs()
        ret = self.parse_type(allow_void=True)
        tok = self.expect_kind("global", "function name")
        name = _unquote(tok.text[1:])
        self.expect("(")
        params: list[Param] = []
        variadic = False
        index = 0
        while not self.at(")"):
            if params or variadic:
                self.expect(",")
            if self.accept("..."):
                variadic = True
                continue
            ty = self.parse_type()
            self.skip_param_attrs()
            if self.tok.kind == "local":
                pname = _unquote(self.advance().text[1:])
            else:
                pname = str(index)
            params.append(Param(pname, ty))
            index += 1
        self.expect(")")
        return ret, name, params, variadic

    def skip_return_attrs(self) -> None:
        while self.tok.kind == "word" and (self.tok.text in PARAM_ATTRS or self.tok.text in PARAM_ATTRS_WITH_ARG):
            self.skip_param_attrs()

    def skip_param_attrs(self) -> None:
        while self.tok.kind == "word":
            word = self.tok.text
            if word in PARAM_ATTRS:
                self.advance()
            elif word in PARAM_ATTRS_WITH_ARG:
                self.advance()
                if self.accept("("):
                    self.expect_int()
                    self.expect(")")
                else:
                    self.expect_int()
            elif word in ("byval", "sret", "inalloca", "preallocated", "elementtype"):
                raise self.unsupported(f"parameter attribute {word}")
            else:
                break

    def skip_function_attrs(self) -> None:
        """Drop everything between ``)`` and ``{`` of a definition."""
        while self.tok.kind != "eof" and not self.at("{"):
            t = self.tok
            if t.kind == "word" and t.text in ("personality", "prefix", "prologue", "gc"):
                raise self.unsupported(f"function {t.text}")
            self.advance()

    def parse_declare(self) -> IrFunction:
        self.expect("declare")
        ret, name, params, variadic = self.parse_header()
        line = self.toks[self.i - 1].line
        while self.tok.kind != "eof" and self.tok.line == line:
            if self.tok.kind == "word" and self.tok.text in ("define", "declare"):
                break
            self.advance()
        return IrFunction(name, ret, tuple(params), (), variadic, True)

    def parse_define(self) -> IrFunction:
        self.expect("define")
        ret, name, params, variadic = self.parse_header()
        self.skip_function_attrs()
        self.expect("{")
        blocks: list[BasicBlock] = []
        label: str | None = None
        first = True
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("expected '}' to close function body", "}")
            if self.tok.kind == "labeldef":
                label = _unquote(self.advance().text)
            elif first:
                label = None  # unnamed entry block
            else:
                raise self.error("expected a block label", "label")
            first = False
            if label is None:
                label = str(sum(p.name.isdigit() for p in params))
            blocks.append(self.parse_block(label))
        self.expect("}")
        return IrFunction(name, ret, tuple(params), tuple(blocks), variadic, False)

    # -- blocks and instructions --------------------------------------------

    def parse_block(self, label: str) -> BasicBlock:
        phis: list[Phi] = []
        body: list[Instruction] = []
        while True:
            t = self.tok
            if t.kind == "labeldef" or self.at("}") or t.kind == "eof":
                raise self.error(f"block %{label} has no terminator", "terminator")
            term = self.try_parse_terminator()
            if term is not None:
                self.skip_trailing_attachments()
                return BasicBlock(label, tuple(phis), tuple(body), term)
            inst = self.parse_instruction()
            self.skip_trailing_attachments()
            if isinstance(inst, Phi):
                if body:
                    raise ParseError(t.span, "phi after non-phi instruction")
                phis.append(inst)
            else:
                body.append(inst)

    def skip_trailing_attachments(self) -> None:
        while self.at(","):
            nxt = self.peek()
            if nxt.kind == "meta":
                self.advance()
                self.advance()
                if self.tok.kind == "meta":
                    self.advance()
            elif nxt.text == "align":
                self.advance()
                self.advance()
                self.expect_int()
            else:
                raise self.error("unexpected trailing operand", None, nxt)

    def try_parse_terminator(self) -> Terminator | None:
        t = self.tok
        if t.kind != "word":
            return None
        if t.text == "ret":
            self.advance()
            ty = self.parse_type(allow_void=True)
            if isinstance(ty, VoidType):
                return Ret()
            return Ret(ty, self.parse_value(ty))
        if t.text == "br":
            self.advance()
            if self.accept("label"):
                return Br(self.parse_label_ref())
            ty = self.parse_type()
            if ty != IntType(1):
                raise self.error("conditional branch needs an i1 condition", "i1", t)
            cond = self.parse_value(ty)
            self.expect(",")
            self.expect("label")
            a = self.parse_label_ref()
            self.expect(",")
            self.expect("label")
            b = self.parse_label_ref()
            return CondBr(cond, a, b)
        if t.text == "switch":
            self.advance()
            ty = self.parse_type()
            if not isinstance(ty, IntType):
                raise self.error("switch needs an integer operand", "iN", t)
            value = self.parse_value(ty)
            self.expect(",")
            self.expect("label")
            default = self.parse_label_ref()
            self.expect("[")
            cases: list[tuple[int, str]] = []
            while not self.at("]"):
                cty = self.parse_type()
                cv = self.parse_value(cty)
                if not isinstance(cv, ConstInt):
                    raise self.error("switch case must be an integer constant")
                self.expect(",")
                self.expect("label")
                cases.append((cv.value, self.parse_label_ref()))
            self.expect("]")
            return Switch(ty, value, default, tuple(cases))
        if t.text == "unreachable":
            self.advance()
            return Unreachable()
        if t.text in ("invoke", "resume", "indirectbr", "callbr", "catchswitch", "catchret", "cleanupret"):
            raise self.unsupported(f"terminator {t.text}")
        return None

    def parse_label_ref(self) -> str:
        tok = self.expect_kind("local", "label reference")
        return _unquote(tok.text[1:])

    def parse_instruction(self) -> Instruction:
        result: str | None = None
        if self.tok.kind == "local":
            result = _unquote(self.advance().text[1:])
            self.expect("=")
        t = self.tok
        if t.kind != "word":
            raise self.error("expected an instruction", "opcode")
        op = t.text
        if op in CALL_PREFIX or op == "call":
            return self.parse_call(result)
        if result is None and op != "store":
            raise self.error("instruction needs a result name", "%name")
        self.advance()
        if op in BINARY_OPS:
            while self.tok.text in ("nsw", "nuw", "exact", "disjoint"):
                self.advance()
            ty = self.parse_type()
            if not isinstance(ty, IntType):
                raise self.unsupported(f"{op} on {ty}", t)
            lhs = self.parse_value(ty)
            self.expect(",")
            return BinOp(result, op, ty, lhs, self.parse_value(ty))
        if op == "icmp":
            pred = self.expect_kind("word", "icmp predicate").text
            if pred not in ICMP_PREDS:
                raise self.error(f"unknown icmp predicate {pred!r}", "predicate")
            ty = self.parse_type()
            if not isinstance(ty, (IntType, PtrType)):
                raise self.unsupported(f"icmp on {ty}", t)
            lhs = self.parse_value(ty)
            self.expect(",")
            return ICmp(result, pred, ty, lhs, self.parse_value(ty))
        if op in CAST_OPS:
            self.accept("nneg")
            src = self.parse_type()
            value = self.parse_value(src)
            self.expect("to")
            dst = self.parse_type()
            kind = PtrType if op == "bitcast" else IntType
            if not (isinstance(src, kind) and isinstance(dst, kind)):
                raise self.unsupported(f"{op} from {src} to {dst}", t)
            return Cast(result, op, src, value, dst)
        if op == "alloca":
            ty = self.parse_type()
            if self.at(",") and self.peek().kind == "word" and self.peek().text != "align":
                raise self.unsupported("alloca with element count", t)
            return Alloca(result, ty)
        if op == "load":
            if self.accept("volatile") or self.at("atomic"):
                if self.at("atomic"):
                    raise self.unsupported("atomic load", t)
            ty = self.parse_type()
            self.expect(",")
            pty = self.parse_type()
            return Load(result, ty, pty, self.parse_value(pty))
        if op == "store":
            if self.accept("volatile") or self.at("atomic"):
                if self.at("atomic"):
                    raise self.unsupported("atomic store", t)
            ty = self.parse_type()
            value = self.parse_value(ty)
            self.expect(",")
            pty = self.parse_type()
            return Store(ty, value, pty, self.parse_value(pty))
        if op == "getelementptr":
            inbounds = self.accept("inbounds")
            src = self.parse_type()
            self.expect(",")
            pty = self.parse_type()
            if not isinstance(pty, PtrType):
                raise self.unsupported(f"getelementptr over {pty}", t)
            ptr = self.parse_value(pty)
            indices: list[tuple[IntType, Value]] = []
            while self.at(",") and self.peek().kind == "word" and self.peek().text.startswith("i"):
                self.advance()
                ity = self.parse_type()
                if not isinstance(ity, IntType):
                    raise self.unsupported(f"getelementptr index of type {ity}", t)
                indices.append((ity, self.parse_value(ity)))
            return Gep(result, src, pty, ptr, tuple(indices), inbounds)
        if op == "select":
            cty = self.parse_type()
            cond = self.parse_value(cty)
            self.expect(",")
            ty = self.parse_type()
            a = self.parse_value(ty)
            self.expect(",")
            self.parse_type()
            return Select(result, cond, ty, a, self.parse_value(ty))
        if op == "phi":
            ty = self.parse_type()
            incoming: list[tuple[Value, str]] = []
            while True:
                self.expect("[")
                v = self.parse_value(ty)
                self.expect(",")
                incoming.append((v, self.parse_label_ref()))
                self.expect("]")
                if not (self.at(",") and self.peek().text == "["):
                    break
                self.advance()
            return Phi(result, ty, tuple(incoming))
        if op in UNSUPPORTED_OPS:
            raise self.unsupported(f"instruction {op}", t)
        raise self.error("unknown instruction", "opcode", t)

    def parse_call(self, result: str | None) -> Call:
        start = self.tok
        while self.tok.text in CALL_PREFIX:
            self.advance()
        self.expect("call")
        while self.tok.kind == "word" and self.tok.text in ("fastcc", "ccc", "coldcc"):
            self.advance()
        self.skip_return_attrs()
        ret = self.parse_type(allow_void=True)
        fn_ty: FuncType | None = None
        if self.at("("):
            params, variadic = self.parse_type_list()
            fn_ty = FuncType(ret, tuple(params), variadic)
            self.accept("*")
        if self.tok.kind != "global":
            raise self.unsupported("indirect call", start)
        callee = _unquote(self.advance().text[1:])
        self.expect("(")
        args: list[tuple[IrType, Value]] = []
        while not self.at(")"):
            if args:
                self.expect(",")
            ty = self.parse_type()
            self.skip_param_attrs()
            args.append((ty, self.parse_value(ty)))
        self.expect(")")
        while self.tok.kind == "attrgrp" or (self.tok.kind == "word" and self.tok.text in PARAM_ATTRS):
            self.advance()
        if result is not None and isinstance(ret, VoidType):
            raise ParseError(start.span, "void call cannot define a result")
        return Call(result, ret, callee, tuple(args), fn_ty)

    # -- types and values --------------------------------------------------

    def parse_type_list(self) -> tuple[list[IrType], bool]:
        self.expect("(")
        params: list[IrType] = []
        variadic = False
        while not self.at(")"):
            if params or variadic:
                self.expect(",")
            if self.accept("..."):
                variadic = True
                continue
            params.append(self.parse_type())
        self.expect(")")
        return params, variadic

    def parse_type(self, allow_void: bool = False) -> IrType:
        t = self.tok
        ty: IrType
        if t.kind == "word" and t.text == "void":
            self.advance()
            ty = VOID
        elif t.kind == "word" and re.fullmatch(r"i[0-9]+", t.text):
            self.advance()
            ty = IntType(int(t.text[1:]))
        elif t.kind == "word" and t.text == "ptr":
            self.advance()
            ty = PtrType(None)
            if self.at("addrspace"):
                raise self.unsupported("address spaces")
        elif self.at("["):
            self.advance()
            n = self.expect_int()
            if n < 0:
                raise self.error("array length must be non-negative")
            self.expect("x")
            elem = self.parse_type()
            self.expect("]")
            ty = ArrayType(n, elem)
        elif t.kind == "word" and t.text in UNSUPPORTED_TYPES:
            raise self.unsupported(f"type {t.text}")
        elif self.at("{") or self.at("<"):
            raise self.unsupported("struct or vector type")
        elif t.kind == "local":
            raise self.unsupported(f"named type {t.text}")
        else:
            raise self.error("expected a type", "type")
        while True:
            if self.at("*"):
                self.advance()
                ty = PtrType(ty)
            elif self.at("(") and self.peek().kind != "local":
                # function type used as a pointee, e.g. ``i32 (i8*, ...)*``
                save = self.i
                try:
                    params, variadic = self.parse_type_list()
                except ParseError:
                    self.i = save
                    break
                if not self.at("*"):
                    self.i = save
                    break
                ty = FuncType(ty, tuple(params), variadic)
            else:
                break
        if isinstance(ty, VoidType) and not allow_void:
            raise ParseError(t.span, "void is only valid as a return type")
        return ty

    def parse_value(self, ty: IrType) -> Value:
        t = self.tok
        if t.kind == "local":
            self.advance()
            return LocalRef(_unquote(t.text[1:]))
        if t.kind == "global":
            self.advance()
            return GlobalRef(_unquote(t.text[1:]))
        return self.parse_constant(ty)

    def parse_constant(self, ty: IrType) -> Value:
        t = self.tok
        if t.kind == "int":
            if not isinstance(ty, IntType):
                raise self.error(f"integer literal for type {ty}")
            self.advance()
            return ConstInt(ty, int(t.text))
        if t.kind == "word":
            if t.text in ("true", "false"):
                if ty != IntType(1):
                    raise self.error(f"boolean literal for type {ty}")
                self.advance()
                return ConstInt(ty, 1 if t.text == "true" else 0)
            if t.text == "null":
                self.advance()
                return NullPtr()
            if t.text in ("undef", "poison"):
                self.advance()
                return Undef(ty)
            if t.text == "zeroinitializer":
                self.advance()
                return ZeroInit(ty)
            if t.text in ("getelementptr", "bitcast", "ptrtoint", "inttoptr", "add", "sub"):
                raise self.unsupported("constant expression")
        if t.kind == "global":
            self.advance()
            return GlobalRef(_unquote(t.text[1:]))
        if t.kind == "cstr":
            self.advance()
            return ConstBytes(_decode_escapes(t.text[2:-1]))
        if self.at("[") and isinstance(ty, ArrayType):
            self.advance()
            items: list[Value] = []
            while not self.at("]"):
                if items:
                    self.expect(",")
                ety = self.parse_type()
                items.append(self.parse_constant(ety))
            self.expect("]")
            return ConstArray(ty.elem, tuple(items))
        raise self.error("expected a value", "value")


def parse_module(text: str) -> IrModule:
    """Parse ``.ll`` text into a validated module."""
    module = _Parser(text).parse_module()
    return check(module, "parsed module")


def parse_unchecked(text: str) -> IrModule:
    """Parse without the validation step (for diagnostics tooling)."""
    return _Parser(text).parse_module()
