"""Concrete syntax: lexer, recursive-descent parser and canonical printer.

A program is a sequence of declarations::

    type nat =[1] mu +{ z : 1, s : nat }
    proc Copy : nat |- nat =
      caseL ( mu_nat => caseL ( z => R.mu_nat; R.z; waitL; closeR
                              | s => R.mu_nat; R.s; call Copy ) )
    order[1] Copy
    main Copy

Channel names are implicit.  A definition's own ports are named ``x``
(left) and ``y`` (right); a cut ``w : A <- P ; Q`` binds a new channel
which the spawned ``P`` provides and the continuation ``Q`` uses on its
left.  ``%`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from . import core
from .core import (
    Call,
    CaseLeft,
    Diagnostic,
    CaseMuLeft,
    CaseNuRight,
    CaseRight,
    CloseRight,
    Cut,
    Forward,
    One,
    OrderFamily,
    Plus,
    Polarity,
    ProcDef,
    Process,
    Program,
    SendLabelLeft,
    SendLabelRight,
    SendMuRight,
    SendNuLeft,
    SessionType,
    Signature,
    TVar,
    TypeDef,
    WaitLeft,
    With,
)

LEFT_PORT = "x"
RIGHT_PORT = "y"

KEYWORDS = {
    "type", "proc", "order", "main", "mu", "nu", "caseL", "caseR",
    "closeR", "waitL", "fwd", "call", "R", "L",
}


@dataclass
class SourceFile:
    text: str
    path: str = "<input>"
    _line_starts: List[int] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", self.text)]

    @classmethod
    def read(cls, path: Union[str, Path]) -> "SourceFile":
        p = Path(path)
        return cls(p.read_text(encoding="utf-8"), str(p))

    def line_col(self, offset: int) -> Tuple[int, int]:
        """1-based line and column of a character offset."""
        offset = max(0, min(offset, len(self.text)))
        line = bisect.bisect_right(self._line_starts, offset) - 1
        return line + 1, offset - self._line_starts[line] + 1


def diagnostic(src: Optional[SourceFile], message: str, span: core.Span = None,
               severity: str = "error") -> Diagnostic:
    if src is None:
        return Diagnostic(severity, message, span)
    line, col = src.line_col(span[0]) if span else (0, 0)
    return Diagnostic(severity, message, span, src.path, line, col)


class ParseError(Exception):
    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<arrow><-|=>|\|-)
  | (?P<int>\d+)
  | (?P<ident>[^\W\d]\w*|\$)
  | (?P<punct>[=\[\](){},;:.|+&<~])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, int, punct, eof
    text: str
    start: int
    end: int


def tokenize(src: SourceFile) -> List[Token]:
    out: List[Token] = []
    pos = 0
    text = src.text
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError([diagnostic(src, f"unexpected character {text[pos]!r}", (pos, pos + 1))])
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            if kind == "ident" and tok in KEYWORDS:
                kind = "keyword"
            elif kind == "arrow":
                kind = "punct"
            out.append(Token(kind, tok, m.start(), m.end()))
        pos = m.end()
    out.append(Token("eof", "", len(text), len(text)))
    return out


# Parser


class _Parser:
    def __init__(self, src: SourceFile):
        self.src = src
        self.toks = tokenize(src)
        self.i = 0
        # per-definition channel bookkeeping
        self.taken: set = set()

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "keyword") and self.tok.text == text

    def fail(self, msg: str, tok: Optional[Token] = None):
        t = tok or self.tok
        raise ParseError([diagnostic(self.src, msg, (t.start, max(t.end, t.start + 1)))])

    def expect(self, text: str) -> Token:
        if not self.at(text):
            got = self.tok.text or "end of input"
            self.fail(f"expected {text!r}, found {got!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            got = self.tok.text or "end of input"
            self.fail(f"expected {what}, found {got!r}")
        t = self.tok
        self.i += 1
        return t

    # declarations

    def program(self) -> Program:
        types: List[TypeDef] = []
        defs: List[ProcDef] = []
        families: List[OrderFamily] = []
        main: Optional[str] = None
        errors: List[Diagnostic] = []
        seen_types: Dict[str, Token] = {}
        seen_procs: Dict[str, Token] = {}
        seen_families: Dict[int, Token] = {}
        while self.tok.kind != "eof":
            if self.at("type"):
                name_tok, td = self.type_decl()
                if td.name in seen_types:
                    errors.append(diagnostic(self.src, f"duplicate definition of type {td.name}",
                                             (name_tok.start, name_tok.end)))
                seen_types[td.name] = name_tok
                types.append(td)
            elif self.at("proc"):
                name_tok, d = self.proc_decl()
                if d.name in seen_procs:
                    errors.append(diagnostic(self.src, f"duplicate definition of process {d.name}",
                                             (name_tok.start, name_tok.end)))
                seen_procs[d.name] = name_tok
                defs.append(d)
            elif self.at("order"):
                idx_tok, fam = self.order_decl()
                if fam.index in seen_families:
                    errors.append(diagnostic(self.src, f"duplicate order family {fam.index}",
                                             (idx_tok.start, idx_tok.end)))
                seen_families[fam.index] = idx_tok
                families.append(fam)
            elif self.at("main"):
                kw = self.expect("main")
                name = self.ident("process name")
                if main is not None:
                    errors.append(diagnostic(self.src, "duplicate main declaration", (kw.start, kw.end)))
                main = name.text
            else:
                self.fail(f"expected a declaration, found {self.tok.text!r}")
        if main is None:
            errors.append(diagnostic(self.src, "missing main declaration", (len(self.src.text), len(self.src.text))))
        if errors:
            raise ParseError(errors)
        return Program(Signature(tuple(types)), tuple(defs), main, tuple(families))

    def type_decl(self) -> Tuple[Token, TypeDef]:
        self.expect("type")
        name = self.ident("type name")
        self.expect("=")
        self.expect("[")
        if self.tok.kind != "int":
            self.fail("expected a priority")
        prio_tok = self.tok
        self.i += 1
        prio = int(prio_tok.text)
        if prio <= 0:
            self.fail("priority must be positive", prio_tok)
        self.expect("]")
        if self.accept("mu"):
            pol = Polarity.MU
        elif self.accept("nu"):
            pol = Polarity.NU
        else:
            self.fail("expected polarity 'mu' or 'nu'")
        body = self.stype()
        return name, TypeDef(name.text, prio, pol, body)

    def order_decl(self) -> Tuple[Token, OrderFamily]:
        self.expect("order")
        self.expect("[")
        if self.tok.kind != "int":
            self.fail("expected a family index")
        idx_tok = self.tok
        self.i += 1
        self.expect("]")
        members: List[str] = []
        pairs: List[Tuple[str, str, str]] = []
        while True:
            prev = self.ident("process name").text
            members.append(prev)
            while self.at("<") or self.at("~"):
                op = self.tok.text
                self.i += 1
                nxt = self.ident("process name").text
                members.append(nxt)
                pairs.append((prev, op, nxt))
                prev = nxt
            if not self.accept(","):
                break
        return idx_tok, OrderFamily(int(idx_tok.text), frozenset(members), tuple(pairs))

    def proc_decl(self) -> Tuple[Token, ProcDef]:
        start = self.expect("proc")
        name = self.ident("process name")
        self.expect(":")
        left_type: Optional[SessionType] = None
        if self.accept("."):
            pass
        elif not self.at("|-"):
            left_type = self.stype()
        self.expect("|-")
        right_type = self.stype()
        self.expect("=")
        self.taken = {LEFT_PORT, RIGHT_PORT}
        left = LEFT_PORT if left_type is not None else None
        names = {LEFT_PORT: LEFT_PORT} if left is not None else {}
        body = self.proc(left, RIGHT_PORT, names)
        d = ProcDef(
            name.text,
            None if left_type is None else (LEFT_PORT, left_type),
            (RIGHT_PORT, right_type),
            body,
            (start.start, self.toks[self.i - 1].end),
        )
        return name, d

    # types

    def stype(self) -> SessionType:
        # binary sugar A + B / A & B, right associative, one operator per chain
        atoms = [self.stype_atom()]
        op: Optional[str] = None
        while self.at("+") or self.at("&"):
            if op is not None and self.tok.text != op:
                self.fail("mixing infix + and & requires parentheses")
            op = self.tok.text
            self.i += 1
            atoms.append(self.stype_atom())
        out = atoms[-1]
        for a in reversed(atoms[:-1]):
            out = core.plus2(a, out) if op == "+" else core.with2(a, out)
        return out

    def stype_atom(self) -> SessionType:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            if t.text == "1":
                return One()
            if t.text == "0":
                return core.ZERO
            self.fail(f"unexpected number {t.text} in type", t)
        if t.kind == "ident":
            self.i += 1
            return TVar(t.text)
        if self.at("("):
            self.i += 1
            a = self.stype()
            self.expect(")")
            return a
        if self.at("+") or self.at("&"):
            op = t.text
            self.i += 1
            self.expect("{")
            branches: List[Tuple[str, SessionType]] = []
            labels: set = set()
            if not self.at("}"):
                while True:
                    lt = self.label()
                    if lt.text in labels:
                        self.fail(f"duplicate label {lt.text}", lt)
                    labels.add(lt.text)
                    self.expect(":")
                    branches.append((lt.text, self.stype()))
                    if not self.accept(","):
                        break
            self.expect("}")
            return Plus(tuple(branches)) if op == "+" else With(tuple(branches))
        self.fail(f"expected a session type, found {t.text or 'end of input'!r}")

    def label(self) -> Token:
        t = self.ident("label")
        if t.text.startswith(("mu_", "nu_")):
            self.fail(f"label {t.text!r} may not start with mu_ or nu_", t)
        return t

    # processes

    def fresh(self, user: str) -> str:
        if user not in self.taken:
            self.taken.add(user)
            return user
        k = 1
        while f"{user}_{k}" in self.taken:
            k += 1
        name = f"{user}_{k}"
        self.taken.add(name)
        return name

    def proc(self, left: Optional[str], right: str, names: Dict[str, str]) -> Process:
        t = self.tok
        sp = lambda: (t.start, self.toks[self.i - 1].end)  # noqa: E731

        def need_left() -> str:
            if left is None:
                self.fail("no left channel in scope here", t)
            return left

        if self.accept("("):
            p = self.proc(left, right, names)
            self.expect(")")
            return p
        if self.accept("fwd"):
            need_left()
            return Forward(right, left, sp())
        if self.accept("closeR"):
            return CloseRight(right, sp())
        if self.accept("waitL"):
            ch = need_left()
            self.expect(";")
            cont = self.proc(None, right, {})
            return WaitLeft(ch, cont, (t.start, cont.span[1] if cont.span else t.end))
        if self.at("R") or self.at("L"):
            side = t.text
            self.i += 1
            self.expect(".")
            lab = self.ident("label or unfolding")
            self.expect(";")
            ch = right if side == "R" else need_left()
            cont = self.proc(left, right, names)
            span = (t.start, lab.end)
            if lab.text.startswith("mu_"):
                if side != "R":
                    self.fail("mu unfoldings are sent to the right (R.mu_t)", lab)
                return SendMuRight(ch, lab.text[3:], cont, span)
            if lab.text.startswith("nu_"):
                if side != "L":
                    self.fail("nu unfoldings are sent to the left (L.nu_t)", lab)
                return SendNuLeft(ch, lab.text[3:], cont, span)
            if side == "R":
                return SendLabelRight(ch, lab.text, cont, span)
            return SendLabelLeft(ch, lab.text, cont, span)
        if self.at("caseL") or self.at("caseR"):
            side = t.text[-1]
            self.i += 1
            ch = right if side == "R" else need_left()
            self.expect("(")
            arms: List[Tuple[Token, Process]] = []
            if not self.at(")"):
                while True:
                    lab = self.ident("label or unfolding")
                    self.expect("=>")
                    arms.append((lab, self.proc(left, right, names)))
                    if not self.accept("|"):
                        break
            self.expect(")")
            span = (t.start, self.toks[self.i - 1].end)
            unf = [a for a in arms if a[0].text.startswith(("mu_", "nu_"))]
            if unf:
                if len(arms) != 1:
                    self.fail("an unfolding case has exactly one branch", unf[0][0])
                lab, body = arms[0]
                if side == "L":
                    if not lab.text.startswith("mu_"):
                        self.fail("caseL receives mu unfoldings only", lab)
                    return CaseMuLeft(ch, lab.text[3:], body, span)
                if not lab.text.startswith("nu_"):
                    self.fail("caseR receives nu unfoldings only", lab)
                return CaseNuRight(ch, lab.text[3:], body, span)
            seen: set = set()
            for lab, _ in arms:
                if lab.text in seen:
                    self.fail(f"duplicate branch {lab.text}", lab)
                seen.add(lab.text)
            branches = tuple((lab.text, body) for lab, body in arms)
            return (CaseLeft if side == "L" else CaseRight)(ch, branches, span)
        if self.accept("call"):
            name = self.ident("process name")
            if self.tok.kind == "ident":
                arg = self.tok
                self.i += 1
                if names.get(arg.text) != left or left is None:
                    self.fail(f"call argument {arg.text!r} is not the current left channel", arg)
            return Call(name.text, left, right, sp())
        if t.kind == "ident" and self.toks[self.i + 1].text == ":":
            self.i += 2
            a = self.stype()
            self.expect("<-")
            ch = self.fresh(t.text)
            p = self.proc(left, ch, names)
            self.expect(";")
            q = self.proc(ch, right, {**names, t.text: ch})
            return Cut(ch, a, p, q, (t.start, self.toks[self.i - 1].end))
        self.fail(f"expected a process, found {t.text or 'end of input'!r}")


def parse_program(src: Union[SourceFile, str]) -> Program:
    """Parse a whole program.  Raises :class:`ParseError` with diagnostics."""
    if isinstance(src, str):
        src = SourceFile(src)
    return _Parser(src).program()


def parse_file(path: Union[str, Path]) -> Program:
    return parse_program(SourceFile.read(path))


def parse_type(text: str) -> SessionType:
    p = _Parser(SourceFile(text))
    a = p.stype()
    if p.tok.kind != "eof":
        p.fail("trailing input after type")
    return a


# Printer

show_type = core.show_type


def show_process(p: Process, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(p, Forward):
        return "fwd"
    if isinstance(p, CloseRight):
        return "closeR"
    if isinstance(p, Call):
        return f"call {p.name}"
    if isinstance(p, WaitLeft):
        return "waitL; " + show_process(p.cont, indent)
    if isinstance(p, SendLabelRight):
        return f"R.{p.label}; " + show_process(p.cont, indent)
    if isinstance(p, SendLabelLeft):
        return f"L.{p.label}; " + show_process(p.cont, indent)
    if isinstance(p, SendMuRight):
        return f"R.mu_{p.tvar}; " + show_process(p.cont, indent)
    if isinstance(p, SendNuLeft):
        return f"L.nu_{p.tvar}; " + show_process(p.cont, indent)
    if isinstance(p, CaseMuLeft):
        return f"caseL ( mu_{p.tvar} => " + show_process(p.cont, indent) + " )"
    if isinstance(p, CaseNuRight):
        return f"caseR ( nu_{p.tvar} => " + show_process(p.cont, indent) + " )"
    if isinstance(p, (CaseLeft, CaseRight)):
        kw = "caseL" if isinstance(p, CaseLeft) else "caseR"
        if not p.branches:
            return f"{kw} ( )"
        sep = "\n" + pad + "  | "
        arms = sep.join(f"{l} => {show_process(q, indent + 1)}" for l, q in p.branches)
        return f"{kw} (\n{pad}    {arms} )"
    if isinstance(p, Cut):
        left = show_process(p.left, indent)
        if isinstance(p.left, Cut):
            left = f"( {left} )"
        return f"{p.channel} : {show_type(p.type)} <- {left} ;\n{pad}" + show_process(p.right, indent)
    raise TypeError(f"not a process: {p!r}")


def print_program(p: Program) -> str:
    lines: List[str] = []
    for e in p.signature.entries:
        lines.append(f"type {e.name} =[{e.priority}] {e.polarity.value} {show_type(e.body)}")
    if p.signature.entries:
        lines.append("")
    for d in p.defs:
        left = "." if d.left is None else show_type(d.left[1])
        lines.append(f"proc {d.name} : {left} |- {show_type(d.right[1])} =")
        lines.append("  " + show_process(d.body, 1))
        lines.append("")
    for fam in p.order:
        mentioned = {a for a, _, _ in fam.pairs} | {b for _, _, b in fam.pairs}
        items = [f"{a} {op} {b}" for a, op, b in fam.pairs]
        items += sorted(fam.members - mentioned)
        lines.append(f"order[{fam.index}] " + ", ".join(items))
    lines.append(f"main {p.main}")
    return "\n".join(lines) + "\n"
