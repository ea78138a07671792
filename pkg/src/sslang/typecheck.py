"""Syntax-directed type checking of process definitions.

Each definition is checked on its own against the declared interfaces of
every definition in the program.  Types are isorecursive: a type variable
only equals itself, and its body is reached by an explicit unfolding
message.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .core import (
    Call,
    CaseLeft,
    CaseMuLeft,
    CaseNuRight,
    CaseRight,
    CloseRight,
    Cut,
    Diagnostic,
    Forward,
    One,
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
    UnknownTypeError,
    WaitLeft,
    With,
    show_type,
)

Interfaces = Dict[str, Tuple[Optional[SessionType], SessionType]]
Port = Tuple[str, SessionType]


def types_equal(a: SessionType, b: SessionType) -> bool:
    if isinstance(a, One) or isinstance(b, One):
        return isinstance(a, One) and isinstance(b, One)
    if isinstance(a, TVar) or isinstance(b, TVar):
        return isinstance(a, TVar) and isinstance(b, TVar) and a.name == b.name
    if type(a) is not type(b):
        return False
    da, db = dict(a.branches), dict(b.branches)
    if da.keys() != db.keys() or len(da) != len(a.branches) or len(db) != len(b.branches):
        return False
    return all(types_equal(da[k], db[k]) for k in da)


@dataclass(frozen=True)
class TypingContext:
    left: Optional[Port]
    right: Port


class _Fail(Exception):
    def __init__(self, message: str, proc: Process):
        self.message = message
        self.proc = proc


class _Checker:
    def __init__(self, sig: Signature, defs: Interfaces, name: str):
        self.sig = sig
        self.defs = defs
        self.name = name
        self.errors: List[Diagnostic] = []
        # every (channel, type) pair the checker assigned, for soundness probes
        self.assigned: List[Tuple[str, SessionType]] = []

    def report(self, message: str, p: Process) -> None:
        self.errors.append(Diagnostic("error", f"{self.name}: {message}", p.span))

    def unfold(self, t: str, pol: Polarity, p: Process) -> SessionType:
        try:
            e = self.sig.lookup(t)
        except UnknownTypeError:
            raise _Fail(f"unknown type variable {t}", p)
        if e.polarity != pol:
            raise _Fail(f"{t} has polarity {e.polarity.value}, not {pol.value}", p)
        return e.body

    def need_left(self, ctx: TypingContext, ch: str, p: Process) -> SessionType:
        if ctx.left is None:
            raise _Fail(f"channel {ch} used on the left but the left context is empty", p)
        if ctx.left[0] != ch:
            raise _Fail(f"channel-side mismatch: {ch} is not the left channel {ctx.left[0]}", p)
        return ctx.left[1]

    def need_right(self, ctx: TypingContext, ch: str, p: Process) -> SessionType:
        if ctx.right[0] != ch:
            raise _Fail(f"channel-side mismatch: {ch} is not the right channel {ctx.right[0]}", p)
        return ctx.right[1]

    def check(self, ctx: TypingContext, p: Process) -> None:
        """Check ``p``; failures are recorded, one per branch."""
        try:
            self._check(ctx, p)
        except _Fail as f:
            self.report(f.message, f.proc)

    def _check(self, ctx: TypingContext, p: Process) -> None:
        if ctx.left is not None:
            self.assigned.append(ctx.left)
        self.assigned.append(ctx.right)
        if isinstance(p, Forward):
            a = self.need_left(ctx, p.src, p)
            b = self.need_right(ctx, p.dst, p)
            if not types_equal(a, b):
                raise _Fail(f"forward between unequal types {show_type(a)} and {show_type(b)}", p)
            return
        if isinstance(p, Cut):
            self.check(TypingContext(ctx.left, (p.channel, p.type)), p.left)
            self.check(TypingContext((p.channel, p.type), ctx.right), p.right)
            return
        if isinstance(p, SendLabelRight):
            a = self.need_right(ctx, p.channel, p)
            if not isinstance(a, Plus):
                raise _Fail(f"R.{p.label} needs an internal choice on the right, found {show_type(a)}", p)
            b = a.get(p.label)
            if b is None:
                raise _Fail(f"label {p.label} not in offered choice {show_type(a)}", p)
            return self._check(TypingContext(ctx.left, (p.channel, b)), p.cont)
        if isinstance(p, SendLabelLeft):
            a = self.need_left(ctx, p.channel, p)
            if not isinstance(a, With):
                raise _Fail(f"L.{p.label} needs an external choice on the left, found {show_type(a)}", p)
            b = a.get(p.label)
            if b is None:
                raise _Fail(f"label {p.label} not in offered choice {show_type(a)}", p)
            return self._check(TypingContext((p.channel, b), ctx.right), p.cont)
        if isinstance(p, (CaseLeft, CaseRight)):
            if isinstance(p, CaseLeft):
                a = self.need_left(ctx, p.channel, p)
                want = Plus
            else:
                a = self.need_right(ctx, p.channel, p)
                want = With
            if not isinstance(a, want):
                kind = "internal" if want is Plus else "external"
                raise _Fail(f"case needs an {kind} choice, found {show_type(a)}", p)
            have = [l for l, _ in p.branches]
            offered = a.labels()
            missing = [l for l in offered if l not in have]
            extra = [l for l in have if l not in offered]
            if missing:
                raise _Fail(f"case is missing branch {missing[0]}", p)
            if extra:
                raise _Fail(f"label {extra[0]} not in offered choice {show_type(a)}", p)
            for l, q in p.branches:
                b = a.get(l)
                if isinstance(p, CaseLeft):
                    self.check(TypingContext((p.channel, b), ctx.right), q)
                else:
                    self.check(TypingContext(ctx.left, (p.channel, b)), q)
            return
        if isinstance(p, CloseRight):
            a = self.need_right(ctx, p.channel, p)
            if not isinstance(a, One):
                raise _Fail(f"closeR needs type 1 on the right, found {show_type(a)}", p)
            if ctx.left is not None:
                raise _Fail("1R requires empty left context", p)
            return
        if isinstance(p, WaitLeft):
            a = self.need_left(ctx, p.channel, p)
            if not isinstance(a, One):
                raise _Fail(f"waitL needs type 1 on the left, found {show_type(a)}", p)
            return self._check(TypingContext(None, ctx.right), p.cont)
        if isinstance(p, SendMuRight):
            a = self.need_right(ctx, p.channel, p)
            self._expect_var(a, p.tvar, p)
            b = self.unfold(p.tvar, Polarity.MU, p)
            return self._check(TypingContext(ctx.left, (p.channel, b)), p.cont)
        if isinstance(p, CaseNuRight):
            a = self.need_right(ctx, p.channel, p)
            self._expect_var(a, p.tvar, p)
            b = self.unfold(p.tvar, Polarity.NU, p)
            return self._check(TypingContext(ctx.left, (p.channel, b)), p.cont)
        if isinstance(p, CaseMuLeft):
            a = self.need_left(ctx, p.channel, p)
            self._expect_var(a, p.tvar, p)
            b = self.unfold(p.tvar, Polarity.MU, p)
            return self._check(TypingContext((p.channel, b), ctx.right), p.cont)
        if isinstance(p, SendNuLeft):
            a = self.need_left(ctx, p.channel, p)
            self._expect_var(a, p.tvar, p)
            b = self.unfold(p.tvar, Polarity.NU, p)
            return self._check(TypingContext((p.channel, b), ctx.right), p.cont)
        if isinstance(p, Call):
            return self._call(ctx, p)
        raise _Fail(f"unknown process form {type(p).__name__}", p)

    def _expect_var(self, a: SessionType, t: str, p: Process) -> None:
        if not (isinstance(a, TVar) and a.name == t):
            raise _Fail(f"unfolding {t} on a channel of type {show_type(a)}", p)

    def _call(self, ctx: TypingContext, p: Call) -> None:
        if p.name not in self.defs:
            raise _Fail(f"call to undefined process {p.name}", p)
        want_left, want_right = self.defs[p.name]
        self.need_right(ctx, p.right, p)
        if not types_equal(ctx.right[1], want_right):
            raise _Fail(
                f"call {p.name}: branch continues at type {show_type(ctx.right[1])} "
                f"but calls at {show_type(want_right)}",
                p,
            )
        if (ctx.left is None) != (want_left is None):
            have = "empty" if ctx.left is None else show_type(ctx.left[1])
            want = "empty" if want_left is None else show_type(want_left)
            raise _Fail(f"call {p.name}: left context is {have} but {p.name} expects {want}", p)
        if ctx.left is not None:
            self.need_left(ctx, p.left, p)
            if not types_equal(ctx.left[1], want_left):
                raise _Fail(
                    f"call {p.name}: left channel has type {show_type(ctx.left[1])} "
                    f"but {p.name} expects {show_type(want_left)}",
                    p,
                )
        elif p.left is not None:
            raise _Fail(f"call {p.name}: passes left channel {p.left} but none is in scope", p)


def check_def(sig: Signature, defs: Interfaces, d: ProcDef) -> List[Diagnostic]:
    """Empty list when ``d`` is well typed."""
    c = _Checker(sig, defs, d.name)
    c.check(TypingContext(d.left, d.right), d.body)
    return c.errors


def check_process(sig: Signature, defs: Interfaces, left: Optional[Port], right: Port,
                  p: Process, name: str = "process") -> List[Diagnostic]:
    c = _Checker(sig, defs, name)
    c.check(TypingContext(left, right), p)
    return c.errors


def check_program(p: Program) -> List[Diagnostic]:
    out: List[Diagnostic] = []
    if p.main not in {d.name for d in p.defs}:
        out.append(Diagnostic("error", f"main process {p.main} is not defined"))
    defs = p.interfaces()
    for d in p.defs:
        out.extend(check_def(p.signature, defs, d))
    return out
