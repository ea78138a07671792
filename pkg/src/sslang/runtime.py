"""Synchronous operational semantics on configurations.

A configuration is a chain ``P0 |a1 P1 |a2 ... Pn`` of processes where
neighbours share exactly one channel.  The scheduler is deterministic: it
fires the leftmost enabled transition.  Runtime channel names carry a
``#n`` suffix so they never collide with names written in source text.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

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
    Process,
    Program,
    SendLabelLeft,
    SendLabelRight,
    SendMuRight,
    SendNuLeft,
    SessionType,
    WaitLeft,
    free_channels,
    rename,
    show_type,
)
from .typecheck import check_process, types_equal

DEFAULT_FUEL = 10_000

RULES = (
    "forward",
    "spawn",
    "label-right",
    "label-left",
    "close-right",
    "close-left",
    "mu-right",
    "nu-left",
    "unfold",
)

LEFT_ACTIONS = (SendLabelLeft, CaseLeft, WaitLeft, CaseMuLeft, SendNuLeft)
RIGHT_ACTIONS = (SendLabelRight, CaseRight, CloseRight, SendMuRight, CaseNuRight)


@dataclass(frozen=True)
class RunProc:
    proc: Process
    left: Optional[str]
    right: str


@dataclass(frozen=True)
class Configuration:
    program: Program
    procs: Tuple[RunProc, ...]
    types: Dict[str, SessionType]
    ext_left: Optional[str]
    ext_right: Optional[str]
    counter: int = 0

    @property
    def ext_left_type(self) -> Optional[SessionType]:
        return None if self.ext_left is None else self.types[self.ext_left]

    @property
    def ext_right_type(self) -> Optional[SessionType]:
        return None if self.ext_right is None else self.types[self.ext_right]

    def junctions(self) -> List[str]:
        return [q.right for q in self.procs[:-1]]

    def __len__(self) -> int:
        return len(self.procs)

    def describe(self) -> str:
        if not self.procs:
            return "(empty)"
        parts = []
        for k, q in enumerate(self.procs):
            if k:
                parts.append(f"|{q.left}")
            parts.append(_head(q.proc))
        return " ".join(parts)


def _head(p: Process) -> str:
    if isinstance(p, Call):
        return f"call {p.name}"
    if isinstance(p, Cut):
        return f"spawn {p.channel}"
    if isinstance(p, Forward):
        return "fwd"
    return type(p).__name__


def _fresh(counter: int, base: str) -> Tuple[str, int]:
    return f"{base.split('#')[0]}#{counter}", counter + 1


def load(p: Program) -> Configuration:
    """A configuration running ``main`` alone, with its interface as endpoints."""
    d = p.get(p.main)
    counter = 0
    types: Dict[str, SessionType] = {}
    left = None
    if d.left is not None:
        left, counter = _fresh(counter, "l")
        types[left] = d.left[1]
    right, counter = _fresh(counter, "r")
    types[right] = d.right[1]
    proc = RunProc(Call(d.name, left, right), left, right)
    return Configuration(p, (proc,), types, left, right, counter)


def spawn(p: Program, name: str) -> Configuration:
    """Like :func:`load` but starting from an arbitrary definition."""
    return load(replace(p, main=name))


class CompositionError(ValueError):
    pass


def _rename_config(c: Configuration, counter: int) -> Tuple[Configuration, int, Dict[str, str]]:
    names: List[str] = []
    for q in c.procs:
        for n in (q.left, q.right):
            if n is not None and n not in names:
                names.append(n)
    for n in (c.ext_left, c.ext_right):
        if n is not None and n not in names:
            names.append(n)
    sub: Dict[str, str] = {}
    for n in names:
        sub[n], counter = _fresh(counter, n)
    procs = tuple(
        RunProc(rename(q.proc, sub), None if q.left is None else sub[q.left], sub[q.right])
        for q in c.procs
    )
    types = {sub[k]: v for k, v in c.types.items() if k in sub}
    out = Configuration(
        c.program, procs, types,
        None if c.ext_left is None else sub[c.ext_left],
        None if c.ext_right is None else sub[c.ext_right],
        counter,
    )
    return out, counter, sub


def compose(left: Configuration, right: Configuration) -> Configuration:
    """Join two configurations on a fresh channel between them."""
    lp, rp = left.program, right.program
    if lp is not rp and (lp.signature != rp.signature or lp.defs != rp.defs):
        raise CompositionError("configurations run different programs")
    if left.ext_right is None or right.ext_left is None:
        raise CompositionError("both sides need an endpoint at the junction")
    a, b = left.ext_right_type, right.ext_left_type
    if not types_equal(a, b):
        raise CompositionError(f"junction type mismatch: {show_type(a)} vs {show_type(b)}")
    counter = max(left.counter, right.counter)
    l2, counter, _ = _rename_config(left, counter)
    r2, counter, _ = _rename_config(right, counter)
    z, counter = _fresh(counter, "j")
    sub_l = {l2.ext_right: z}
    sub_r = {r2.ext_left: z}
    procs = tuple(
        RunProc(rename(q.proc, sub_l), q.left, sub_l.get(q.right, q.right)) for q in l2.procs
    ) + tuple(
        RunProc(rename(q.proc, sub_r), sub_r.get(q.left, q.left) if q.left else None, q.right)
        for q in r2.procs
    )
    types = {k: v for k, v in l2.types.items() if k != l2.ext_right}
    types.update({k: v for k, v in r2.types.items() if k != r2.ext_left})
    types[z] = a
    return Configuration(left.program, procs, types, l2.ext_left, r2.ext_right, counter)


def compose_all(*configs: Configuration) -> Configuration:
    out = configs[0]
    for c in configs[1:]:
        out = compose(out, c)
    return out


# Stepping


@dataclass(frozen=True)
class StepRecord:
    index: int
    rule: str
    junction: Optional[str]
    payload: str

    def __str__(self) -> str:
        return f"{self.index:6d}  {self.rule:<12} {self.junction or '-':<10} {self.payload}"

    def to_json(self) -> dict:
        return {"step": self.index, "rule": self.rule, "junction": self.junction, "payload": self.payload}


@dataclass(frozen=True)
class Stepped:
    config: Configuration
    rule: str
    junction: Optional[str]
    payload: str


@dataclass(frozen=True)
class NoRedex:
    reason: str


StepOutcome = Union[Stepped, NoRedex]


@dataclass(frozen=True)
class EmptyConfig:
    pass


@dataclass(frozen=True)
class ExternalPoised:
    side: str
    action: str


@dataclass(frozen=True)
class FuelExhausted:
    steps: int


@dataclass(frozen=True)
class StuckError:
    description: str


RunOutcome = Union[EmptyConfig, ExternalPoised, FuelExhausted, StuckError]


def _unfold_body(c: Configuration, q: RunProc) -> Process:
    p = q.proc
    d = c.program.get(p.name)
    sub = {d.right[0]: q.right}
    if d.left is not None:
        sub[d.left[0]] = q.left
    return rename(d.body, sub)


def _set(procs: Tuple[RunProc, ...], k: int, *new: RunProc) -> Tuple[RunProc, ...]:
    return procs[:k] + tuple(new) + procs[k + 1:]


def _unary(c: Configuration, k: int) -> Optional[Stepped]:
    q = c.procs[k]
    p = q.proc
    if isinstance(p, Forward):
        z, counter = _fresh(c.counter, "z")
        a, b = q.left, q.right
        procs = list(c.procs)
        del procs[k]
        types = dict(c.types)
        ty = types.pop(a)
        types.pop(b, None)
        types[z] = ty
        sub = {a: z, b: z}
        procs = tuple(
            RunProc(rename(r.proc, sub), sub.get(r.left, r.left) if r.left else None, sub.get(r.right, r.right))
            for r in procs
        )
        ext_l = sub.get(c.ext_left, c.ext_left) if c.ext_left else None
        ext_r = sub.get(c.ext_right, c.ext_right) if c.ext_right else None
        nc = Configuration(c.program, procs, types, ext_l, ext_r, counter)
        return Stepped(nc, "forward", z, f"{a},{b} -> {z}")
    if isinstance(p, Cut):
        z, counter = _fresh(c.counter, p.channel)
        sub = {p.channel: z}
        left = RunProc(rename(p.left, sub), q.left, z)
        right = RunProc(rename(p.right, sub), z, q.right)
        types = dict(c.types)
        types[z] = p.type
        nc = Configuration(c.program, _set(c.procs, k, left, right), types, c.ext_left, c.ext_right, counter)
        return Stepped(nc, "spawn", z, show_type(p.type))
    if isinstance(p, Call):
        body = _unfold_body(c, q)
        nc = replace(c, procs=_set(c.procs, k, RunProc(body, q.left, q.right)))
        return Stepped(nc, "unfold", None, p.name)
    return None


def _binary(c: Configuration, k: int) -> Optional[Stepped]:
    if k + 1 >= len(c.procs):
        return None
    a, b = c.procs[k], c.procs[k + 1]
    p, q = a.proc, b.proc
    x = a.right
    sig = c.program.signature
    if isinstance(p, SendLabelRight) and isinstance(q, CaseLeft):
        branch = dict(q.branches)[p.label]
        types = dict(c.types)
        types[x] = types[x].get(p.label)
        procs = c.procs[:k] + (replace(a, proc=p.cont), replace(b, proc=branch)) + c.procs[k + 2:]
        return Stepped(replace(c, procs=procs, types=types), "label-right", x, p.label)
    if isinstance(p, CaseRight) and isinstance(q, SendLabelLeft):
        branch = dict(p.branches)[q.label]
        types = dict(c.types)
        types[x] = types[x].get(q.label)
        procs = c.procs[:k] + (replace(a, proc=branch), replace(b, proc=q.cont)) + c.procs[k + 2:]
        return Stepped(replace(c, procs=procs, types=types), "label-left", x, q.label)
    if isinstance(p, CloseRight) and isinstance(q, WaitLeft):
        types = dict(c.types)
        del types[x]
        procs = c.procs[:k] + (RunProc(q.cont, a.left, b.right),) + c.procs[k + 2:]
        return Stepped(replace(c, procs=procs, types=types), "close-right", x, "close")
    if isinstance(p, SendMuRight) and isinstance(q, CaseMuLeft) and p.tvar == q.tvar:
        types = dict(c.types)
        types[x] = sig.lookup(p.tvar).body
        procs = c.procs[:k] + (replace(a, proc=p.cont), replace(b, proc=q.cont)) + c.procs[k + 2:]
        return Stepped(replace(c, procs=procs, types=types), "mu-right", x, f"mu_{p.tvar}")
    if isinstance(p, CaseNuRight) and isinstance(q, SendNuLeft) and p.tvar == q.tvar:
        types = dict(c.types)
        types[x] = sig.lookup(p.tvar).body
        procs = c.procs[:k] + (replace(a, proc=p.cont), replace(b, proc=q.cont)) + c.procs[k + 2:]
        return Stepped(replace(c, procs=procs, types=types), "nu-left", x, f"nu_{p.tvar}")
    return None


def step(c: Configuration) -> StepOutcome:
    """Fire the leftmost enabled transition."""
    for k in range(len(c.procs)):
        s = _unary(c, k) or _binary(c, k)
        if s is not None:
            return s
    if not c.procs:
        return NoRedex("empty")
    return NoRedex("no internal transition")


def poised(c: Configuration) -> Optional[ExternalPoised]:
    if not c.procs:
        return None
    first, last = c.procs[0], c.procs[-1]
    if first.left is not None and first.left == c.ext_left and isinstance(first.proc, LEFT_ACTIONS):
        return ExternalPoised("left", _action(first.proc))
    if last.right == c.ext_right and isinstance(last.proc, RIGHT_ACTIONS):
        return ExternalPoised("right", _action(last.proc))
    return None


def _action(p: Process) -> str:
    if isinstance(p, (SendLabelRight, SendLabelLeft)):
        return f"send {p.label}"
    if isinstance(p, (CaseLeft, CaseRight)):
        return "receive label"
    if isinstance(p, CloseRight):
        return "close"
    if isinstance(p, WaitLeft):
        return "wait"
    if isinstance(p, (SendMuRight, SendNuLeft)):
        return f"send {'mu' if isinstance(p, SendMuRight) else 'nu'}_{p.tvar}"
    return f"receive {'mu' if isinstance(p, CaseMuLeft) else 'nu'}_{p.tvar}"


@dataclass
class RunResult:
    outcome: RunOutcome
    steps: int
    trace: List[StepRecord] = field(default_factory=list)
    final: Optional[Configuration] = None
    preservation_checks: int = 0

    @property
    def reached_external(self) -> bool:
        return isinstance(self.outcome, ExternalPoised)

    def rule_counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for r in self.trace:
            out[r.rule] = out.get(r.rule, 0) + 1
        return out


class PreservationViolation(AssertionError):
    pass


def run(c: Configuration, fuel: int = DEFAULT_FUEL, check_preservation: bool = False,
        keep_trace: bool = True) -> RunResult:
    trace: List[StepRecord] = []
    checks = 0
    n = 0
    while True:
        if not c.procs:
            return RunResult(EmptyConfig(), n, trace, c, checks)
        s = step(c)
        if isinstance(s, Stepped) and n >= fuel:
            return RunResult(FuelExhausted(n), n, trace, c, checks)
        if isinstance(s, NoRedex):
            pz = poised(c)
            if pz is not None:
                return RunResult(pz, n, trace, c, checks)
            return RunResult(StuckError(f"no transition applies to {c.describe()}"), n, trace, c, checks)
        n += 1
        if check_preservation:
            problems = assert_preservation(c, s.config)
            checks += 1
            if problems:
                raise PreservationViolation(f"step {n} ({s.rule}): " + "; ".join(problems))
        if keep_trace:
            trace.append(StepRecord(n, s.rule, s.junction, s.payload))
        c = s.config


def assert_preservation(before: Configuration, after: Configuration) -> List[str]:
    """Re-type every process of ``after``; empty list means preservation holds."""
    out: List[str] = []
    for ext in ("ext_left_type", "ext_right_type"):
        a, b = getattr(before, ext), getattr(after, ext)
        if (a is None) != (b is None) or (a is not None and not types_equal(a, b)):
            if not after.procs and (before.ext_left is None and before.ext_right is None):
                continue
            out.append(f"external type changed: {ext} {a} -> {b}")
    out.extend(check_configuration(after))
    return out


def check_configuration(c: Configuration) -> List[str]:
    out: List[str] = []
    sig = c.program.signature
    defs = c.program.interfaces()
    for k, q in enumerate(c.procs):
        if k == 0 and q.left != c.ext_left:
            out.append(f"process 0 left channel {q.left} is not the external left {c.ext_left}")
        if k > 0 and c.procs[k - 1].right != q.left:
            out.append(f"processes {k - 1} and {k} do not share a channel")
        if k == len(c.procs) - 1 and q.right != c.ext_right:
            out.append(f"last process right channel {q.right} is not the external right {c.ext_right}")
        extra = free_channels(q.proc) - {q.left, q.right}
        if extra:
            out.append(f"process {k} mentions foreign channels {sorted(extra)}")
        left = None if q.left is None else (q.left, c.types[q.left])
        right = (q.right, c.types[q.right])
        diags: List[Diagnostic] = check_process(sig, defs, left, right, q.proc, name=f"process {k}")
        out.extend(str(d.message) for d in diags)
    return out
