"""Abstract syntax for signatures, session types, processes and programs.

Everything here is an immutable value.  Source spans ride along on process
nodes for diagnostics but never take part in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple, Union


class Polarity(str, Enum):
    MU = "mu"
    NU = "nu"

    def __str__(self) -> str:
        return self.value


Span = Optional[Tuple[int, int]]


class UnknownTypeError(KeyError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    span: Span = None
    path: str = "<input>"
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        where = f"{self.path}:{self.line}:{self.col}" if self.line else self.path
        return f"{where}: {self.severity}: {self.message}"


# Session types


@dataclass(frozen=True)
class Plus:
    """Internal choice; the provider picks a label and sends it rightwards."""

    branches: Tuple[Tuple[str, "SessionType"], ...]

    def labels(self) -> List[str]:
        return [l for l, _ in self.branches]

    def get(self, label: str) -> Optional["SessionType"]:
        for l, a in self.branches:
            if l == label:
                return a
        return None


@dataclass(frozen=True)
class With:
    """External choice; the client picks a label and sends it leftwards."""

    branches: Tuple[Tuple[str, "SessionType"], ...]

    def labels(self) -> List[str]:
        return [l for l, _ in self.branches]

    def get(self, label: str) -> Optional["SessionType"]:
        for l, a in self.branches:
            if l == label:
                return a
        return None


@dataclass(frozen=True)
class One:
    pass


@dataclass(frozen=True)
class TVar:
    name: str


SessionType = Union[Plus, With, One, TVar]


def plus2(a: SessionType, b: SessionType) -> Plus:
    return Plus((("π1", a), ("π2", b)))


def with2(a: SessionType, b: SessionType) -> With:
    return With((("π1", a), ("π2", b)))


ZERO = Plus(())
TOP = With(())


def show_type(a: SessionType) -> str:
    if isinstance(a, One):
        return "1"
    if isinstance(a, TVar):
        return a.name
    op = "+" if isinstance(a, Plus) else "&"
    inner = ", ".join(f"{l} : {show_type(b)}" for l, b in a.branches)
    return f"{op}{{{inner}}}"


def type_vars(a: SessionType) -> Iterator[str]:
    if isinstance(a, TVar):
        yield a.name
    elif isinstance(a, (Plus, With)):
        for _, b in a.branches:
            yield from type_vars(b)


# Signatures


@dataclass(frozen=True)
class TypeDef:
    name: str
    priority: int
    polarity: Polarity
    body: SessionType


@dataclass(frozen=True)
class Signature:
    entries: Tuple[TypeDef, ...] = ()

    def lookup(self, name: str) -> TypeDef:
        for e in self.entries:
            if e.name == name:
                return e
        raise UnknownTypeError(name)

    def __contains__(self, name: str) -> bool:
        return any(e.name == name for e in self.entries)

    def priorities(self) -> List[int]:
        """Distinct priorities present, highest priority (smallest number) first."""
        return sorted({e.priority for e in self.entries})

    def max_priority(self) -> int:
        return max((e.priority for e in self.entries), default=0)

    def polarity_at(self, i: int) -> Polarity:
        for e in self.entries:
            if e.priority == i:
                return e.polarity
        raise KeyError(f"no type variable has priority {i}")


def polarity_of(sig: Signature, t: str) -> Polarity:
    return sig.lookup(t).polarity


def priority_of(sig: Signature, t: str) -> int:
    return sig.lookup(t).priority


def unfold(sig: Signature, t: str) -> SessionType:
    return sig.lookup(t).body


# Processes.  Channel fields name the channel acted upon; continuations are
# the remaining process.  ``span`` is excluded from comparisons.


@dataclass(frozen=True)
class Forward:
    dst: str
    src: str
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Cut:
    channel: str
    type: SessionType
    left: "Process"
    right: "Process"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SendLabelRight:
    channel: str
    label: str
    cont: "Process"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CaseLeft:
    channel: str
    branches: Tuple[Tuple[str, "Process"], ...]
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SendLabelLeft:
    channel: str
    label: str
    cont: "Process"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CaseRight:
    channel: str
    branches: Tuple[Tuple[str, "Process"], ...]
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CloseRight:
    channel: str
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class WaitLeft:
    channel: str
    cont: "Process"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SendMuRight:
    channel: str
    tvar: str
    cont: "Process"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CaseMuLeft:
    channel: str
    tvar: str
    cont: "Process"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SendNuLeft:
    channel: str
    tvar: str
    cont: "Process"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CaseNuRight:
    channel: str
    tvar: str
    cont: "Process"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    left: Optional[str]
    right: str
    span: Span = field(default=None, compare=False, repr=False)


Process = Union[
    Forward,
    Cut,
    SendLabelRight,
    CaseLeft,
    SendLabelLeft,
    CaseRight,
    CloseRight,
    WaitLeft,
    SendMuRight,
    CaseMuLeft,
    SendNuLeft,
    CaseNuRight,
    Call,
]

# forms whose single continuation keeps the same pair of ports
PREFIX_FORMS = (SendLabelRight, SendLabelLeft, WaitLeft, SendMuRight, CaseMuLeft, SendNuLeft, CaseNuRight)


def children(p: Process) -> List[Process]:
    if isinstance(p, Cut):
        return [p.left, p.right]
    if isinstance(p, (CaseLeft, CaseRight)):
        return [q for _, q in p.branches]
    if isinstance(p, PREFIX_FORMS):
        return [p.cont]
    return []


def walk(p: Process) -> Iterator[Process]:
    stack = [p]
    while stack:
        q = stack.pop()
        yield q
        stack.extend(reversed(children(q)))


def rename(p: Process, sub: Dict[str, str]) -> Process:
    """Substitute channel names; a cut that rebinds a name shadows it."""
    if not sub:
        return p
    r = lambda c: sub.get(c, c)  # noqa: E731
    if isinstance(p, Forward):
        return Forward(r(p.dst), r(p.src), p.span)
    if isinstance(p, Cut):
        inner = {k: v for k, v in sub.items() if k != p.channel}
        return Cut(p.channel, p.type, rename(p.left, inner), rename(p.right, inner), p.span)
    if isinstance(p, (CaseLeft, CaseRight)):
        return type(p)(r(p.channel), tuple((l, rename(q, sub)) for l, q in p.branches), p.span)
    if isinstance(p, (SendLabelRight, SendLabelLeft)):
        return type(p)(r(p.channel), p.label, rename(p.cont, sub), p.span)
    if isinstance(p, (SendMuRight, CaseMuLeft, SendNuLeft, CaseNuRight)):
        return type(p)(r(p.channel), p.tvar, rename(p.cont, sub), p.span)
    if isinstance(p, WaitLeft):
        return WaitLeft(r(p.channel), rename(p.cont, sub), p.span)
    if isinstance(p, CloseRight):
        return CloseRight(r(p.channel), p.span)
    if isinstance(p, Call):
        return Call(p.name, None if p.left is None else r(p.left), r(p.right), p.span)
    raise TypeError(f"not a process: {p!r}")


def free_channels(p: Process) -> set:
    if isinstance(p, Forward):
        return {p.dst, p.src}
    if isinstance(p, Cut):
        return (free_channels(p.left) | free_channels(p.right)) - {p.channel}
    if isinstance(p, Call):
        return {p.right} | ({p.left} if p.left is not None else set())
    out = {p.channel}
    for q in children(p):
        out |= free_channels(q)
    return out


def process_size(p: Process) -> int:
    return sum(1 for _ in walk(p))


# Definitions and programs


@dataclass(frozen=True)
class ProcDef:
    name: str
    left: Optional[Tuple[str, SessionType]]
    right: Tuple[str, SessionType]
    body: Process
    span: Span = field(default=None, compare=False, repr=False)

    @property
    def left_type(self) -> Optional[SessionType]:
        return None if self.left is None else self.left[1]

    @property
    def right_type(self) -> SessionType:
        return self.right[1]


@dataclass(frozen=True)
class OrderFamily:
    """One partial order over process names, placed at a priority slot.

    ``pairs`` holds ``(lhs, op, rhs)`` with op ``"<"`` (strictly below) or
    ``"~"`` (equivalent); ``members`` is the whole domain.
    """

    index: int
    members: frozenset
    pairs: Tuple[Tuple[str, str, str], ...] = ()


@dataclass(frozen=True)
class Program:
    signature: Signature
    defs: Tuple[ProcDef, ...]
    main: str
    order: Tuple[OrderFamily, ...] = ()

    def get(self, name: str) -> ProcDef:
        for d in self.defs:
            if d.name == name:
                return d
        raise KeyError(name)

    def def_map(self) -> Dict[str, ProcDef]:
        return {d.name: d for d in self.defs}

    def interfaces(self) -> Dict[str, Tuple[Optional[SessionType], SessionType]]:
        return {d.name: (d.left_type, d.right_type) for d in self.defs}


# Well-formedness


def _check_type(sig: Signature, a: SessionType, where: str, out: List[Diagnostic], span: Span = None) -> None:
    if isinstance(a, (Plus, With)):
        labels = [l for l, _ in a.branches]
        dups = sorted({l for l in labels if labels.count(l) > 1})
        for l in dups:
            out.append(Diagnostic("error", f"{where}: duplicate label {l}", span))
    for t in sorted(set(type_vars(a))):
        if t not in sig:
            out.append(Diagnostic("error", f"{where}: unknown type variable {t}", span))
    if isinstance(a, (Plus, With)):
        for _, b in a.branches:
            if isinstance(b, (Plus, With)):
                _check_type(sig, b, where, out, span)


def _check_body(sig: Signature, d: ProcDef, out: List[Diagnostic]) -> None:
    def go(p: Process, scope: frozenset) -> None:
        if isinstance(p, Cut):
            if p.channel in scope:
                out.append(Diagnostic("error", f"{d.name}: cut rebinds channel {p.channel} already in scope", p.span))
            _check_type(sig, p.type, f"{d.name}: cut annotation", out, p.span)
            go(p.left, scope | {p.channel})
            go(p.right, scope | {p.channel})
            return
        for c in sorted(mentioned_here(p)):
            if c not in scope:
                out.append(Diagnostic("error", f"{d.name}: unbound channel {c}", p.span))
        for q in children(p):
            go(q, scope)

    scope = {d.right[0]} | ({d.left[0]} if d.left is not None else set())
    go(d.body, frozenset(scope))


def mentioned_here(p: Process) -> set:
    """Channels named by the head of ``p`` itself, ignoring continuations."""
    if isinstance(p, Forward):
        return {p.dst, p.src}
    if isinstance(p, Call):
        return {p.right} | ({p.left} if p.left is not None else set())
    if isinstance(p, Cut):
        return set()
    return {p.channel}


def validate_program(p: Program) -> List[Diagnostic]:
    """Check the structural invariants of a program; returns one diagnostic per violation."""
    out: List[Diagnostic] = []
    sig = p.signature
    seen: Dict[str, TypeDef] = {}
    by_prio: Dict[int, TypeDef] = {}
    for e in sig.entries:
        if e.name in seen:
            out.append(Diagnostic("error", f"type {e.name} defined more than once"))
        seen[e.name] = e
        if e.priority <= 0:
            out.append(Diagnostic("error", f"type {e.name}: priority must be positive"))
        other = by_prio.setdefault(e.priority, e)
        if other.polarity != e.polarity:
            out.append(Diagnostic(
                "error",
                f"equal priority, differing polarity: {other.name} and {e.name} at priority {e.priority}",
            ))
        _check_type(sig, e.body, f"type {e.name}", out)

    names = [d.name for d in p.defs]
    for n in sorted({n for n in names if names.count(n) > 1}):
        out.append(Diagnostic("error", f"process {n} defined more than once"))
    for d in p.defs:
        if d.left is not None:
            _check_type(sig, d.left[1], f"{d.name}: left interface", out, d.span)
        _check_type(sig, d.right[1], f"{d.name}: right interface", out, d.span)
        if d.left is not None and d.left[0] == d.right[0]:
            out.append(Diagnostic("error", f"{d.name}: left and right channels coincide", d.span))
        _check_body(sig, d, out)
    if p.main not in names:
        out.append(Diagnostic("error", f"main process {p.main} is not defined"))
    out.extend(_check_order(p))
    return out


def _check_order(p: Program) -> List[Diagnostic]:
    out: List[Diagnostic] = []
    defined = {d.name for d in p.defs}
    n = p.signature.max_priority()
    owner: Dict[str, int] = {}
    indices = [f.index for f in p.order]
    for i in sorted({i for i in indices if indices.count(i) > 1}):
        out.append(Diagnostic("error", f"order family {i} declared more than once"))
    for fam in p.order:
        if not 0 <= fam.index <= n:
            out.append(Diagnostic("error", f"order family index {fam.index} outside 0..{n}"))
        for x in sorted(fam.members):
            if x not in defined:
                out.append(Diagnostic("error", f"order family {fam.index} names undefined process {x}"))
            if x in owner and owner[x] != fam.index:
                out.append(Diagnostic(
                    "error", f"domains not disjoint: {x} appears in families {owner[x]} and {fam.index}"))
            owner.setdefault(x, fam.index)
        for a, op, b in fam.pairs:
            if op not in ("<", "~") or a not in fam.members or b not in fam.members:
                out.append(Diagnostic("error", f"order family {fam.index}: malformed pair {a} {op} {b}"))
    for x in sorted(defined - set(owner)):
        out.append(Diagnostic("error", f"process {x} is not covered by any order family"))
    for fam in p.order:
        try:
            ProcOrder([fam])
        except ValueError as exc:
            out.append(Diagnostic("error", str(exc)))
    return out


class ProcOrder:
    """The union of the declared families, queried as ⊂ / ≅ / family index.

    Equivalences are merged with union-find; strict edges run between class
    representatives and ``below`` is answered by memoised reachability.
    """

    def __init__(self, families) -> None:
        self.family: Dict[str, int] = {}
        self.parent: Dict[str, str] = {}
        for fam in families:
            for x in fam.members:
                self.family[x] = fam.index
                self.parent.setdefault(x, x)
        for fam in families:
            for a, op, b in fam.pairs:
                if op == "~":
                    ra, rb = self._find(a), self._find(b)
                    if ra != rb:
                        self.parent[ra] = rb
        self.succ: Dict[str, set] = {}
        for fam in families:
            for a, op, b in fam.pairs:
                if op == "<":
                    ra, rb = self._find(a), self._find(b)
                    if ra == rb:
                        raise ValueError(f"order family {fam.index}: {a} < {b} contradicts their equivalence")
                    self.succ.setdefault(ra, set()).add(rb)
        self._above: Dict[str, frozenset] = {}
        for r in list(self.succ):
            if r in self._reach(r, set()):
                raise ValueError(f"order family {self.family[r]}: cycle through {r} breaks antisymmetry")

    def _find(self, x: str) -> str:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def _reach(self, r: str, active: set) -> frozenset:
        if r in self._above:
            return self._above[r]
        if r in active:
            return frozenset({r})
        active.add(r)
        acc: set = set()
        for s in self.succ.get(r, ()):
            acc.add(s)
            acc |= self._reach(s, active)
        active.discard(r)
        res = frozenset(acc)
        if r not in res:
            self._above[r] = res
        return res

    def __contains__(self, x: str) -> bool:
        return x in self.family

    def index(self, x: str) -> int:
        return self.family[x]

    def equiv(self, a: str, b: str) -> bool:
        return self.family[a] == self.family[b] and self._find(a) == self._find(b)

    def below(self, a: str, b: str) -> bool:
        """a ⊂ b: strictly below within a common family."""
        if self.family[a] != self.family[b]:
            return False
        ra, rb = self._find(a), self._find(b)
        return ra != rb and rb in self._reach(ra, set())
