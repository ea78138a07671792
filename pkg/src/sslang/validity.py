"""Local validity: a per-definition traversal that tracks channel generations.

Every unfolding message sent or received on a channel bumps its generation.
The store ``Omega`` records how the priority-indexed components of the
generations relate (equal, or strictly smaller).  At each call the lists of
current channels are compared, together with the declared order on process
names, against the snapshot taken at the start of the definition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .core import (
    Call,
    CaseLeft,
    CaseMuLeft,
    CaseNuRight,
    CaseRight,
    CloseRight,
    Cut,
    Forward,
    One,
    Plus,
    Polarity,
    ProcDef,
    ProcOrder,
    Process,
    Program,
    SendLabelLeft,
    SendLabelRight,
    SendMuRight,
    SendNuLeft,
    SessionType,
    Signature,
    Span,
    TVar,
    WaitLeft,
    With,
)


@dataclass(frozen=True, order=True)
class GenChannel:
    base: str
    gen: int

    def __str__(self) -> str:
        return f"{self.base}^{self.gen}"

    def next(self) -> "GenChannel":
        return GenChannel(self.base, self.gen + 1)


@dataclass(frozen=True, order=True)
class OrderVar:
    channel: GenChannel
    priority: int

    def __str__(self) -> str:
        return f"{self.channel}_{self.priority}"


class _Absent:
    """Slot of a missing left channel."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "Absent"

    __str__ = lambda self: "_"  # noqa: E731


ABSENT = _Absent()
Slot = Union[OrderVar, _Absent]


class OmegaError(RuntimeError):
    """An insertion broke an internal invariant (a traversal bug, not a user error)."""


# Visibility


def visible_type_vars(sig: Signature, a: SessionType, seen: FrozenSet[str] = frozenset()) -> Set[str]:
    if isinstance(a, One):
        return set()
    if isinstance(a, (Plus, With)):
        out: Set[str] = set()
        for _, b in a.branches:
            out |= visible_type_vars(sig, b, seen)
        return out
    t = a.name
    if t in seen:
        return {t}
    return {t} | visible_type_vars(sig, sig.lookup(t).body, seen | {t})


def visible_priorities(sig: Signature, a: SessionType) -> Set[int]:
    return {sig.lookup(t).priority for t in visible_type_vars(sig, a)}


# The constraint store


class Omega:
    """Equalities as union-find over order variables, plus strict edges.

    ``lt(a, b)`` records a < b.  Queries use the reflexive-transitive
    closure; a strict query needs at least one strict edge on the path.
    """

    def __init__(self) -> None:
        self.parent: Dict[OrderVar, OrderVar] = {}
        self.less: Dict[OrderVar, Set[OrderVar]] = {}  # rep -> reps strictly above
        self.channels: Set[GenChannel] = set()
        self.relations: List[Tuple[str, OrderVar, OrderVar]] = []

    def copy(self) -> "Omega":
        o = Omega.__new__(Omega)
        o.parent = dict(self.parent)
        o.less = {k: set(v) for k, v in self.less.items()}
        o.channels = set(self.channels)
        o.relations = list(self.relations)
        return o

    def _touch(self, a: OrderVar) -> None:
        if a not in self.parent:
            self.parent[a] = a
            self.channels.add(a.channel)

    def find(self, a: OrderVar) -> OrderVar:
        if a not in self.parent:
            return a
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def knows(self, c: GenChannel) -> bool:
        return c in self.channels

    def add(self, rel: str, a: OrderVar, b: OrderVar) -> None:
        self._touch(a)
        self._touch(b)
        self.relations.append((rel, a, b))
        ra, rb = self.find(a), self.find(b)
        if rel == "eq":
            if ra == rb:
                return
            if self._reach(ra, rb, strict=True) or self._reach(rb, ra, strict=True):
                raise OmegaError(f"equating {a} and {b} contradicts a strict relation")
            self.parent[ra] = rb
            merged = self.less.pop(ra, set()) | self.less.get(rb, set())
            if merged:
                self.less[rb] = merged
        elif rel == "lt":
            if ra == rb or self._reach(rb, ra, strict=False):
                raise OmegaError(f"{a} < {b} would create a cycle")
            self.less.setdefault(ra, set()).add(rb)
        else:
            raise ValueError(f"unknown relation {rel!r}")

    def _reach(self, src: OrderVar, dst: OrderVar, strict: bool) -> bool:
        """Is there a path src -> dst (of length >= 1 when strict)?"""
        if not strict and src == dst:
            return True
        stack = [src]
        seen = {src}
        while stack:
            r = stack.pop()
            for s in self.less.get(r, ()):
                s = self.find(s)
                if s == dst:
                    return True
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return False

    def entails(self, rel: str, a: OrderVar, b: OrderVar) -> bool:
        ra, rb = self.find(a), self.find(b)
        if rel == "eq":
            return ra == rb
        if rel == "lt":
            return self._reach(ra, rb, strict=True)
        if rel == "le":
            return ra == rb or self._reach(ra, rb, strict=True)
        raise ValueError(f"unknown relation {rel!r}")

    def variables(self) -> List[OrderVar]:
        return sorted(self.parent)

    def __str__(self) -> str:
        parts = [f"{a} {'=' if r == 'eq' else '<'} {b}" for r, a, b in self.relations]
        return "{" + ", ".join(parts) + "}"


def omega_add(om: Omega, rel: str, a: OrderVar, b: OrderVar) -> Omega:
    """Functional insertion: returns an extended copy."""
    out = om.copy()
    out.add(rel, a, b)
    return out


def entails(om: Omega, rel: str, a: OrderVar, b: OrderVar) -> bool:
    return om.entails(rel, a, b)


# Channel lists


@dataclass(frozen=True)
class ChannelList:
    """One group per priority in increasing order; a prefix may end in a 1-slot group."""

    groups: Tuple[Tuple[Slot, ...], ...]
    priorities: Tuple[int, ...]

    def slots(self) -> List[Slot]:
        return [s for g in self.groups for s in g]

    def __str__(self) -> str:
        return "[" + ", ".join("(" + ", ".join(str(s) for s in g) + ")" for g in self.groups) + "]"


def _slot(ch: Optional[GenChannel], i: int) -> Slot:
    return ABSENT if ch is None else OrderVar(ch, i)


def build_list(sig: Signature, left: Optional[GenChannel], right: GenChannel) -> ChannelList:
    groups = []
    prios = tuple(sig.priorities())
    for i in prios:
        x, y = _slot(left, i), _slot(right, i)
        groups.append((x, y) if sig.polarity_at(i) == Polarity.MU else (y, x))
    return ChannelList(tuple(groups), prios)


def list_prefix(l: ChannelList, j: int) -> ChannelList:
    """Full groups below priority ``j``, then the receiving slot at ``j``."""
    if j == 0:
        return ChannelList((), ())
    groups = []
    prios = []
    for g, i in zip(l.groups, l.priorities):
        if i < j:
            groups.append(g)
            prios.append(i)
        elif i == j:
            groups.append((g[0],))
            prios.append(i)
    return ChannelList(tuple(groups), tuple(prios))


def slot_relation(om: Omega, a: Slot, b: Slot) -> str:
    if a is ABSENT or b is ABSENT:
        return "eq" if a is b else "incomparable"
    if om.entails("eq", a, b):
        return "eq"
    if om.entails("lt", a, b):
        return "lt"
    return "incomparable"


def lex_compare(om: Omega, a: Union[ChannelList, Sequence[Slot]], b: Union[ChannelList, Sequence[Slot]]) -> str:
    """``lt``, ``le`` (all positions equal) or ``incomparable``."""
    sa = a.slots() if isinstance(a, ChannelList) else list(a)
    sb = b.slots() if isinstance(b, ChannelList) else list(b)
    if len(sa) != len(sb):
        raise ValueError(f"list layouts differ: {len(sa)} vs {len(sb)} slots")
    for x, y in zip(sa, sb):
        r = slot_relation(om, x, y)
        if r == "lt":
            return "lt"
        if r != "eq":
            return "incomparable"
    return "le"


def combined_order(order: ProcOrder, om: Omega, callee: Tuple[str, ChannelList],
                   root: Tuple[str, ChannelList]) -> Tuple[bool, str]:
    """Decide the combined order; also names the clause that decided it."""
    f, lf = callee
    g, lg = root
    for n in (f, g):
        if n not in order:
            raise KeyError(f"process {n} is missing from the declared order")
    if order.below(f, g):
        i = order.index(f)
        return lex_compare(om, list_prefix(lf, i), list_prefix(lg, i)) in ("lt", "le"), "subset"
    if order.equiv(f, g):
        return lex_compare(om, lf, lg) == "lt", "equivalent"
    k = min(order.index(f), order.index(g))
    return lex_compare(om, list_prefix(lf, k), list_prefix(lg, k)) == "lt", "otherwise"


def combined_less(order: ProcOrder, om: Omega, callee: Tuple[str, ChannelList],
                  root: Tuple[str, ChannelList]) -> bool:
    return combined_order(order, om, callee, root)[0]


# Traversal


@dataclass(frozen=True)
class CallSnapshot:
    root: str
    left: Optional[GenChannel]
    right: GenChannel


@dataclass(frozen=True)
class FailingCall:
    callee: str
    span: Span
    clause: str
    callee_list: str
    root_list: str

    def to_json(self) -> dict:
        return {
            "callee": self.callee,
            "span": list(self.span) if self.span else None,
            "clause": self.clause,
            "callee_list": self.callee_list,
            "root_list": self.root_list,
        }


@dataclass
class DefVerdict:
    name: str
    failing_calls: List[FailingCall] = field(default_factory=list)
    calls_checked: int = 0
    trace: List[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.failing_calls

    @property
    def verdict(self) -> str:
        return "valid" if self.valid else "invalid"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "failing_calls": [c.to_json() for c in self.failing_calls],
        }


@dataclass
class ValidityReport:
    defs: List[DefVerdict]

    @property
    def valid(self) -> bool:
        return all(d.valid for d in self.defs)

    def verdicts(self) -> Dict[str, str]:
        return {d.name: d.verdict for d in self.defs}

    def failing(self) -> Dict[str, List[str]]:
        return {d.name: [c.callee for c in d.failing_calls] for d in self.defs if d.failing_calls}

    def __getitem__(self, name: str) -> DefVerdict:
        for d in self.defs:
            if d.name == name:
                return d
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "verdict": "valid" if self.valid else "invalid",
            "definitions": [d.to_json() for d in self.defs],
        }


Numeric = Dict[GenChannel, Tuple[Optional[int], ...]]


class _Validator:
    def __init__(self, p: Program, order: Optional[ProcOrder] = None, trace: bool = False,
                 checks: bool = True):
        self.p = p
        self.sig = p.signature
        self.prios = self.sig.priorities()
        self.order = order if order is not None else ProcOrder(p.order)
        self.trace = trace
        # with checks on, every insertion asserts freshness and strictness
        self.checks = checks
        self._vis: Dict[SessionType, FrozenSet[int]] = {}

    def vis(self, a: SessionType) -> FrozenSet[int]:
        r = self._vis.get(a)
        if r is None:
            r = self._vis[a] = frozenset(visible_priorities(self.sig, a))
        return r

    def check_def(self, d: ProcDef, left_gen: int = 0, right_gen: int = 0,
                  omega: Optional[Omega] = None) -> DefVerdict:
        left = None if d.left is None else GenChannel(d.left[0], left_gen)
        right = GenChannel(d.right[0], right_gen)
        om = omega.copy() if omega is not None else Omega()
        for c in (left, right):
            if c is not None:
                for k in range(1, 4):
                    if om.knows(GenChannel(c.base, c.gen + k)):
                        raise OmegaError(f"start store already mentions a future generation of {c.base}")
        self.verdict = DefVerdict(d.name)
        self.root = CallSnapshot(d.name, left, right)
        self.root_list = build_list(self.sig, left, right)
        num: Numeric = {}
        if self.trace:
            zero = tuple(0 for _ in self.prios)
            for c in (left, right):
                if c is not None:
                    num[c] = zero
        self.walk(d.body, left, right, om, num)
        return self.verdict

    # helpers

    def mint(self, c: GenChannel, om: Omega) -> GenChannel:
        n = c.next()
        if self.checks and om.knows(n):
            raise OmegaError(f"generation {n} is not fresh")
        return n

    def relate(self, om: Omega, new: GenChannel, old: GenChannel, skip: int, strict: bool) -> None:
        for i in self.prios:
            if i == skip:
                if strict:
                    om.add("lt", OrderVar(new, i), OrderVar(old, i))
            else:
                om.add("eq", OrderVar(new, i), OrderVar(old, i))
        if self.checks:
            for i in self.prios:
                v = OrderVar(new, i)
                if om.entails("lt", v, v):
                    raise OmegaError(f"strict order became reflexive at {v}")

    def bump(self, num: Numeric, old: GenChannel, new: GenChannel, prio: int, delta: int) -> None:
        if not self.trace:
            return
        vals = list(num.get(old, tuple(None for _ in self.prios)))
        k = self.prios.index(prio)
        if vals[k] is not None:
            vals[k] += delta
        num[new] = tuple(vals)

    def numeric(self, num: Numeric, left: Optional[GenChannel], right: GenChannel) -> str:
        out = []
        for k, i in enumerate(self.prios):
            def v(c):
                if c is None:
                    return "_"
                x = num.get(c, (None,) * len(self.prios))[k]
                return "∞" if x is None else str(x)

            pair = (v(left), v(right)) if self.sig.polarity_at(i) == Polarity.MU else (v(right), v(left))
            out.extend(pair)
        return "[" + ",".join(out) + "]"

    def log(self, num: Numeric, left, right, what: str) -> None:
        if self.trace:
            self.verdict.trace.append(f"{self.numeric(num, left, right)}  {what}")

    # the traversal

    def walk(self, p: Process, left: Optional[GenChannel], right: GenChannel, om: Omega, num: Numeric) -> None:
        while True:
            if isinstance(p, (Forward, CloseRight)):
                self.log(num, left, right, "fwd" if isinstance(p, Forward) else "closeR")
                return
            if isinstance(p, (SendLabelRight, SendLabelLeft)):
                p = p.cont
                continue
            if isinstance(p, WaitLeft):
                left = None
                p = p.cont
                continue
            if isinstance(p, SendMuRight):
                new = self.mint(right, om)
                prio = self.sig.lookup(p.tvar).priority
                self.relate(om, new, right, prio, strict=False)
                self.bump(num, right, new, prio, +1)
                right = new
                self.log(num, left, right, f"R.mu_{p.tvar}")
                p = p.cont
                continue
            if isinstance(p, CaseNuRight):
                new = self.mint(right, om)
                prio = self.sig.lookup(p.tvar).priority
                self.relate(om, new, right, prio, strict=True)
                self.bump(num, right, new, prio, -1)
                right = new
                self.log(num, left, right, f"caseR nu_{p.tvar}")
                p = p.cont
                continue
            if isinstance(p, CaseMuLeft):
                new = self.mint(left, om)
                prio = self.sig.lookup(p.tvar).priority
                self.relate(om, new, left, prio, strict=True)
                self.bump(num, left, new, prio, -1)
                left = new
                self.log(num, left, right, f"caseL mu_{p.tvar}")
                p = p.cont
                continue
            if isinstance(p, SendNuLeft):
                new = self.mint(left, om)
                prio = self.sig.lookup(p.tvar).priority
                self.relate(om, new, left, prio, strict=False)
                self.bump(num, left, new, prio, +1)
                left = new
                self.log(num, left, right, f"L.nu_{p.tvar}")
                p = p.cont
                continue
            if isinstance(p, (CaseLeft, CaseRight)):
                for k, (_, q) in enumerate(p.branches):
                    last = k == len(p.branches) - 1
                    self.walk(q, left, right, om if last else om.copy(), num if last else dict(num))
                return
            if isinstance(p, Cut):
                self.cut(p, left, right, om, num)
                return
            if isinstance(p, Call):
                self.call(p, left, right, om, num)
                return
            raise TypeError(f"not a process: {p!r}")

    def cut(self, p: Cut, left, right, om: Omega, num: Numeric) -> None:
        x0 = GenChannel(p.channel, 0)
        if self.checks and om.knows(x0):
            raise OmegaError(f"cut channel {p.channel} is not fresh")
        hidden = [i for i in self.prios if i not in self.vis(p.type)]
        om_p, num_p = om.copy(), dict(num)
        for i in hidden:
            om_p.add("eq", OrderVar(x0, i), OrderVar(right, i))
        om_q, num_q = om, num
        if left is not None:
            for i in hidden:
                om_q.add("eq", OrderVar(x0, i), OrderVar(left, i))
        if self.trace:
            def fresh(other):
                base = num.get(other) if other is not None else None
                return tuple(
                    (base[k] if base is not None else None) if i in hidden else None
                    for k, i in enumerate(self.prios)
                )

            num_p[x0] = fresh(right)
            num_q[x0] = fresh(left)
        self.log(num_p, left, x0, f"spawn {p.channel}")
        self.walk(p.left, left, x0, om_p, num_p)
        self.walk(p.right, x0, right, om_q, num_q)

    def call(self, p: Call, left, right, om: Omega, num: Numeric) -> None:
        self.verdict.calls_checked += 1
        callee = build_list(self.sig, left, right)
        ok, clause = combined_order(self.order, om, (p.name, callee), (self.root.root, self.root_list))
        self.log(num, left, right, f"call {p.name}: {'ok' if ok else 'REJECTED'} ({clause})")
        if not ok:
            self.verdict.failing_calls.append(
                FailingCall(p.name, p.span, clause, str(callee), str(self.root_list))
            )


def check_definition(p: Program, name: str, left_gen: int = 0, right_gen: int = 0,
                     omega: Optional[Omega] = None, trace: bool = False) -> DefVerdict:
    v = _Validator(p, trace=trace)
    return v.check_def(p.get(name), left_gen, right_gen, omega)


def check_validity(p: Program, trace: bool = False, checks: bool = True,
                   shift: Tuple[int, int] = (0, 0)) -> ValidityReport:
    v = _Validator(p, trace=trace, checks=checks)
    return ValidityReport([v.check_def(d, shift[0], shift[1]) for d in p.defs])
