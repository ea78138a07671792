"""Bounded guard-condition oracle.

Unrolls the infinitary derivation of a definition to a fixed number of
definition expansions per branch, collects every pair of ancestor and
descendant judgments for the same process variable, and classifies each
pair by comparing channel lists at its two ends.

This path shares the constraint store with ``validity`` but nothing else:
it never consults the declared process order, and it compares only the
lists of one channel at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

from .core import (
    Call,
    CaseLeft,
    CaseMuLeft,
    CaseNuRight,
    CaseRight,
    CloseRight,
    Cut,
    Forward,
    Process,
    Program,
    SendLabelLeft,
    SendLabelRight,
    SendMuRight,
    SendNuLeft,
    SessionType,
    WaitLeft,
)
from .validity import GenChannel, Omega, OrderVar, visible_priorities

DEFAULT_DEPTH = 3

LEFT_MU = "left-mu-trace"
RIGHT_NU = "right-nu-trace"
BOTH = "both"
NEITHER = "neither"

End = Tuple[GenChannel, SessionType]


class UnfoldBudgetExceeded(RuntimeError):
    """The derivation tree grew past the requested node budget."""


@dataclass
class DerivNode:
    left: Optional[End]
    right: End
    process: Process
    omega: Omega
    rule: str
    children: List["DerivNode"] = field(default_factory=list)
    depth: int = 0  # expansions above and including this node
    expanded: bool = False

    @property
    def is_def(self) -> bool:
        return self.rule == "Def"

    def __iter__(self) -> Iterator["DerivNode"]:
        stack = [self]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(n.children))

    def size(self) -> int:
        return sum(1 for _ in self)

    def judgment(self) -> str:
        l = "." if self.left is None else f"{self.left[0]}"
        return f"{l} |- {self.right[0]}"


@dataclass
class Cycle:
    start: DerivNode
    end: DerivNode
    path: List[DerivNode]

    @property
    def name(self) -> str:
        return self.start.process.name

    def __str__(self) -> str:
        return f"{self.name}: ({self.start.judgment()}) ~> ({self.end.judgment()})"


class _Unfolder:
    def __init__(self, p: Program, depth: int, max_nodes: Optional[int] = None):
        self.p = p
        self.sig = p.signature
        self.prios = self.sig.priorities()
        self.depth = depth
        self.counter = 0
        self.max_nodes = max_nodes
        self.nodes = 0

    def fresh(self, base: str) -> GenChannel:
        self.counter += 1
        return GenChannel(f"{base}{self.counter}", 0)

    def step(self, om: Omega, old: GenChannel, tvar: str, strict: bool) -> Tuple[Omega, GenChannel]:
        new = old.next()
        k = self.sig.lookup(tvar).priority
        om = om.copy()
        for i in self.prios:
            if i != k:
                om.add("eq", OrderVar(new, i), OrderVar(old, i))
            elif strict:
                om.add("lt", OrderVar(new, i), OrderVar(old, i))
        return om, new

    def body_of(self, tvar: str) -> SessionType:
        return self.sig.lookup(tvar).body

    def node(self, left, right, p: Process, om: Omega, depth: int) -> DerivNode:
        self.nodes += 1
        if self.max_nodes is not None and self.nodes > self.max_nodes:
            raise UnfoldBudgetExceeded(f"more than {self.max_nodes} derivation nodes")
        if isinstance(p, Call):
            n = DerivNode(left, right, p, om, "Def", depth=depth + 1)
            if n.depth <= self.depth:
                n.expanded = True
                d = self.p.get(p.name)
                n.children.append(self.node(left, right, d.body, om, n.depth))
            return n
        if isinstance(p, Forward):
            return DerivNode(left, right, p, om, "Id", depth=depth)
        if isinstance(p, CloseRight):
            return DerivNode(left, right, p, om, "1R", depth=depth)
        if isinstance(p, WaitLeft):
            n = DerivNode(left, right, p, om, "1L", depth=depth)
            n.children.append(self.node(None, right, p.cont, om, depth))
            return n
        if isinstance(p, SendLabelRight):
            n = DerivNode(left, right, p, om, "+R", depth=depth)
            n.children.append(self.node(left, (right[0], right[1].get(p.label)), p.cont, om, depth))
            return n
        if isinstance(p, SendLabelLeft):
            n = DerivNode(left, right, p, om, "&L", depth=depth)
            n.children.append(self.node((left[0], left[1].get(p.label)), right, p.cont, om, depth))
            return n
        if isinstance(p, CaseLeft):
            n = DerivNode(left, right, p, om, "+L", depth=depth)
            for l, q in p.branches:
                n.children.append(self.node((left[0], left[1].get(l)), right, q, om, depth))
            return n
        if isinstance(p, CaseRight):
            n = DerivNode(left, right, p, om, "&R", depth=depth)
            for l, q in p.branches:
                n.children.append(self.node(left, (right[0], right[1].get(l)), q, om, depth))
            return n
        if isinstance(p, SendMuRight):
            om2, c = self.step(om, right[0], p.tvar, strict=False)
            n = DerivNode(left, right, p, om, "muR", depth=depth)
            n.children.append(self.node(left, (c, self.body_of(p.tvar)), p.cont, om2, depth))
            return n
        if isinstance(p, CaseNuRight):
            om2, c = self.step(om, right[0], p.tvar, strict=True)
            n = DerivNode(left, right, p, om, "nuR", depth=depth)
            n.children.append(self.node(left, (c, self.body_of(p.tvar)), p.cont, om2, depth))
            return n
        if isinstance(p, CaseMuLeft):
            om2, c = self.step(om, left[0], p.tvar, strict=True)
            n = DerivNode(left, right, p, om, "muL", depth=depth)
            n.children.append(self.node((c, self.body_of(p.tvar)), right, p.cont, om2, depth))
            return n
        if isinstance(p, SendNuLeft):
            om2, c = self.step(om, left[0], p.tvar, strict=False)
            n = DerivNode(left, right, p, om, "nuL", depth=depth)
            n.children.append(self.node((c, self.body_of(p.tvar)), right, p.cont, om2, depth))
            return n
        if isinstance(p, Cut):
            # binders are renamed on every expansion so generations stay distinct
            x = self.fresh(p.channel)
            hidden = [i for i in self.prios if i not in visible_priorities(self.sig, p.type)]
            om_p = om.copy()
            om_q = om.copy()
            for i in hidden:
                om_p.add("eq", OrderVar(x, i), OrderVar(right[0], i))
                if left is not None:
                    om_q.add("eq", OrderVar(x, i), OrderVar(left[0], i))
            n = DerivNode(left, right, p, om, "Cut", depth=depth)
            n.children.append(self.node(left, (x, p.type), p.left, om_p, depth))
            n.children.append(self.node((x, p.type), right, p.right, om_q, depth))
            return n
        raise TypeError(f"not a process: {p!r}")


def unfold(p: Program, name: str, depth: int = DEFAULT_DEPTH, max_nodes: Optional[int] = None) -> DerivNode:
    """Derivation tree rooted at a ``Def`` judgment for ``name``.

    The tree can grow exponentially in ``depth``; ``max_nodes`` turns that
    into an :class:`UnfoldBudgetExceeded` error instead of a long wait.
    """
    d = p.get(name)
    left = None if d.left is None else (GenChannel(d.left[0], 0), d.left[1])
    right = (GenChannel(d.right[0], 0), d.right[1])
    u = _Unfolder(p, depth, max_nodes)
    root_call = Call(name, None if d.left is None else d.left[0], d.right[0])
    return u.node(left, right, root_call, Omega(), 0)


def find_cycles(t: DerivNode) -> List[Cycle]:
    """Every ancestor/descendant pair of ``Def`` nodes naming the same process."""
    out: List[Cycle] = []

    def go(n: DerivNode, path: List[DerivNode]) -> None:
        path.append(n)
        if n.is_def:
            for k, a in enumerate(path[:-1]):
                if a.is_def and a.process.name == n.process.name:
                    out.append(Cycle(a, n, list(path[k:])))
        for c in n.children:
            go(c, path)
        path.pop()

    go(t, [])
    return out


def _lex_lt(om: Omega, prios: List[int], new: GenChannel, old: GenChannel) -> bool:
    for i in prios:
        a, b = OrderVar(new, i), OrderVar(old, i)
        if om.entails("lt", a, b):
            return True
        if not om.entails("eq", a, b):
            return False
    return False


def classify_cycle(p: Program, c: Cycle) -> str:
    prios = p.signature.priorities()
    om = c.end.omega
    s, e = c.start, c.end
    left = (
        s.left is not None and e.left is not None
        and s.left[0].base == e.left[0].base
        and _lex_lt(om, prios, e.left[0], s.left[0])
    )
    right = s.right[0].base == e.right[0].base and _lex_lt(om, prios, e.right[0], s.right[0])
    if left and right:
        return BOTH
    if left:
        return LEFT_MU
    if right:
        return RIGHT_NU
    return NEITHER


def guarded(kind: str) -> bool:
    return kind != NEITHER


@dataclass
class GuardReport:
    depth: int
    cycles: int = 0
    counterexamples: List[Tuple[Cycle, str]] = field(default_factory=list)
    by_root: dict = field(default_factory=dict)

    @property
    def all_guarded(self) -> bool:
        return not self.counterexamples

    @property
    def counterexample(self) -> Optional[Cycle]:
        return self.counterexamples[0][0] if self.counterexamples else None

    @property
    def verdict(self) -> str:
        return "all-guarded" if self.all_guarded else "counterexample"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "depth": self.depth,
            "cycles": self.cycles,
            "definitions": [
                {"name": k, "cycles": v["cycles"], "unguarded": v["unguarded"]}
                for k, v in self.by_root.items()
            ],
            "counterexamples": [
                {
                    "process": c.name,
                    "start": c.start.judgment(),
                    "end": c.end.judgment(),
                    "length": len(c.path),
                    "classification": kind,
                }
                for c, kind in self.counterexamples
            ],
        }


def check_guard(p: Program, depth: int = DEFAULT_DEPTH, roots: Optional[List[str]] = None,
                max_nodes: Optional[int] = None) -> GuardReport:
    """All cycles reachable within ``depth`` expansions from each root must be traces."""
    rep = GuardReport(depth)
    for name in roots if roots is not None else [d.name for d in p.defs]:
        cycles = find_cycles(unfold(p, name, depth, max_nodes))
        bad = []
        for c in cycles:
            kind = classify_cycle(p, c)
            if not guarded(kind):
                bad.append((c, kind))
        rep.cycles += len(cycles)
        rep.counterexamples.extend(bad)
        rep.by_root[name] = {"cycles": len(cycles), "unguarded": len(bad)}
    return rep


def omega_monotone(t: DerivNode) -> List[str]:
    """Relations entailed at a node that a child no longer entails."""
    out: List[str] = []
    for n in t:
        for c in n.children:
            for rel, a, b in n.omega.relations:
                if not c.omega.entails(rel, a, b):
                    out.append(f"{rel}({a}, {b}) lost below {n.rule}")
    return out


__all__ = [
    "BOTH", "Cycle", "DEFAULT_DEPTH", "DerivNode", "GuardReport", "LEFT_MU", "NEITHER", "RIGHT_NU",
    "UnfoldBudgetExceeded", "check_guard", "classify_cycle", "find_cycles", "omega_monotone", "unfold",
]
