import itertools
from dataclasses import replace

import pytest

from sslang import parse_program
from sslang.core import Polarity, ProcOrder, Signature, TVar, One
from sslang.validity import (
    ABSENT,
    GenChannel,
    Omega,
    OmegaError,
    OrderVar,
    build_list,
    check_definition,
    check_validity,
    combined_less,
    combined_order,
    entails,
    lex_compare,
    list_prefix,
    omega_add,
    visible_priorities,
)

from conftest import corpus, corpus_files, expected
from sslang import parse_file


def ch(base, gen):
    return GenChannel(base, gen)


def v(base, gen, i):
    return OrderVar(GenChannel(base, gen), i)


def test_visibility():
    sig = corpus("empty_counter").signature
    assert visible_priorities(sig, TVar("bin")) == {2}
    assert visible_priorities(sig, TVar("ctr")) == {1, 2}
    assert visible_priorities(sig, One()) == set()


def test_omega_strict_edge():
    om = omega_add(Omega(), "lt", v("x", 1, 1), v("x", 0, 1))
    assert entails(om, "lt", v("x", 1, 1), v("x", 0, 1))
    assert not entails(om, "lt", v("x", 0, 1), v("x", 1, 1))


def test_omega_equalities_chain():
    a, b, c = v("a", 0, 1), v("b", 0, 1), v("c", 0, 1)
    om = omega_add(omega_add(Omega(), "eq", a, b), "eq", b, c)
    assert entails(om, "le", a, c) and entails(om, "eq", c, a)


def test_omega_lt_through_equality():
    om = omega_add(Omega(), "lt", v("x", 1, 1), v("x", 0, 1))
    om = omega_add(om, "eq", v("z", 0, 1), v("x", 0, 1))
    assert entails(om, "lt", v("x", 1, 1), v("z", 0, 1))


def test_omega_reflexive_le_and_fresh_incomparable():
    a = v("a", 0, 1)
    assert entails(Omega(), "le", a, a)
    om = omega_add(Omega(), "lt", v("x", 1, 1), v("x", 0, 1))
    u = v("u", 0, 1)
    for rel in ("le", "lt", "eq"):
        assert not entails(om, rel, u, v("x", 0, 1))


def test_example_store_two_steps():
    om = Omega()
    om.add("eq", v("x", 1, 1), v("x", 0, 1))
    om.add("lt", v("x", 2, 1), v("x", 1, 1))
    assert entails(om, "lt", v("x", 2, 1), v("x", 0, 1))


def test_omega_rejects_cycles():
    om = omega_add(Omega(), "lt", v("a", 0, 1), v("b", 0, 1))
    with pytest.raises(OmegaError):
        om.add("lt", v("b", 0, 1), v("a", 0, 1))
    with pytest.raises(OmegaError):
        om.add("eq", v("b", 0, 1), v("a", 0, 1))


def test_omega_add_is_functional():
    om = Omega()
    om2 = omega_add(om, "lt", v("a", 0, 1), v("b", 0, 1))
    assert om.relations == [] and len(om2.relations) == 1


SIG4 = corpus("pingpong").signature


def show(l):
    return str(l)


def test_sigma4_list_and_prefixes():
    l = build_list(SIG4, ch("x", 0), ch("y", 0))
    assert show(l) == "[(x^0_1, y^0_1), (y^0_2, x^0_2), (x^0_3, y^0_3)]"
    assert show(list_prefix(l, 3)) == "[(x^0_1, y^0_1), (y^0_2, x^0_2), (x^0_3)]"
    assert show(list_prefix(l, 2)) == "[(x^0_1, y^0_1), (y^0_2)]"
    assert show(list_prefix(l, 1)) == "[(x^0_1)]"
    assert show(list_prefix(l, 0)) == "[]"


def test_sigma1_list():
    assert show(build_list(corpus("copy").signature, ch("x", 0), ch("y", 0))) == "[(x^0_1, y^0_1)]"


def test_absent_left_layout():
    l = build_list(corpus("empty_counter").signature, None, ch("y", 0))
    assert l.groups == ((v("y", 0, 1), ABSENT), (ABSENT, v("y", 0, 2)))


def test_lex_copy_call():
    sig = corpus("copy").signature
    om = omega_add(Omega(), "lt", v("x", 1, 1), v("x", 0, 1))
    a = build_list(sig, ch("x", 1), ch("y", 1))
    b = build_list(sig, ch("x", 0), ch("y", 0))
    assert lex_compare(om, a, b) == "lt"
    assert lex_compare(om, b, b) == "le"


def test_lex_ping_incomparable():
    om = Omega()
    # y advanced twice on the right: only the non-sent priorities are tied
    om.add("lt", v("y", 1, 2), v("y", 0, 2))
    om.add("eq", v("y", 1, 1), v("y", 0, 1))
    om.add("eq", v("y", 1, 3), v("y", 0, 3))
    om.add("eq", v("y", 2, 2), v("y", 1, 2))
    om.add("eq", v("y", 2, 3), v("y", 1, 3))
    a = build_list(SIG4, ch("x", 0), ch("y", 2))
    b = build_list(SIG4, ch("x", 0), ch("y", 0))
    assert lex_compare(om, a, b) == "incomparable"


def test_lex_absent_handling():
    om = Omega()
    assert lex_compare(om, [ABSENT], [ABSENT]) == "le"
    assert lex_compare(om, [ABSENT], [v("x", 0, 1)]) == "incomparable"
    with pytest.raises(ValueError):
        lex_compare(om, [ABSENT], [])


def producer_order():
    return ProcOrder(corpus("producer").order)


def test_combined_subset_clause():
    om = Omega()
    for i in (1, 3):
        om.add("eq", v("x", 1, i), v("x", 0, i))
    callee = ("Idle", build_list(SIG4, ch("x", 1), ch("y", 0)))
    root = ("Producer", build_list(SIG4, ch("x", 0), ch("y", 0)))
    assert combined_order(producer_order(), om, callee, root) == (True, "subset")


def test_combined_otherwise_clause():
    om = Omega()
    om.add("lt", v("x", 2, 1), v("x", 1, 1))
    for i in (2, 3):
        om.add("eq", v("x", 2, i), v("x", 1, i))
    for i in (1, 2):
        om.add("eq", v("y", 1, i), v("y", 0, i))
    callee = ("Producer", build_list(SIG4, ch("x", 2), ch("y", 1)))
    root = ("Idle", build_list(SIG4, ch("x", 1), ch("y", 0)))
    assert combined_order(producer_order(), om, callee, root) == (True, "otherwise")


def test_combined_irreflexive():
    l = build_list(SIG4, ch("x", 0), ch("y", 0))
    assert not combined_less(producer_order(), Omega(), ("Idle", l), ("Idle", l))


def test_combined_missing_name():
    l = build_list(SIG4, ch("x", 0), ch("y", 0))
    with pytest.raises(KeyError):
        combined_less(producer_order(), Omega(), ("Nope", l), ("Idle", l))


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_corpus_verdicts_match_sidecars(path):
    rep = check_validity(parse_file(path))
    exp = expected(path.stem)
    assert ("valid" if rep.valid else "invalid") == exp["verdict"]
    assert rep.verdicts() == exp["definitions"]
    assert rep.failing() == exp["failing_calls"]


def test_empty_counter_fails_only_at_self_call():
    rep = check_validity(corpus("empty_counter"))
    assert rep.failing() == {"Empty": ["Empty"]}
    assert len(rep["Empty"].failing_calls) == 1


def priority_assignments(sig):
    """Every map of the signature's variables to 1..n respecting equal-priority polarity."""
    names = [e.name for e in sig.entries]
    n = len(names)
    for prios in itertools.product(range(1, n + 1), repeat=n):
        pol = {}
        ok = True
        for e, k in zip(sig.entries, prios):
            if pol.setdefault(k, e.polarity) != e.polarity:
                ok = False
        if ok:
            yield Signature(tuple(replace(e, priority=k) for e, k in zip(sig.entries, prios)))


def reorder(p, sig):
    """Renumber order families so indices stay within 0..n under a new signature."""
    fams = tuple(replace(f, index=min(f.index, sig.max_priority())) for f in p.order)
    return replace(p, signature=sig, order=fams)


def test_pingpong_invalid_under_every_assignment():
    p = corpus("pingpong")
    count = 0
    for sig in priority_assignments(p.signature):
        rep = check_validity(reorder(p, sig))
        assert not rep.valid, [(e.name, e.priority) for e in sig.entries]
        assert set(rep.failing()) <= {"Ping", "Pong"}
        count += 1
    assert count >= 6


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
@pytest.mark.parametrize("shift", [(1, 0), (0, 3), (5, 7)])
def test_generation_shift(path, shift):
    p = parse_file(path)
    assert check_validity(p, shift=shift).verdicts() == check_validity(p).verdicts()


def test_check_definition_with_seeded_store():
    p = corpus("copy")
    om = Omega()
    om.add("lt", v("q", 1, 1), v("q", 0, 1))
    assert check_definition(p, "Copy", 4, 9, om).valid
    om.add("lt", v("x", 6, 1), v("x", 0, 1))
    with pytest.raises(OmegaError):
        check_definition(p, "Copy", 4, 9, om)


def test_numeric_trace_for_copy():
    d = check_definition(corpus("copy"), "Copy", trace=True)
    assert d.trace[0].startswith("[-1,0]")
    assert d.trace[-1].startswith("[-1,1]")
