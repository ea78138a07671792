import pytest

from sslang import parse_file, parse_program
from sslang.guard_oracle import (
    LEFT_MU,
    NEITHER,
    RIGHT_NU,
    check_guard,
    classify_cycle,
    find_cycles,
    omega_monotone,
    unfold,
)
from sslang.validity import check_validity

from conftest import corpus, corpus_files, expected


def test_depth_zero_is_single_node():
    t = unfold(corpus("copy"), "Copy", 0)
    assert t.rule == "Def" and t.children == [] and t.size() == 1


def test_copy_depth_two_reaches_second_call():
    t = unfold(corpus("copy"), "Copy", 2)
    defs = [n for n in t if n.is_def]
    assert [n.right[0].gen for n in defs] == [0, 1, 2]
    assert [n.left[0].gen for n in defs] == [0, 1, 2]


def test_copy_cycles_include_composites():
    p = corpus("copy")
    cycles = find_cycles(unfold(p, "Copy", 2))
    assert len(cycles) == 3
    pairs = sorted((c.start.left[0].gen, c.end.left[0].gen) for c in cycles)
    assert pairs == [(0, 1), (0, 2), (1, 2)]
    assert {classify_cycle(p, c) for c in cycles} == {LEFT_MU}


def test_straight_line_has_no_cycles():
    p = corpus("num2_copy_block")
    assert find_cycles(unfold(p, "Two", 4)) == []


def test_bogus_copy_cycle_neither():
    p = corpus("bogus_copy")
    cycles = [c for c in find_cycles(unfold(p, "SuccCopy", 2)) if c.name == "SuccCopy"]
    assert len(cycles) == 1
    c = cycles[0]
    assert c.start.left[0].base == "x" and c.end.left[0].base != "x"
    assert classify_cycle(p, c) == NEITHER


def test_ping_cycle_neither():
    p = corpus("pingpong")
    cycles = [c for c in find_cycles(unfold(p, "PingPong", 2)) if c.name == "Ping"]
    kinds = {(c.end.right[0].gen, classify_cycle(p, c)) for c in cycles}
    # the head branch sends mu_ack on the right and is not a trace
    assert (2, NEITHER) in kinds
    assert (1, RIGHT_NU) in kinds


def test_pong_cycle_left_mu():
    p = corpus("pingpong")
    cycles = [c for c in find_cycles(unfold(p, "PingPong", 2)) if c.name == "Pong"]
    assert cycles and all(classify_cycle(p, c) == LEFT_MU for c in cycles)


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_guard_matches_sidecar(path):
    p = parse_file(path)
    exp = expected(path.stem)["guard"]
    assert {str(d): check_guard(p, d).verdict for d in (1, 2, 3, 4)} == exp


def test_check_guard_examples():
    assert check_guard(corpus("copy"), 3).all_guarded
    rep = check_guard(corpus("bogus_copy"), 3)
    assert not rep.all_guarded and rep.counterexample is not None
    assert not check_guard(corpus("pingpong"), 3).all_guarded


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_valid_implies_guarded(path):
    p = parse_file(path)
    if check_validity(p).valid:
        for d in (1, 2, 3, 4):
            assert check_guard(p, d).all_guarded


def test_empty_counter_unguarded_too():
    assert not check_validity(corpus("empty_counter")).valid
    rep = check_guard(corpus("empty_counter"), 3)
    assert not rep.all_guarded
    assert {c.name for c, _ in rep.counterexamples} == {"Empty"}


def test_no_guarded_but_invalid_in_corpus():
    found = []
    for path in corpus_files():
        p = parse_file(path)
        if not check_validity(p).valid and all(check_guard(p, d).all_guarded for d in (1, 2, 3, 4)):
            found.append(path.stem)
    assert found == []


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_omega_monotone_along_paths(path):
    p = parse_file(path)
    for d in p.defs:
        assert omega_monotone(unfold(p, d.name, 3)) == []


def test_fresh_cut_binders_per_expansion():
    p = corpus("bogus_copy")
    t = unfold(p, "SuccCopy", 3)
    cuts = [n for n in t if n.rule == "Cut"]
    assert len(cuts) == 2
    binders = {n.children[0].right[0].base for n in cuts}
    assert len(binders) == 2


def test_report_json_shape():
    rep = check_guard(corpus("bogus_copy"), 2).to_json()
    assert rep["verdict"] == "counterexample"
    assert rep["counterexamples"][0]["classification"] == NEITHER


def test_node_budget():
    from sslang.guard_oracle import UnfoldBudgetExceeded
    p = corpus("bitcount_client")
    with pytest.raises(UnfoldBudgetExceeded):
        unfold(p, "System", 4, max_nodes=10)
    assert unfold(p, "System", 1, max_nodes=10_000).size() <= 10_000
