from dataclasses import replace

import pytest

from sslang import parse_file
from sslang import runtime
from sslang.core import CaseLeft, CloseRight, Forward, SendLabelRight, TVar, WaitLeft
from sslang.runtime import (
    CompositionError,
    Configuration,
    EmptyConfig,
    ExternalPoised,
    FuelExhausted,
    NoRedex,
    RunProc,
    Stepped,
    StuckError,
    assert_preservation,
    compose,
    load,
    run,
    spawn,
    step,
)
from sslang.typecheck import types_equal

from sslang import parse_program
from conftest import COPY, NAT, corpus, corpus_files, harness_program, loop_block, num_copy_block

# 6 steps per successor, 9 for the zero round and the two closes
NUM_STEPS = [9, 15, 21, 27, 33, 39, 45, 51, 57, 63, 69, 75, 81, 87, 93, 99, 105]


def test_load_copy_interface():
    c = load(corpus("copy"))
    assert len(c) == 1
    assert c.ext_left_type == TVar("nat") and c.ext_right_type == TVar("nat")


def test_load_loop_has_no_left():
    c = load(corpus("loop"))
    assert c.ext_left is None and c.procs[0].left is None


def test_compose_loop_block():
    c = loop_block()
    assert len(c) == 2 and c.ext_left is None
    assert c.procs[0].right == c.procs[1].left


def test_compose_mismatch():
    p = parse_program(
        NAT + "type ctr =[2] nu &{ inc : ctr, val : 1 }\n"
        + COPY + "proc C : ctr |- 1 = L.nu_ctr; L.val; waitL; closeR\n"
        "order[1] Copy, C\nmain Copy\n"
    )
    with pytest.raises(CompositionError, match="junction type mismatch"):
        compose(spawn(p, "Copy"), spawn(p, "C"))


def test_compose_different_programs():
    with pytest.raises(CompositionError):
        compose(spawn(corpus("copy"), "Copy"), spawn(corpus("block"), "Block"))


def test_label_handshake():
    c = num_copy_block(1)
    # after unfolding Num and Copy and passing mu, the label goes across
    seen = []
    while True:
        s = step(c)
        if s.rule == "label-right":
            c = s.config
            seen.append(s.payload)
            break
        c = s.config
    assert seen == ["s"]
    assert types_equal(c.types[s.junction], TVar("nat"))


def test_close_handshake_removes_process():
    c = num_copy_block(0)
    res = run(c)
    closes = [r for r in res.trace if r.rule == "close-right"]
    assert len(closes) == 2
    assert len(res.final) == 1
    assert isinstance(res.final.procs[0].proc, CloseRight)


def test_forward_merges_channels():
    p = corpus("bogus_copy")
    c = compose(spawn(p, "Succ"), spawn(p, "BogusCopy"))
    res = run(c, fuel=50)
    assert "forward" in res.rule_counts()


def test_forward_alone_empties_configuration():
    p = corpus("bogus_copy")
    c = spawn(p, "Succ")
    q = c.procs[0]
    c = replace(c, procs=(RunProc(Forward(q.right, q.left), q.left, q.right),))
    s = step(c)
    assert isinstance(s, Stepped) and s.rule == "forward"
    assert isinstance(run(c).outcome, EmptyConfig)


def test_empty_configuration():
    c = replace(load(corpus("copy")), procs=())
    res = run(c)
    assert isinstance(res.outcome, EmptyConfig) and res.steps == 0
    assert isinstance(step(c), NoRedex)


def test_loop_block_exhausts_fuel():
    c = loop_block()
    res = run(c, fuel=10_000)
    assert res.outcome == FuelExhausted(10_000)
    ends = {e for e in (c.ext_left, c.ext_right) if e is not None}
    assert ends
    assert not any(r.junction in ends for r in res.trace)


def test_num2_copy_block_terminates():
    res = run(num_copy_block(2), fuel=10_000)
    assert res.outcome == ExternalPoised("right", "close")
    assert res.steps < 100


def test_corpus_main_matches_num2_harness():
    res = run(load(corpus("num2_copy_block")))
    assert res.outcome == ExternalPoised("right", "close") and res.steps == 24


@pytest.mark.parametrize("k", range(17))
def test_num_steps_frozen(k):
    res = run(num_copy_block(k), check_preservation=True)
    assert res.outcome == ExternalPoised("right", "close")
    assert res.steps == NUM_STEPS[k] == 6 * k + 9


def test_preservation_negative_control():
    c = num_copy_block(1)
    while True:
        s = step(c)
        nxt = s.config
        if s.rule == "label-right":
            break
        c = nxt
    # swap the label the receiver will continue with
    k = next(i for i, q in enumerate(c.procs) if isinstance(q.proc, SendLabelRight))
    q = c.procs[k]
    bad = replace(q, proc=replace(q.proc, label="z"))
    corrupted = replace(c, procs=c.procs[:k] + (bad,) + c.procs[k + 1:])
    after = step(corrupted).config
    assert assert_preservation(corrupted, after)


def test_determinism():
    a = run(num_copy_block(3)).trace
    b = run(num_copy_block(3)).trace
    assert a == b


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_corpus_runs(path):
    from conftest import expected
    p = parse_file(path)
    res = run(load(p), check_preservation=True)
    assert not isinstance(res.outcome, StuckError)
    exp = expected(path.stem)["run"]
    assert res.steps == exp["steps"]
    if isinstance(res.outcome, ExternalPoised):
        assert (exp["kind"], exp["side"], exp["action"]) == ("external-poised", res.outcome.side, res.outcome.action)
    else:
        assert exp["kind"] == "fuel-exhausted"


def test_synchrony_needs_both_sides():
    p = harness_program(0)
    c = spawn(p, "Num")
    s = step(c)  # unfold only
    assert s.rule == "unfold"
    assert isinstance(step(s.config), NoRedex)


def test_stuck_configuration_detected():
    p = corpus("copy")
    c = compose(spawn(p, "Copy"), spawn(p, "Copy"))
    a, b = c.procs
    # two receivers facing each other can never meet
    c = replace(c, procs=(a, replace(b, proc=WaitLeft(b.left, b.proc))), ext_left=None)
    c = replace(c, procs=(replace(a, left=None, proc=CaseLeft(a.right, ())),) + c.procs[1:])
    assert isinstance(run(c).outcome, StuckError)
