import json
from pathlib import Path

import pytest

from sslang import parse_file, parse_program
from sslang import runtime

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

NAT = "type nat =[1] mu +{ z : 1, s : nat }\n"

COPY = """
proc Copy : nat |- nat =
  caseL ( mu_nat =>
    caseL ( z => R.mu_nat; R.z; waitL; closeR
          | s => R.mu_nat; R.s; call Copy ) )
"""

BLOCK = """
proc Block : nat |- 1 =
  caseL ( mu_nat =>
    caseL ( z => waitL; closeR
          | s => call Block ) )
"""


def corpus_files():
    return sorted(CORPUS.glob("*.ssl"))


def corpus(name):
    return parse_file(CORPUS / f"{name}.ssl")


def expected(name):
    return json.loads((CORPUS / f"{name}.expected.json").read_text())


def numeral(k):
    """Body emitting the unary numeral k and closing."""
    return "R.mu_nat; R.s; " * k + "R.mu_nat; R.z; closeR"


def harness_program(k):
    src = NAT + f"proc Num : . |- nat = {numeral(k)}\n" + COPY + BLOCK
    src += "order[1] Num, Copy, Block\nmain Num\n"
    return parse_program(src)


def num_copy_block(k):
    """[Num_k] composed with [Copy] and [Block]."""
    p = harness_program(k)
    return runtime.compose_all(runtime.spawn(p, "Num"), runtime.spawn(p, "Copy"), runtime.spawn(p, "Block"))


def loop_block():
    p = corpus("loop_block")
    return runtime.compose(runtime.spawn(p, "Loop"), runtime.spawn(p, "Block"))


def copy_chain(n):
    """N renamed copies of Copy, all in one equivalence class."""
    parts = [NAT]
    for i in range(n):
        parts.append(COPY.replace("Copy", f"Copy{i}"))
    parts.append("order[1] " + " ~ ".join(f"Copy{i}" for i in range(n)) + "\n")
    parts.append("main Copy0\n")
    return parse_program("".join(parts))


@pytest.fixture(params=[p.stem for p in corpus_files()])
def corpus_name(request):
    return request.param


ACCEPTANCE = []


def record(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
