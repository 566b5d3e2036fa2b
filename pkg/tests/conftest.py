import numpy as np
import pytest

from pcmlogic.compiler import OPERATORS, Assignment, Netlist
from pcmlogic.gates import GateSetup

FULL_ADDER = """\
# 1-bit full adder
inputs a b cin
t = XOR(a, b)
s = XOR(t, cin)
g = AND(a, b)
p = AND(t, cin)
cout = OR(g, p)
out s cout
"""

TWO_BIT_ADDER = """\
# 2-bit ripple adder, no carry in
inputs a0 a1 b0 b1
s0 = XOR(a0, b0)
c0 = AND(a0, b0)
t1 = XOR(a1, b1)
s1 = XOR(t1, c0)
u = AND(a1, b1)
v = AND(t1, c0)
c1 = OR(u, v)
out s0 s1 c1
"""


def random_netlist(rng: np.random.Generator, max_inputs: int = 8, max_gates: int = 25) -> Netlist:
    n_in = int(rng.integers(1, max_inputs + 1))
    n_gates = int(rng.integers(1, max_gates + 1))
    inputs = [f"i{k}" for k in range(n_in)]
    signals = list(inputs)
    ops = sorted(OPERATORS)
    body = []
    for g in range(n_gates):
        op = ops[int(rng.integers(len(ops)))]
        args = tuple(signals[int(rng.integers(len(signals)))] for _ in range(OPERATORS[op]))
        name = f"g{g}"
        body.append(Assignment(name, op, args))
        signals.append(name)
    n_out = int(rng.integers(1, min(4, len(signals)) + 1))
    outputs = sorted({signals[-1], *(signals[int(rng.integers(n_in, len(signals)))] for _ in range(n_out - 1))})
    return Netlist(inputs, body, outputs)


@pytest.fixture
def setup():
    return GateSetup()


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> str:
    line = f"[criterion {number}] {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
