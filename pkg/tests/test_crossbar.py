import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcmlogic.crossbar import (
    Crossbar,
    Gate,
    Init,
    Step,
    format_program,
    parse_program,
)
from pcmlogic.device import DEFAULT_VARIABILITY
from pcmlogic.errors import IndeterminateState, InvalidStep, ProgramSyntaxError
from pcmlogic.gates import GateKind, execute_gate_functional

XOR_ROWS = """\
INIT 0,2 1,2 2,2 3,2
---
GATE NIMP row=0 in1=0 in2=1 out=2
GATE NIMP row=1 in1=0 in2=1 out=2
GATE NIMP row=2 in1=0 in2=1 out=2
GATE NIMP row=3 in1=0 in2=1 out=2
---
GATE NIMP row=0 in1=1 in2=0 out=2
GATE NIMP row=1 in1=1 in2=0 out=2
GATE NIMP row=2 in1=1 in2=0 out=2
GATE NIMP row=3 in1=1 in2=0 out=2
"""


def loaded(rows, cols, bits):
    x = Crossbar.create(rows, cols)
    for (r, c), b in bits.items():
        x.write((r, c), b)
    return x


def test_create_and_rw():
    x = Crossbar.create(2, 3)
    assert x.logic_map().tolist() == [[0, 0, 0], [0, 0, 0]]
    assert x.write((1, 2), 1) == 1
    assert x.read((1, 2)) == 1
    with pytest.raises(IndexError):
        x.read((2, 0))
    with pytest.raises(ValueError):
        Crossbar.create(0, 3)


def test_variability_seeded_per_cell():
    a = Crossbar.create(2, 2, variability=DEFAULT_VARIABILITY, seed=4)
    b = Crossbar.create(2, 2, variability=DEFAULT_VARIABILITY, seed=4)
    assert np.array_equal(a.resistance_map(), b.resistance_map())
    assert a.cells[0][0].params != a.cells[0][1].params


@pytest.mark.parametrize("mode", ["functional", "circuit"])
def test_xor_rows(mode):
    x = loaded(4, 3, {(1, 1): 1, (2, 0): 1, (3, 0): 1, (3, 1): 1})
    rep = x.run_program(parse_program(XOR_ROWS), mode)
    assert rep.logic_map[:, 2].tolist() == [0, 1, 1, 0]
    assert rep.computation_steps == 2 and rep.init_ops == 4
    # circuit mode also sets the disturbed IN1 of row 2 (dead after XOR)
    assert rep.total_set_events == (2 if mode == "functional" else 3)


def test_nimp_accumulation_disturbs_in1_in_circuit_mode():
    # OUT already set, IN1 = 0, IN2 = 1: IN1 sees about 1.02 V and is set
    x = loaded(1, 3, {(0, 1): 1, (0, 2): 1})
    x.execute_step(Step((Gate(GateKind.NIMP, 0, 0, 1, 2),)), "circuit")
    assert x.logic_map().tolist() == [[1, 1, 1]]


def test_nor_accumulation_is_safe_in_circuit_mode():
    x = loaded(1, 3, {(0, 2): 1})
    x.execute_step(Step((Gate(GateKind.NOR, 0, 0, 1, 2),)), "circuit")
    assert x.logic_map().tolist() == [[0, 0, 1]]


def test_step_validation():
    with pytest.raises(InvalidStep):
        Step((Gate(GateKind.NOR, 0, 0, 1, 2), Gate(GateKind.OR, 1, 0, 1, 2))).validate()
    with pytest.raises(InvalidStep):
        Step((Gate(GateKind.NOR, 0, 0, 1, 2), Gate(GateKind.NOR, 1, 0, 1, 3))).validate()
    with pytest.raises(InvalidStep):
        Step((Gate(GateKind.NOR, 0, 0, 1, 2), Gate(GateKind.NOR, 0, 0, 1, 2))).validate()
    with pytest.raises(InvalidStep):
        Step((Gate(GateKind.NOR, 0, 0, 1, 2), Init(((0, 1),)))).validate()
    with pytest.raises(InvalidStep):
        Gate(GateKind.NOR, 0, 1, 1, 2)
    with pytest.raises(InvalidStep):
        Gate(GateKind.IMPLY, 0, 0, 1, 2)
    with pytest.raises(InvalidStep):
        Init(((0, 0), (0, 0)))
    Step((Gate(GateKind.NOR, 0, 0, 1, 2), Init(((1, 1),)))).validate()


def test_failed_step_leaves_array_unchanged():
    x = loaded(2, 3, {(0, 0): 1})
    before = x.logic_map().copy()
    with pytest.raises(IndexError):
        x.execute_step(Step((Init(((0, 1),)), Gate(GateKind.NOR, 5, 0, 1, 2))))
    assert np.array_equal(x.logic_map(), before)


def test_indeterminate_operand_aborts():
    import dataclasses
    from pcmlogic import device
    x = Crossbar.create(1, 3)
    bad = dataclasses.replace(device.DeviceParams(), r_lrs=50e3)
    x.cells[0][0] = device.crystalline(bad)
    with pytest.raises(IndeterminateState):
        x.execute_step(Step((Gate(GateKind.OR, 0, 0, 1, 2),)))


def test_empty_step_noop():
    x = loaded(1, 2, {(0, 1): 1})
    rep = x.execute_step(Step(()))
    assert rep.gate_ops == 0 and x.logic_map().tolist() == [[0, 1]]


def test_program_text_roundtrip():
    prog = parse_program(XOR_ROWS + "---\nGATE imply row=0 in1=1 in2=- out=2  # destructive\n")
    assert parse_program(format_program(prog)) == prog
    assert prog[-1].ops[0].in2 is None


@pytest.mark.parametrize("text,line", [("INIT 0;1\n", 1), ("\nGATE XOR row=0 in1=0 in2=1 out=2\n", 2),
                                       ("FOO\n", 1), ("GATE NOR row=0 in1=0 in2=0 out=2\n", 1), ("INIT\n", 1)])
def test_program_syntax_errors(text, line):
    with pytest.raises(ProgramSyntaxError) as exc:
        parse_program(text)
    assert exc.value.line == line


def test_dumps(tmp_path):
    x = loaded(2, 2, {(0, 1): 1})
    x.write_logic_csv(tmp_path / "l.csv")
    x.write_resistance_json(tmp_path / "r.json")
    assert (tmp_path / "l.csv").read_text() == "0,1\n0,0\n"
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["resistance_ohm"][0] == [1e6, 5e3]


ops_strategy = st.lists(
    st.tuples(st.sampled_from(list(GateKind)), st.permutations(range(4)), st.booleans()),
    min_size=1, max_size=6,
)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=8, max_size=8), ops_strategy)
def test_modes_agree_with_fresh_outputs(bits, ops):
    """Programs that Init every output before writing it: circuit equals functional."""
    program = []
    for kind, cols, unary in ops:
        a, b, out = cols[:3]
        in2 = None if kind is GateKind.IMPLY or (unary and kind in (GateKind.NOR, GateKind.OR)) else b
        program.append(Step((Init(((0, out), (1, out))),)))
        program.append(Step(tuple(Gate(kind, r, a, in2, out) for r in (0, 1))))
    maps = []
    for mode in ("functional", "circuit"):
        x = loaded(2, 4, {(r, c): bits[4 * r + c] for r in range(2) for c in range(4)})
        maps.append(x.run_program(program, mode).logic_map)
    assert np.array_equal(*maps)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=12, max_size=12), st.permutations(range(4)), st.sampled_from(list(GateKind)))
def test_row_isolation(bits, cols, kind):
    x = loaded(3, 4, {(r, c): bits[4 * r + c] for r in range(3) for c in range(4)})
    a, b, out = cols[:3]
    in2 = None if kind is GateKind.IMPLY else b
    x.write((1, out), 0)
    before = x.logic_map().copy()
    x.execute_step(Step((Gate(kind, 1, a, in2, out),)), "circuit")
    after = x.logic_map()
    mask = np.ones_like(before, dtype=bool)
    mask[1, out] = False
    assert np.array_equal(before[mask], after[mask])
    expect = execute_gate_functional(kind, before[1, a], None if in2 is None else before[1, b], 0)
    assert after[1, out] == expect
