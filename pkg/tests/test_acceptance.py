"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import dataclasses
import json
import time

import numpy as np
import pytest

from pcmlogic import device
from pcmlogic.cli import main
from pcmlogic.compiler import compile_netlist, parse_netlist, verify_exhaustive
from pcmlogic.config import load_preset
from pcmlogic.device import DEFAULT_VARIABILITY, EventKind
from pcmlogic.gates import (
    GateKind,
    GateSetup,
    build_drives,
    execute_gate_circuit,
    execute_gate_functional,
    input_stability,
    operand_combinations,
)
from pcmlogic.robustness import monte_carlo
from pcmlogic.solver import steady_state_node_voltage

from conftest import FULL_ADDER, random_netlist, record_criterion
from oracles import divider_exact, mna_node_voltage

# Boolean definitions of the four gates, written out independently of the package
REFERENCE = {
    GateKind.NOR: lambda a, b: int(not (a or b)),
    GateKind.OR: lambda a, b: int(a or b),
    GateKind.NIMP: lambda a, b: int(a and not b),
    GateKind.IMPLY: lambda a, out_old: int((not a) or out_old),
}


def report(*args):
    line = record_criterion(*args)
    print(line)
    return args[2]


def _cell(bit, p=device.DeviceParams()):
    return device.crystalline(p) if bit else device.amorphous(p)


def test_criterion_1_truth_tables():
    t0 = time.perf_counter()
    setup = load_preset("experimental-setup").setup
    wrong, worst_drift = [], 0.0
    for kind in GateKind:
        for a, b in operand_combinations(kind):
            if kind is GateKind.IMPLY:
                res = execute_gate_circuit(kind, _cell(a), None, _cell(b), setup)
            else:
                res = execute_gate_circuit(kind, _cell(a), _cell(b), _cell(0), setup)
            worst_drift = max(worst_drift, res.drift)
            if res.output != REFERENCE[kind](a, b) or not input_stability(res, 0.05):
                wrong.append((kind.value, a, b))
    elapsed = time.perf_counter() - t0
    ok = not wrong and elapsed < 5.0
    report(1, "circuit truth tables", ok,
           f"16/16 correct, max input drift {worst_drift:.2%}, {elapsed:.2f} s (< 5 s)" if ok
           else f"wrong={wrong}, {elapsed:.2f} s")
    assert ok


def test_criterion_2_montecarlo():
    t0 = time.perf_counter()
    preset = load_preset("experimental-setup")
    rates = {}
    for kind in GateKind:
        rep = monte_carlo(kind, 50, DEFAULT_VARIABILITY, seed=7, nominal=preset.device, setup=preset.setup)
        rates[kind.value] = (rep.success_rate, min(rep.successes.values()))
    elapsed = time.perf_counter() - t0
    ok = all(r == 1.0 for r, _ in rates.values()) and elapsed < 60.0
    detail = ", ".join(f"{k} {n}/50 per combo" for k, (_, n) in rates.items())
    report(2, "50-iteration robustness", ok, f"{detail}, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_3_divider_oracle():
    corners = {
        # (TE volts, resistances, r_fix, which cell is OUT, expected V across OUT)
        "OR both HRS": ((0.0, 0.0, 1.2), (1e6, 1e6, 1e6), None, 2, 2 / 3 * 1.2),
        "NOR one LRS": ((0.6, 0.6, 1.2), (10e3, 1e6, 1e6), 10e3, 2, 0.894),
        "NIMP switching": ((1.2, 0.35, 0.0), (10e3, 100e3, 100e3), None, 2, 1.03),
    }
    parts, ok = [], True
    for name, (volts, rs, r_fix, out, approx) in corners.items():
        v_b = steady_state_node_voltage(volts, [1 / r for r in rs], r_fix)
        exact = float(divider_exact(volts, rs, r_fix))
        mna = mna_node_voltage(volts, rs, r_fix)
        v_out = abs(volts[out] - v_b)
        good = (abs(v_b - exact) <= 1e-9 * abs(exact) and abs(v_b - mna) <= 1e-9 * abs(mna)
                and abs(v_out - approx) < 0.005)
        ok &= good
        parts.append(f"{name} V_out={v_out:.4f} V")
    report(3, "divider oracle (rel 1e-9)", ok, "; ".join(parts))
    assert ok


def _or_run(preset_name, rise):
    p = load_preset(preset_name)
    setup = dataclasses.replace(p.setup, timing=dataclasses.replace(p.setup.timing, ramp_rise=rise, hold=1e-6))
    res = execute_gate_circuit("OR", _cell(0), _cell(0), _cell(0), setup)
    out_events = [e for e in res.events if e.cell == 2]
    return res, out_events


def test_criterion_4_rc_delay():
    t0 = time.perf_counter()
    exp_fast, ev_fast = _or_run("experimental-setup", 10e-9)
    exp_slow, ev_slow = _or_run("experimental-setup", 70e-6)
    int_fast, ev_ifast = _or_run("integrated", 10e-9)
    int_slow, ev_islow = _or_run("integrated", 70e-6)
    spurious = any(e.kind is EventKind.THRESHOLD for e in ev_fast)
    ok = (spurious and not ev_slow and exp_slow.output == 0
          and not ev_ifast and not ev_islow and int_fast.output == 0 and int_slow.output == 0)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    def desc(evs):
        return "spurious OUT threshold switch" if evs else "no OUT switch"

    report(4, "RC-delay reproduction", ok,
           f"experimental 10 ns: {desc(ev_fast)}, 70 us: {desc(ev_slow)}; "
           f"integrated 10 ns: {desc(ev_ifast)}, 70 us: {desc(ev_islow)}; {elapsed:.2f} s (< 10 s)")
    assert ok


def test_criterion_5_compiler():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    nets = [random_netlist(rng, max_inputs=8, max_gates=25) for _ in range(200)]
    compiled = [compile_netlist(n, 64) for n in nets]
    functional = sum(verify_exhaustive(n, c).passed for n, c in zip(nets, compiled))
    # circuit mode on the 20 longest programs
    order = sorted(range(200), key=lambda i: (-compiled[i].computation_steps, i))[:20]
    circuit = sum(verify_exhaustive(nets[i], compiled[i], "circuit").passed for i in order)
    xor = compile_netlist("inputs a b; x = XOR(a,b); out x;", 3)
    fa_net = parse_netlist(FULL_ADDER)
    fa = compile_netlist(fa_net, 8)
    fa_ok = {m: verify_exhaustive(fa_net, fa, m).to_dict()["matched"] for m in ("functional", "circuit")}
    elapsed = time.perf_counter() - t0
    ok = (functional == 200 and circuit == 20 and xor.computation_steps == 2
          and fa_ok == {"functional": 8, "circuit": 8} and elapsed < 300)
    report(5, "compiler equivalence", ok,
           f"functional {functional}/200, circuit {circuit}/20, XOR {xor.computation_steps} steps, "
           f"full adder {fa_ok['functional']}/8 and {fa_ok['circuit']}/8, {elapsed:.1f} s (< 300 s)")
    assert ok


def test_criterion_6_quasi_static():
    setup = dataclasses.replace(GateSetup(), c_p=1e-15)
    worst, checked, ok = 0.0, 0, True
    for kind in GateKind:
        cfg = setup.config(kind)
        _, _, (p0, p1) = build_drives(cfg, setup.timing)
        for a, b in operand_combinations(kind):
            if kind is GateKind.IMPLY:
                cells, volts = [_cell(a), _cell(b)], [cfg.plateau[0], cfg.plateau[2]]
                switching = REFERENCE[kind](a, b) != b
                res = execute_gate_circuit(kind, *[cells[0], None, cells[1]], setup)
            else:
                cells, volts = [_cell(a), _cell(b), _cell(0)], list(cfg.plateau)
                switching = REFERENCE[kind](a, b) == 1
                res = execute_gate_circuit(kind, *cells, setup)
            if switching:
                continue
            tr = res.trace
            g = [device.conductance(c) for c in cells]
            v_ss = steady_state_node_voltage(volts, g, cfg.r_fix)
            k = tr.sample_at(0.5 * (p0 + p1))
            err = abs(tr.v_be[k] - v_ss)
            worst = max(worst, err)
            ok &= err <= 1e-3
            checked += 1
    report(6, "quasi-static consistency (c_p = 1 fF)", ok,
           f"{checked} non-switching cases, max |V_B - V_ss| = {worst * 1e3:.3g} mV (<= 1 mV)")
    assert ok


def test_criterion_7_endurance(tmp_path):
    with pytest.warns(device.EnduranceWarning):
        code = main(["--out", str(tmp_path), "characterize", "--cycles", "10000"])
    data = json.loads((tmp_path / "characterize.json").read_text())["endurance"]
    ok = code == 0 and data["switch_count"] == 10_000 and data["endurance_warning"]
    report(7, "endurance accounting", ok,
           f"switch_count={data['switch_count']}, warning={data['endurance_warning']}")
    assert ok
