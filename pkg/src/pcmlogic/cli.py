"""pcmlogic command-line workbench.

Exit codes: 0 success, 1 other simulation error, 2 usage, 3 configuration
or input file error, 4 verification failure, 5 margin failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, device
from .compiler import (
    CompiledProgram,
    compile_netlist,
    parse_netlist,
    run_vectors,
    verify_exhaustive,
)
from .config import DEFAULT_PRESET, PRESET_NAMES, Preset, load_config
from .device import EnduranceWarning, VariabilitySpec
from .errors import (
    ConfigError,
    NetlistError,
    PCMError,
    ProgramSyntaxError,
    RowOverflow,
)
from .gates import (
    RESET_PULSE,
    SET_PULSE,
    GateKind,
    execute_gate_circuit,
    execute_gate_functional,
    gate_config,
    write_verify,
)
from .margins import Bands, worst_case_margins
from .robustness import monte_carlo

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_CONFIG, EXIT_VERIFY, EXIT_MARGIN = 0, 1, 2, 3, 4, 5

DEFAULT_AMPLITUDES = tuple(round(0.3 * k, 2) for k in range(1, 12))
CHARACTERIZE_SERIES_R = 1e3


class UsageError(Exception):
    pass


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _bit(text: str) -> int:
    if text not in ("0", "1"):
        raise argparse.ArgumentTypeError(f"expected 0 or 1, got {text!r}")
    return int(text)


def _bit_or_dash(text: str):
    return None if text == "-" else _bit(text)


def _kind_or_all(text: str) -> str:
    if text.lower() == "all":
        return "all"
    try:
        return GateKind.parse(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _kinds(arg: str) -> list[GateKind]:
    return list(GateKind) if arg == "all" else [GateKind(arg)]


# -- characterize -----------------------------------------------------------

def cmd_characterize(args, preset: Preset, out: Path) -> tuple[int, dict]:
    p = preset.device
    rs = args.series_resistance
    amps = args.amplitudes or DEFAULT_AMPLITUDES
    rows = []
    for a in amps:
        set_cell = device.drive_cell(device.amorphous(p), SET_PULSE.scaled(a / SET_PULSE.amplitude), rs).state
        start = device.crystalline(p)
        divider = device.read_resistance(start) / (device.read_resistance(start) + rs)
        reset_cell = device.apply_reset_pulse(start, RESET_PULSE.scaled(a / RESET_PULSE.amplitude * divider))
        rows.append((a, device.read_resistance(set_cell), device.read_resistance(reset_cell)))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["amplitude_V", "set_r_ohm", "reset_r_ohm"])
        for a, r_set, r_reset in rows:
            w.writerow([_fmt(a), _fmt(r_set), _fmt(r_reset)])
    set_v = next((a for a, r, _ in rows if device.logic_value(r) == 1), None)
    reset_v = next((a for a, _, r in rows if device.logic_value(r) == 0), None)

    tr = device.drive_cell(device.amorphous(p), SET_PULSE, rs, record=True)
    with open(out / "set_transient.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "v_cell_V", "current_A", "resistance_ohm"])
        for row in zip(tr.time, tr.v_cell, tr.current, tr.resistance):
            w.writerow([_fmt(x) for x in row])

    cell = device.amorphous(p)
    warned = False
    for _ in range(args.cycles):
        cell, _ = write_verify(cell, 1)
        cell, _ = write_verify(cell, 0)
        if not warned and device.endurance_exceeded(cell):
            warnings.warn(f"cell reached {cell.switch_count} set/reset cycles", EnduranceWarning, stacklevel=1)
            warned = True
    endurance = {
        "cycles": args.cycles,
        "switch_count": cell.switch_count,
        "warning_threshold": device.ENDURANCE_WARNING_CYCLES,
        "endurance_warning": device.endurance_exceeded(cell),
    }
    summary = {"set_transition_V": set_v, "reset_transition_V": reset_v,
               "series_resistance_ohm": rs, "endurance": endurance}
    _write_json(out / "characterize.json", summary)
    print(f"set transition at {set_v} V, reset transition at {reset_v} V (through {rs:g} ohm)")
    print(f"endurance: {cell.switch_count} cycles" + ("  WARNING: endurance limit reached" if warned else ""))
    return EXIT_OK, summary


# -- gate -------------------------------------------------------------------

def cmd_gate(args, preset: Preset, out: Path) -> tuple[int, dict]:
    kind = GateKind(args.kind)
    p = preset.device
    if kind is GateKind.IMPLY and args.in2 is not None:
        raise UsageError("IMPLY takes '-' for in2; use --out-old for the OUT operand")
    if kind is GateKind.NIMP and args.in2 is None:
        raise UsageError("NIMP needs two inputs")
    cell = lambda b: device.crystalline(p) if b else device.amorphous(p)
    expected = execute_gate_functional(kind, args.in1, args.in2, args.out_old)
    if args.mode == "functional":
        report = {"gate": kind.value, "mode": "functional", "in1": args.in1, "in2": args.in2,
                  "out_old": args.out_old, "out": expected}
        print(f"{kind.value} in1={args.in1} in2={'-' if args.in2 is None else args.in2} -> out={expected}")
        _write_json(out / "gate.json", report)
        return EXIT_OK, report
    res = execute_gate_circuit(kind, cell(args.in1), None if args.in2 is None else cell(args.in2),
                               cell(args.out_old), preset.setup, allow_uninitialized=True)
    res.trace.write_csv(out / "trace.csv")
    res.trace.write_events_json(out / "events.json")
    report = {
        "gate": kind.value, "mode": "circuit", "in1": args.in1, "in2": args.in2, "out_old": args.out_old,
        "out": res.output, "expected": expected, "input_drift": res.drift,
        "inputs_stable": res.input_bits_pre == res.input_bits_post,
        "r_pre_ohm": res.r_pre.tolist(), "r_post_ohm": res.r_post.tolist(),
        "events": res.trace.events_as_dicts(),
    }
    _write_json(out / "gate.json", report)
    print(f"{kind.value} in1={args.in1} in2={'-' if args.in2 is None else args.in2} -> out={res.output}"
          f"  (input drift {res.drift:.3%}, {len(res.events)} events)")
    ok = res.output == expected and report["inputs_stable"]
    return (EXIT_OK if ok else EXIT_VERIFY), report


# -- margins ----------------------------------------------------------------

def cmd_margins(args, preset: Preset, out: Path) -> tuple[int, dict]:
    setup = preset.setup
    r_fix = args.r_fix if args.r_fix is not None else setup.r_fix
    bands = Bands(args.lrs_max, args.hrs_min, args.lrs_min, args.hrs_max)
    if bands.lrs_max > bands.hrs_min:
        raise UsageError("--lrs-max must not exceed --hrs-min")
    v_th = preset.device.v_th
    reports = []
    print(f"{'gate':6} {'switch':>9} {'nonswitch':>10} {'input':>8}  result")
    for kind in _kinds(args.kind):
        rep = worst_case_margins(gate_config(kind, setup.v_app, setup.nimp_in2, r_fix), bands, v_th)
        reports.append(rep)
        sw = "-" if rep.min_switching_margin == float("inf") else f"{rep.min_switching_margin:+.4f}"
        print(f"{kind.value:6} {sw:>9} {rep.max_nonswitching_margin:>+10.4f} {rep.input_margin:>+8.4f}  "
              f"{'PASS' if rep.passed else 'FAIL'}")
    data = {"r_fix": r_fix, "bands": vars(bands), "gates": [_finite(r.to_dict()) for r in reports]}
    _write_json(out / "margins.json", data)
    return (EXIT_OK if all(r.passed for r in reports) else EXIT_MARGIN), data


def _finite(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in d.items()}


# -- montecarlo -------------------------------------------------------------

def cmd_montecarlo(args, preset: Preset, out: Path) -> tuple[int, dict]:
    if args.n < 1:
        raise UsageError("iteration count must be >= 1")
    var = preset.variability
    overrides = {k: getattr(args, k) for k in ("sigma_v_th", "sigma_r_lrs", "sigma_r_hrs")
                 if getattr(args, k) is not None}
    if overrides:
        var = VariabilitySpec.from_dict({**var.to_dict(), **overrides})
    summary = {}
    ok = True
    for kind in _kinds(args.kind):
        rep = monte_carlo(kind, args.n, var, args.seed, preset.device, preset.setup, args.tolerance)
        rep.write_json(out / f"montecarlo_{kind.value}.json")
        rep.write_scatter_csv(out / f"scatter_{kind.value}.csv")
        per = "  ".join(f"{a}{b}: {n}/{args.n}" for (a, b), n in rep.successes.items())
        print(f"{kind.value:6} {per}  success {rep.success_rate:.1%}")
        for f in rep.failures[:10]:
            print(f"  fail it={f.iteration} combo={f.combination} seeds={f.seeds}: {f.reason}")
        summary[kind.value] = rep.success_rate
        ok &= not rep.failures
    return (EXIT_OK if ok else EXIT_VERIFY), {"variability": var.to_dict(), "success_rate": summary}


# -- compile / run ----------------------------------------------------------

def cmd_compile(args, preset: Preset, out: Path) -> tuple[int, dict]:
    path = Path(args.netlist)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read netlist {path}: {exc}") from exc
    try:
        netlist = parse_netlist(text)
        compiled = compile_netlist(netlist, args.row_width)
    except NetlistError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except RowOverflow as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    compiled.write(out)
    check = verify_exhaustive(netlist, compiled, "functional", preset.device, preset.setup)
    stats = compiled.stats()
    stats["functional_check"] = {"vectors": check.vectors, "passed": check.passed,
                                 "max_set_events_per_column": check.to_dict()["max_set_events_per_column"]}
    _write_json(out / "stats.json", stats)
    print(f"{len(netlist.assignments)} assignments -> {compiled.computation_steps} computation steps, "
          f"{compiled.init_ops} init ops, {compiled.cells_used} cells")
    return (EXIT_OK if check.passed else EXIT_VERIFY), stats


def _load_program(args) -> CompiledProgram:
    prog_path = Path(args.program)
    alloc_path = Path(args.alloc) if args.alloc else prog_path.with_name("allocation.json")
    try:
        text = prog_path.read_text()
        alloc = json.loads(alloc_path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read program files: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{alloc_path}: invalid JSON: {exc}") from exc
    try:
        return CompiledProgram.from_files(text, alloc)
    except ProgramSyntaxError as exc:
        raise ConfigError(f"{prog_path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{alloc_path}: malformed allocation ({exc})") from exc


def cmd_run(args, preset: Preset, out: Path) -> tuple[int, dict]:
    compiled = _load_program(args)
    netlist = parse_netlist(compiled.netlist_text) if compiled.netlist_text else None
    if args.all_vectors:
        if netlist is None:
            raise UsageError("--all-vectors needs the netlist recorded in allocation.json")
        rep = verify_exhaustive(netlist, compiled, args.mode, preset.device, preset.setup)
        data = rep.to_dict()
        _write_json(out / "run.json", data)
        print(f"{args.mode}: {data['matched']}/{rep.vectors} vectors match, "
              f"{compiled.computation_steps} computation steps")
        for v, e, g in rep.mismatches[:10]:
            print(f"  mismatch inputs={''.join(map(str, v))} expected={e} got={g}")
        return (EXIT_OK if rep.passed else EXIT_VERIFY), data
    bits = args.inputs.replace(",", "").replace(" ", "")
    if any(b not in "01" for b in bits) or len(bits) != len(compiled.inputs):
        raise UsageError(f"--inputs needs {len(compiled.inputs)} bits "
                         f"({' '.join(compiled.inputs)}), got {args.inputs!r}")
    vec = np.array([[int(b) for b in bits]], dtype=np.int8)
    got, xbar = run_vectors(compiled, vec, args.mode, preset.device, preset.setup)
    outputs = dict(zip(compiled.outputs, (int(b) for b in got[0])))
    xbar.write_logic_csv(out / "logic.csv")
    xbar.write_resistance_json(out / "resistance.json")
    data = {"mode": args.mode, "inputs": dict(zip(compiled.inputs, map(int, bits))), "outputs": outputs,
            "computation_steps": compiled.computation_steps}
    code = EXIT_OK
    if netlist is not None:
        expected = dict(zip(netlist.outputs, netlist.evaluate(vec[0])))
        data["expected"] = expected
        code = EXIT_OK if expected == outputs else EXIT_VERIFY
    _write_json(out / "run.json", data)
    print(" ".join(f"{k}={v}" for k, v in outputs.items()))
    return code, data


# -- parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="JSON config file")
    p.add_argument("--preset", default=d(None), choices=PRESET_NAMES, help=f"base preset (default {DEFAULT_PRESET})")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--out", default=d("pcmlogic-out"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcmlogic", description="PCM stateful-logic workbench")
    parser.add_argument("--version", action="version", version=f"pcmlogic {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _common(p, suppress=True)
        return p

    p = add("characterize", "set/reset amplitude sweep, set transient and endurance cycling")
    p.add_argument("--cycles", type=int, default=device.ENDURANCE_WARNING_CYCLES)
    p.add_argument("--amplitudes", type=lambda s: [float(x) for x in s.split(",")], default=None,
                   help="comma-separated source amplitudes in volts")
    p.add_argument("--series-resistance", type=float, default=CHARACTERIZE_SERIES_R)

    p = add("gate", "run one gate and write the shared-node trace")
    p.add_argument("kind", type=lambda s: GateKind.parse(s).value)
    p.add_argument("in1", type=_bit)
    p.add_argument("in2", type=_bit_or_dash, help="0, 1 or '-' (IMPLY)")
    p.add_argument("--out-old", type=_bit, default=0)
    p.add_argument("--mode", choices=("circuit", "functional"), default="circuit")

    p = add("margins", "worst-case DC margins over the resistance band edges")
    p.add_argument("kind", type=_kind_or_all)
    p.add_argument("--lrs-max", type=float, default=device.LRS_MAX)
    p.add_argument("--hrs-min", type=float, default=device.HRS_MIN)
    p.add_argument("--lrs-min", type=float, default=None)
    p.add_argument("--hrs-max", type=float, default=None)
    p.add_argument("--r-fix", type=float, default=None)

    p = add("montecarlo", "gate robustness under device variability")
    p.add_argument("kind", type=_kind_or_all)
    p.add_argument("n", type=int)
    p.add_argument("--sigma-v-th", dest="sigma_v_th", type=float, default=None)
    p.add_argument("--sigma-r-lrs", dest="sigma_r_lrs", type=float, default=None)
    p.add_argument("--sigma-r-hrs", dest="sigma_r_hrs", type=float, default=None)
    p.add_argument("--tolerance", type=float, default=0.05, help="allowed input resistance drift")

    p = add("compile", "compile a netlist to a crossbar program")
    p.add_argument("netlist")
    p.add_argument("--row-width", type=int, default=16)

    p = add("run", "run a compiled program on the crossbar model")
    p.add_argument("program")
    p.add_argument("--alloc", default=None, help="allocation.json (default: next to the program)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--inputs", help="input bits in netlist order, e.g. 101")
    g.add_argument("--all-vectors", action="store_true")
    p.add_argument("--mode", choices=("functional", "circuit"), default="functional")
    return parser


COMMANDS = {
    "characterize": cmd_characterize,
    "gate": cmd_gate,
    "margins": cmd_margins,
    "montecarlo": cmd_montecarlo,
    "compile": cmd_compile,
    "run": cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        preset = load_config(args.config, args.preset)
        out.mkdir(parents=True, exist_ok=True)
        params = {k: v for k, v in sorted(vars(args).items())
                  if k not in ("config", "preset", "seed", "out", "command")}
        manifest = {
            "subcommand": args.command,
            "config": args.config,
            "preset": args.preset or preset.name,
            "seed": args.seed,
            "out": str(out),
            "arguments": params,
            "effective": preset.to_dict(),
            "version": __version__,
        }
        _write_json(out / "manifest.json", manifest)
        code, _ = COMMANDS[args.command](args, preset, out)
        return code
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pcmlogic {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"pcmlogic: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PCMError as exc:
        print(f"pcmlogic: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
