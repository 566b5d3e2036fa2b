"""The four stateful PCM gates: NOR, IMPLY, OR and NIMP.

Each gate uses up to three cells on a shared bottom electrode. The output
cell starts in HRS and is conditionally set when the voltage divider puts
at least ``v_th`` across it, so every gate has OR-accumulation semantics:
``out_new = out_old or f(inputs)``.

Terminal configurations (plateau volts, ``V_app = 1.2 V``)::

    gate    IN1       IN2       OUT       bottom electrode
    NOR     V_app/2   V_app/2   V_app     10 kOhm to ground
    IMPLY   V_app/2   floating  V_app     10 kOhm to ground   (OUT is also an operand)
    OR      ground    ground    V_app     floating
    NIMP    V_app     0.35 V    ground    floating

NOR and IMPLY use a two-part pulse (all TEs at ``V_app/2`` to let the shared
node settle, then OUT raised to ``V_app``); OR and NIMP use one pulse with a
long rise so the node can follow the drive through the parasitic RC.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field, replace

import numpy as np

from . import device
from .device import CellState, Phase
from .errors import IndeterminateState, OutputNotInitialized, VerifyFailed
from .waveform import PulseWaveform
from .solver import FLOATING, GROUNDED, CircuitConfig, SimEvent, SimTrace, StepPolicy, Terminal, solve_transient

V_APP = 1.2
R_FIX = 10e3
NIMP_IN2_MEASURED = 0.35
NIMP_IN2_IDEAL = V_APP / 3

SET_PULSE = PulseWaveform.pulse(30e-9, 500e-9, 500e-9, 1.2)
RESET_PULSE = PulseWaveform.pulse(30e-9, 50e-9, 30e-9, 3.0)


class GateKind(str, enum.Enum):
    NOR = "NOR"
    IMPLY = "IMPLY"
    OR = "OR"
    NIMP = "NIMP"

    @classmethod
    def parse(cls, name: str) -> GateKind:
        try:
            return cls(name.upper())
        except ValueError:
            raise ValueError(f"unknown gate kind {name!r}") from None


TerminalSpec = float | Terminal


@dataclass(frozen=True)
class GateConfig:
    """Drive of each terminal (plateau volts, or grounded/floating)."""

    kind: GateKind
    in1: TerminalSpec
    in2: TerminalSpec
    out: TerminalSpec
    r_fix: float | None
    two_part: bool
    settle_level: float = 0.0
    requires_init: bool = True
    destructive: bool = False

    @property
    def plateau(self) -> tuple[float | None, float | None, float | None]:
        return tuple(_plateau(t) for t in (self.in1, self.in2, self.out))


def _plateau(t: TerminalSpec) -> float | None:
    if t is FLOATING:
        return None
    if t is GROUNDED:
        return 0.0
    return float(t)


def gate_config(
    kind: GateKind | str,
    v_app: float = V_APP,
    nimp_in2: float = NIMP_IN2_MEASURED,
    r_fix: float = R_FIX,
) -> GateConfig:
    kind = GateKind.parse(kind) if isinstance(kind, str) else kind
    half = v_app / 2
    if kind is GateKind.NOR:
        return GateConfig(kind, half, half, v_app, r_fix, two_part=True, settle_level=half)
    if kind is GateKind.IMPLY:
        return GateConfig(kind, half, FLOATING, v_app, r_fix, two_part=True, settle_level=half,
                          requires_init=False, destructive=True)
    if kind is GateKind.OR:
        return GateConfig(kind, GROUNDED, GROUNDED, v_app, None, two_part=False)
    return GateConfig(kind, v_app, nimp_in2, GROUNDED, None, two_part=False)


@dataclass(frozen=True)
class PulseTiming:
    """Edge and plateau durations (seconds) for gate pulses."""

    edge: float = 100e-9
    settle: float = 3e-6
    hold: float = 1e-6
    ramp_rise: float = 70e-6
    ramp_fall: float = 1e-6

    def to_dict(self) -> dict:
        return dict(edge=self.edge, settle=self.settle, hold=self.hold,
                    ramp_rise=self.ramp_rise, ramp_fall=self.ramp_fall)


@dataclass(frozen=True)
class GateSetup:
    """Circuit-level knobs shared by every gate execution."""

    c_p: float = 20e-12
    timing: PulseTiming = PulseTiming()
    v_app: float = V_APP
    r_fix: float = R_FIX
    nimp_in2: float = NIMP_IN2_MEASURED
    policy: StepPolicy = StepPolicy(dt=25e-9)

    def config(self, kind: GateKind) -> GateConfig:
        return gate_config(kind, self.v_app, self.nimp_in2, self.r_fix)

    def to_dict(self) -> dict:
        return dict(c_p=self.c_p, timing=self.timing.to_dict(), v_app=self.v_app,
                    r_fix=self.r_fix, nimp_in2=self.nimp_in2,
                    dt=self.policy.dt, event_tol=self.policy.event_tol)


def build_drives(cfg: GateConfig, timing: PulseTiming) -> tuple[list, float, tuple[float, float]]:
    """TE drives for (IN1, IN2, OUT), total sim time and the evaluation plateau window."""
    tm = timing
    drives = []
    if cfg.two_part:
        body = tm.settle + tm.edge + tm.hold
        for role, spec in zip(("in1", "in2", "out"), (cfg.in1, cfg.in2, cfg.out)):
            if isinstance(spec, Terminal):
                drives.append(spec)
            elif role == "out":
                drives.append(PulseWaveform((
                    (tm.edge, cfg.settle_level), (tm.settle, cfg.settle_level),
                    (tm.edge, spec), (tm.hold, spec), (tm.edge, 0.0))))
            else:
                drives.append(PulseWaveform(((tm.edge, spec), (body, spec), (tm.edge, 0.0))))
        plateau = (tm.edge + tm.settle + tm.edge, tm.edge + body)
        end = tm.edge + body + tm.edge
    else:
        for spec in (cfg.in1, cfg.in2, cfg.out):
            if spec is FLOATING:
                drives.append(FLOATING)
            elif spec is GROUNDED or spec == 0.0:
                drives.append(GROUNDED)
            else:
                drives.append(PulseWaveform.pulse(tm.ramp_rise, tm.hold, tm.ramp_fall, spec))
        plateau = (tm.ramp_rise, tm.ramp_rise + tm.hold)
        end = tm.ramp_rise + tm.hold + tm.ramp_fall
    return drives, end + 2 * tm.edge, plateau


def execute_gate_functional(kind: GateKind | str, in1: int, in2: int | None, out_old: int) -> int:
    """Boolean semantics. ``in2=None`` gives the unary NOR (NOT) and OR (copy) forms."""
    kind = GateKind.parse(kind) if isinstance(kind, str) else kind
    if kind is GateKind.IMPLY:
        if in2 is not None:
            raise ValueError("IMPLY takes no second input; OUT is the second operand")
        f = not in1
    elif kind is GateKind.NOR:
        f = not in1 and not in2 if in2 is not None else not in1
    elif kind is GateKind.OR:
        f = bool(in1) or bool(in2)
    else:
        if in2 is None:
            raise ValueError("NIMP needs two inputs")
        f = bool(in1) and not in2
    return int(bool(out_old) or f)


def read_bit(cell: CellState) -> int:
    value = device.logic_value(device.read_resistance(cell))
    if value is None:
        raise IndeterminateState(f"cell resistance {device.read_resistance(cell):g} ohm is between bands")
    return value


@dataclass
class GateResult:
    kind: GateKind
    roles: tuple[str, ...]
    output: int
    cells: list[CellState]
    r_pre: np.ndarray
    r_post: np.ndarray
    input_bits_pre: tuple[int, ...]
    input_bits_post: tuple[int, ...]
    trace: SimTrace | None = None
    events: list[SimEvent] = field(default_factory=list)

    @property
    def input_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r in ("in1", "in2")]

    @property
    def drift(self) -> float:
        idx = self.input_indices
        if not idx:
            return 0.0
        return float(np.max(np.abs(self.r_post[idx] - self.r_pre[idx]) / self.r_pre[idx]))

    @property
    def out_cell(self) -> CellState:
        return self.cells[self.roles.index("out")]


def execute_gate_circuit(
    kind: GateKind | str,
    in1: CellState,
    in2: CellState | None,
    out: CellState,
    setup: GateSetup = GateSetup(),
    allow_uninitialized: bool = False,
) -> GateResult:
    """Run one gate on the shared-node circuit model.

    ``in2`` may be ``None`` for IMPLY and for the unary NOR/OR forms; the
    missing terminal is simply absent (equivalent to floating).
    """
    kind = GateKind.parse(kind) if isinstance(kind, str) else kind
    cfg = setup.config(kind)
    if kind is GateKind.NIMP and in2 is None:
        raise ValueError("NIMP needs two inputs")
    cells, roles = [in1], ["in1"]
    if in2 is not None:
        cells.append(in2)
        roles.append("in2")
    cells.append(out)
    roles.append("out")
    for c in cells:
        if not c.at_rest:
            raise ValueError("gate operands must be at rest")
    bits = [read_bit(c) for c in cells]
    if not cfg.destructive and bits[-1] != 0 and not allow_uninitialized:
        raise OutputNotInitialized(f"{kind.value} output must be initialized to HRS (logic 0)")

    drives_all, duration, _ = build_drives(cfg, setup.timing)
    drives = [drives_all[0]] + ([drives_all[1]] if in2 is not None else []) + [drives_all[2]]
    trace = solve_transient(CircuitConfig(cells, drives, cfg.r_fix, setup.c_p), duration, setup.policy)
    post = trace.cells
    r_pre = np.array([device.read_resistance(c) for c in cells])
    r_post = np.array([device.read_resistance(c) for c in post])
    n_in = len(cells) - 1
    return GateResult(
        kind=kind,
        roles=tuple(roles),
        output=read_bit(post[-1]),
        cells=post,
        r_pre=r_pre,
        r_post=r_post,
        input_bits_pre=tuple(bits[:n_in]),
        input_bits_post=tuple(read_bit(c) for c in post[:n_in]),
        trace=trace,
        events=trace.events,
    )


def input_stability(result: GateResult, tolerance: float = 0.05) -> bool:
    """Inputs kept their logic value and drifted at most ``tolerance`` (inclusive)."""
    return result.drift <= tolerance and result.input_bits_pre == result.input_bits_post


def operand_combinations(kind: GateKind) -> list[tuple[int, int]]:
    """(in1, in2) pairs, or (in1, out_old) for IMPLY."""
    return [(0, 0), (0, 1), (1, 0), (1, 1)]


def _cell_for(bit: int, params: device.DeviceParams) -> CellState:
    return device.crystalline(params) if bit else device.amorphous(params)


def truth_table(
    kind: GateKind | str,
    mode: str = "functional",
    setup: GateSetup = GateSetup(),
    params: device.DeviceParams = device.DeviceParams(),
) -> list[tuple[tuple[int, int], int]]:
    """Rows of ``((a, b), out)``; for IMPLY the operands are ``(in1, out_old)``."""
    kind = GateKind.parse(kind) if isinstance(kind, str) else kind
    rows = []
    for a, b in operand_combinations(kind):
        if mode == "functional":
            if kind is GateKind.IMPLY:
                out = execute_gate_functional(kind, a, None, b)
            else:
                out = execute_gate_functional(kind, a, b, 0)
        elif mode == "circuit":
            if kind is GateKind.IMPLY:
                res = execute_gate_circuit(kind, _cell_for(a, params), None, _cell_for(b, params), setup)
            else:
                res = execute_gate_circuit(kind, _cell_for(a, params), _cell_for(b, params),
                                           _cell_for(0, params), setup)
            out = res.output
        else:
            raise ValueError(f"unknown mode {mode!r}")
        rows.append(((a, b), out))
    return rows


@functools.lru_cache(maxsize=4096)
def _write_verify_rest(params: device.DeviceParams, phase: Phase, target: int, max_attempts: int):
    cell = CellState(params=params, phase=phase)
    if read_bit_or_none(cell) == target:
        return phase, 0, 0
    sets = 0
    for attempt in range(1, max_attempts + 1):
        if target:
            res = device.drive_cell(cell, SET_PULSE)
            cell = res.state
            sets += sum(1 for _, e in res.events if e is device.EventKind.SET)
        else:
            cell = device.apply_reset_pulse(cell, RESET_PULSE)
        if read_bit_or_none(cell) == target:
            return cell.phase, attempt, sets
    raise VerifyFailed(f"cell did not reach logic {target} after {max_attempts} attempts")


def read_bit_or_none(cell: CellState) -> int | None:
    return device.logic_value(device.read_resistance(cell))


def write_verify(cell: CellState, target: int, max_attempts: int = 10) -> tuple[CellState, int]:
    """Program ``cell`` to ``target`` with set/reset pulses, reading after each.

    Returns the new state and the number of program pulses applied (0 when
    the first read already matches).
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    if target not in (0, 1):
        raise ValueError("target must be 0 or 1")
    if not cell.at_rest:
        raise ValueError("write_verify needs a cell at rest")
    phase, attempts, sets = _write_verify_rest(cell.params, cell.phase, target, max_attempts)
    return replace(cell, phase=phase, switch_count=cell.switch_count + sets), attempts
