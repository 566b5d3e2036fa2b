"""Single-node transient solver for cells sharing one bottom electrode.

Every cell connects its top electrode (TE) to a driver and its bottom
electrode to the shared node B. Node B carries a parasitic capacitance
``c_p`` to ground and, optionally, a fixed resistor to ground. KCL at B::

    c_p * dV_B/dt = sum_i G_i(t) * (V_i(t) - V_B) - G_fix * V_B

The ODE is integrated with backward Euler. Conductances are frozen over a
step and taken from the cell states at the start of the step; steps are
shortened to land on waveform breakpoints and on the instants when a cell is
due to threshold-switch or finish crystallizing, and a threshold/hold
crossing inside a step is located by bisection.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import device
from .device import CellState, EventKind, Phase
from .errors import IsolatedNode, NonConvergence
from .waveform import PulseWaveform


class Terminal(enum.Enum):
    GROUNDED = "grounded"
    FLOATING = "floating"


Drive = Union[PulseWaveform, Terminal]

GROUNDED = Terminal.GROUNDED
FLOATING = Terminal.FLOATING


@dataclass
class CircuitConfig:
    """Cells on one shared node with their TE drives.

    ``r_fix=None`` leaves the bottom electrode floating; otherwise it is
    tied to ground through ``r_fix`` ohms.
    """

    cells: list[CellState]
    te_drives: list[Drive]
    r_fix: float | None = None
    c_p: float = 0.0

    def __post_init__(self):
        self.cells = list(self.cells)
        self.te_drives = list(self.te_drives)
        if len(self.cells) < 2:
            raise ValueError("a shared-node circuit needs at least 2 cells")
        if len(self.te_drives) != len(self.cells):
            raise ValueError("one TE drive per cell is required")
        if self.r_fix is not None and not self.r_fix > 0:
            raise ValueError("r_fix must be positive")
        if self.c_p < 0:
            raise ValueError("c_p must be non-negative")


@dataclass(frozen=True)
class StepPolicy:
    """Time-step control.

    ``dt`` is the base (maximum) step; ``event_tol`` is the width to which
    threshold and hold crossings are bisected.
    """

    dt: float = 1e-9
    event_tol: float = 0.1e-9
    max_bisections: int = 64


@dataclass(frozen=True)
class SimEvent:
    time: float
    cell: int
    kind: EventKind


@dataclass
class SimTrace:
    """Sampled transient result.

    Per-cell arrays have shape ``(n_samples, n_cells)``. Floating cells
    report zero ``v_across`` and NaN ``v_te``. ``resistance[k]`` is the
    cell resistance after the step ending at ``time[k]``.
    """

    time: np.ndarray
    v_be: np.ndarray
    v_te: np.ndarray
    v_across: np.ndarray
    resistance: np.ndarray
    events: list[SimEvent]
    cells: list[CellState]
    max_kcl_residual: float = 0.0
    c_p: float = 0.0
    r_fix: float | None = None
    floating: tuple[bool, ...] = field(default_factory=tuple)

    @property
    def n_cells(self) -> int:
        return self.v_across.shape[1]

    def events_for(self, cell: int) -> list[SimEvent]:
        return [e for e in self.events if e.cell == cell]

    def sample_at(self, t: float) -> int:
        """Index of the last sample at or before ``t``."""
        return int(np.searchsorted(self.time, t, side="right") - 1)

    def csv_header(self) -> list[str]:
        cols = ["time_s", "v_be_V"]
        for i in range(self.n_cells):
            cols += [f"cell{i}_v_V", f"cell{i}_r_ohm"]
        return cols

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.csv_header())
            for k in range(len(self.time)):
                row = [_fmt(self.time[k]), _fmt(self.v_be[k])]
                for i in range(self.n_cells):
                    row += [_fmt(self.v_across[k, i]), _fmt(self.resistance[k, i])]
                w.writerow(row)

    def events_as_dicts(self) -> list[dict]:
        return [{"t": e.time, "cell": e.cell, "kind": e.kind.value} for e in self.events]

    def write_events_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.events_as_dicts(), indent=2) + "\n")


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def steady_state_node_voltage(
    te_volts: Sequence[float | None],
    conductances: Sequence[float],
    r_fix: float | None = None,
) -> float:
    """DC voltage of the shared node; ``None`` in ``te_volts`` marks a floating TE."""
    num = 0.0
    den = 0.0 if r_fix is None else 1.0 / r_fix
    connected = r_fix is not None
    for v, g in zip(te_volts, conductances, strict=True):
        if v is None:
            continue
        connected = True
        num += g * v
        den += g
    if not connected or den == 0.0:
        raise IsolatedNode("every terminal is floating and the bottom electrode is floating")
    return num / den


def _drive_value(drive: Drive, t: float) -> float | None:
    if drive is FLOATING:
        return None
    if drive is GROUNDED:
        return 0.0
    return drive(t)


def _status(state: CellState, v: float) -> int:
    """Coarse switching regime used to detect crossings inside a step."""
    if state.phase is Phase.CRYSTALLINE:
        return 0
    p = state.params
    if state.dynamic_on:
        return 2 if abs(v) >= p.v_hold else 1
    return 3 if abs(v) >= p.v_th else 4


def solve_transient(
    config: CircuitConfig,
    duration: float,
    policy: StepPolicy = StepPolicy(),
    switching: bool = True,
) -> SimTrace:
    """Integrate the shared-node circuit over ``[0, duration]``.

    With ``switching=False`` cell states are frozen (useful for checking
    linearity of the node voltage in the drives).
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    drives = config.te_drives
    n = len(drives)
    active = [i for i in range(n) if drives[i] is not FLOATING]
    if not active and config.r_fix is None:
        raise IsolatedNode("every terminal is floating and the bottom electrode is floating")
    g_fix = 0.0 if config.r_fix is None else 1.0 / config.r_fix
    c_p = config.c_p
    states = list(config.cells)

    bps = {duration}
    for d in drives:
        if isinstance(d, PulseWaveform):
            bps.update(b for b in d.breakpoints if 0.0 < b < duration)
    breakpoints = sorted(bps)

    def node(v_prev: float, t_new: float, h: float, g: list[float]) -> tuple[float, list[float]]:
        vte = [_drive_value(drives[i], t_new) for i in active]
        num = c_p / h * v_prev
        den = c_p / h + g_fix
        for gi, vi in zip(g, vte):
            num += gi * vi
            den += gi
        if den == 0.0:
            # only floating cells and no capacitor path: node undefined
            raise IsolatedNode("shared node has no conduction path")
        v_new = num / den
        if not math.isfinite(v_new):
            raise NonConvergence(f"non-finite node voltage at t={t_new:g}")
        return v_new, vte

    t = 0.0
    v_b = 0.0
    v_te0 = [_drive_value(drives[i], 0.0) for i in active]
    g0 = [device.conductance(states[i]) for i in active]
    if c_p == 0.0:
        v_b, _ = node(0.0, 0.0, 1.0, g0)

    times = [0.0]
    vbs = [v_b]
    vte_rows = [_row(n, active, v_te0, math.nan)]
    vac_rows = [_row(n, active, [v - v_b for v in v_te0], 0.0)]
    r_rows = [[1.0 / device.conductance(s) for s in states]]
    events: list[SimEvent] = []
    max_res = 0.0
    prev_vac = [v - v_b for v in v_te0]
    bp_idx = 0
    t_end_tol = duration * 1e-12

    while t < duration - t_end_tol:
        while breakpoints[bp_idx] <= t + t_end_tol:
            bp_idx += 1
        next_bp = breakpoints[bp_idx]
        g = [device.conductance(states[i]) for i in active]
        h = min(policy.dt, next_bp - t)
        if switching:
            for i in active:
                h = min(h, max(device.time_to_next_event(states[i]), 1e-15))

        v_new, vte = node(v_b, t + h, h, g)
        if switching:
            old = [_status(states[i], v) for i, v in zip(active, prev_vac)]
            if _changed(states, active, old, vte, v_new) and h > policy.event_tol:
                lo, hi = 0.0, h
                for _ in range(policy.max_bisections):
                    if hi - lo <= policy.event_tol:
                        break
                    mid = 0.5 * (lo + hi)
                    vm, vtem = node(v_b, t + mid, mid, g)
                    if _changed(states, active, old, vtem, vm):
                        hi = mid
                    else:
                        lo = mid
                h = hi
                v_new, vte = node(v_b, t + h, h, g)

        residual = c_p * (v_new - v_b) / h + g_fix * v_new - sum(gi * (vi - v_new) for gi, vi in zip(g, vte))
        max_res = max(max_res, abs(residual))

        t = next_bp if abs(next_bp - (t + h)) <= t_end_tol else t + h
        v_b = v_new
        vac = [vi - v_new for vi in vte]
        if switching:
            for i, v in zip(active, vac):
                states[i], evs = device.step(states[i], v, h)
                events.extend(SimEvent(t, i, e) for e in evs)
        prev_vac = vac
        times.append(t)
        vbs.append(v_b)
        vte_rows.append(_row(n, active, vte, math.nan))
        vac_rows.append(_row(n, active, vac, 0.0))
        r_rows.append([1.0 / device.conductance(s) for s in states])

    return SimTrace(
        time=np.asarray(times),
        v_be=np.asarray(vbs),
        v_te=np.asarray(vte_rows),
        v_across=np.asarray(vac_rows),
        resistance=np.asarray(r_rows),
        events=events,
        cells=states,
        max_kcl_residual=max_res,
        c_p=c_p,
        r_fix=config.r_fix,
        floating=tuple(d is FLOATING for d in drives),
    )


def _row(n: int, active: list[int], values: list[float], fill: float) -> list[float]:
    row = [fill] * n
    for i, v in zip(active, values):
        row[i] = v
    return row


def _changed(states, active, old, vte, v_b) -> bool:
    for k, i in enumerate(active):
        if _status(states[i], vte[k] - v_b) != old[k]:
            return True
    return False
