"""Behavioral model of a confined phase-change memory cell.

The cell is a small state machine driven by the voltage across it:

* an amorphous cell whose voltage stays at or above ``v_th`` for ``t_delay``
  threshold-switches into a dynamic ON state with resistance ``r_on``;
* while ON and held at or above ``v_hold`` it accumulates crystallization
  time, and after ``t_cryst`` it becomes crystalline (a set event);
* dropping below ``v_hold`` before that aborts the set and the cell
  returns to its amorphous, high-resistance state;
* a reset pulse melts the cell if the cell voltage reaches ``v_reset`` for
  ``t_melt``, and the final fall time decides between quench (amorphous) and
  slow recrystallization.

All operations are pure: they take a :class:`CellState` and return a new one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, ResolutionTooCoarse, SamplingFailed
from .waveform import PulseWaveform

#: Read bands: at or below LRS_MAX is logic 1, at or above HRS_MIN is logic 0.
LRS_MAX = 10e3
HRS_MIN = 100e3

READ_VOLTAGE = 0.2
READ_TIME = 1e-6

ENDURANCE_WARNING_CYCLES = 10_000

_EPS = 1e-12


class EnduranceWarning(UserWarning):
    pass


class Phase(str, enum.Enum):
    CRYSTALLINE = "crystalline"
    AMORPHOUS = "amorphous"


class EventKind(str, enum.Enum):
    THRESHOLD = "threshold"
    SET = "set"


@dataclass(frozen=True)
class DeviceParams:
    """Physical parameters of one cell (volts, ohms, seconds)."""

    v_th: float = 1.0
    r_lrs: float = 5e3
    r_hrs: float = 1e6
    r_on: float = 3e3
    v_hold: float = 0.25
    t_delay: float = 100e-9
    t_cryst: float = 400e-9
    v_reset: float = 2.5
    t_melt: float = 20e-9
    t_quench_max: float = 100e-9
    v_read_max: float = 0.2

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigError("invalid DeviceParams: " + "; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not (0 < self.r_on < self.r_lrs < self.r_hrs):
            out.append("need 0 < r_on < r_lrs < r_hrs")
        if not (0 < self.v_hold < self.v_th < self.v_reset):
            out.append("need 0 < v_hold < v_th < v_reset")
        if not (0 <= self.v_read_max < self.v_hold):
            out.append("need v_read_max < v_hold")
        for name in ("t_delay", "t_cryst", "t_melt", "t_quench_max"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> DeviceParams:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown device parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class CellState:
    """State of one cell.

    ``t_above`` is the time the cell has continuously spent at or above
    ``v_th`` while amorphous; it is what ``t_delay`` is compared against.
    """

    params: DeviceParams = DeviceParams()
    phase: Phase = Phase.AMORPHOUS
    dynamic_on: bool = False
    cryst_progress: float = 0.0
    switch_count: int = 0
    t_above: float = 0.0

    def __post_init__(self):
        if self.dynamic_on and self.phase is not Phase.AMORPHOUS:
            raise ValueError("only an amorphous cell can be in the ON state")
        if self.phase is Phase.CRYSTALLINE and self.cryst_progress != 0.0:
            raise ValueError("crystalline cell cannot carry crystallization progress")

    @property
    def at_rest(self) -> bool:
        return not self.dynamic_on and self.cryst_progress == 0.0 and self.t_above == 0.0


def crystalline(params: DeviceParams = DeviceParams(), switch_count: int = 0) -> CellState:
    return CellState(params=params, phase=Phase.CRYSTALLINE, switch_count=switch_count)


def amorphous(params: DeviceParams = DeviceParams(), switch_count: int = 0) -> CellState:
    return CellState(params=params, phase=Phase.AMORPHOUS, switch_count=switch_count)


def conductance(state: CellState) -> float:
    """Instantaneous conductance in siemens."""
    p = state.params
    if state.dynamic_on:
        return 1.0 / p.r_on
    if state.phase is Phase.CRYSTALLINE:
        return 1.0 / p.r_lrs
    return 1.0 / p.r_hrs


def step(state: CellState, v_across: float, dt: float) -> tuple[CellState, tuple[EventKind, ...]]:
    """Advance the cell by ``dt`` seconds with ``v_across`` held across it."""
    p = state.params
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > p.t_delay / 4 * (1 + 1e-9):
        raise ResolutionTooCoarse(f"dt={dt:g}s exceeds t_delay/4={p.t_delay / 4:g}s")
    if state.phase is Phase.CRYSTALLINE:
        # sub-melt voltages leave a crystalline cell alone
        return state, ()

    v = abs(v_across)
    events: list[EventKind] = []
    on, progress, t_above = state.dynamic_on, state.cryst_progress, state.t_above
    spare = 0.0
    if not on:
        if v >= p.v_th:
            t_above += dt
            if t_above >= p.t_delay * (1 - _EPS):
                on = True
                spare = max(t_above - p.t_delay, 0.0)
                t_above = 0.0
                events.append(EventKind.THRESHOLD)
        elif t_above == 0.0:
            return state, ()
        else:
            t_above = 0.0
        if not on:
            return replace(state, t_above=t_above), ()
        dt = spare

    if v >= p.v_hold:
        progress += dt
        if progress >= p.t_cryst * (1 - _EPS):
            events.append(EventKind.SET)
            return replace(
                state,
                phase=Phase.CRYSTALLINE,
                dynamic_on=False,
                cryst_progress=0.0,
                t_above=0.0,
                switch_count=state.switch_count + 1,
            ), tuple(events)
        return replace(state, dynamic_on=True, cryst_progress=progress, t_above=0.0), tuple(events)

    # ON state collapsed before crystallization finished: back to HRS
    return replace(state, dynamic_on=False, cryst_progress=0.0, t_above=0.0), tuple(events)


def time_to_next_event(state: CellState) -> float:
    """Time until the next threshold/set transition if the drive holds."""
    p = state.params
    if state.phase is Phase.CRYSTALLINE:
        return math.inf
    if state.dynamic_on:
        return max(p.t_cryst - state.cryst_progress, 0.0)
    if state.t_above > 0.0:
        return max(p.t_delay - state.t_above, 0.0)
    return math.inf


@dataclass
class DriveResult:
    state: CellState
    events: list[tuple[float, EventKind]]
    time: np.ndarray | None = None
    v_cell: np.ndarray | None = None
    current: np.ndarray | None = None
    resistance: np.ndarray | None = None


def drive_cell(
    state: CellState,
    waveform: PulseWaveform,
    series_resistance: float = 0.0,
    dt: float | None = None,
    record: bool = False,
) -> DriveResult:
    """Apply a source waveform to a single cell through an optional series resistor."""
    p = state.params
    dt = p.t_delay / 4 if dt is None else dt
    t = 0.0
    events: list[tuple[float, EventKind]] = []
    rec: list[tuple[float, float, float, float]] = []
    if record:
        rec.append((0.0, 0.0, 0.0, 1.0 / conductance(state)))
    for t_end in waveform.breakpoints[1:]:
        while t < t_end * (1 - 1e-12):
            h = min(dt, t_end - t)
            t = t_end if h == t_end - t else t + h
            r_cell = 1.0 / conductance(state)
            v = waveform(t) * r_cell / (r_cell + series_resistance)
            state, evs = step(state, v, h)
            events.extend((t, e) for e in evs)
            if record:
                rec.append((t, v, v / r_cell, 1.0 / conductance(state)))
        t = t_end
    result = DriveResult(state, events)
    if record:
        arr = np.asarray(rec)
        result.time, result.v_cell, result.current, result.resistance = arr.T.copy()
    return result


def apply_reset_pulse(state: CellState, waveform: PulseWaveform) -> CellState:
    """Apply ``waveform`` (cell voltage) as a reset attempt.

    A pulse that does not melt the cell is run through the ordinary
    switching state machine instead, so a sub-melt pulse above ``v_th`` can
    still set an amorphous cell.
    """
    p = state.params
    if waveform.time_at_or_above(p.v_reset * (1 - _EPS)) >= p.t_melt * (1 - _EPS):
        phase = Phase.AMORPHOUS if waveform.final_fall <= p.t_quench_max else Phase.CRYSTALLINE
        return replace(state, phase=phase, dynamic_on=False, cryst_progress=0.0, t_above=0.0)
    return drive_cell(state, waveform).state


def read_resistance(state: CellState) -> float:
    """Resistance seen by a low-voltage read; the state is not modified."""
    p = state.params
    return p.r_lrs if state.phase is Phase.CRYSTALLINE else p.r_hrs


def logic_value(resistance: float, lrs_max: float = LRS_MAX, hrs_min: float = HRS_MIN) -> int | None:
    """Map a read resistance to 1 (LRS), 0 (HRS) or ``None`` (between bands)."""
    if resistance <= 0:
        raise ValueError("resistance must be positive")
    if resistance >= hrs_min:
        return 0
    if resistance <= lrs_max:
        return 1
    return None


def endurance_exceeded(state: CellState, limit: int = ENDURANCE_WARNING_CYCLES) -> bool:
    return state.switch_count >= limit


@dataclass(frozen=True)
class VariabilitySpec:
    """Device-to-device spread; sigmas are relative (0.05 means 5 %).

    Resistances are lognormal with the nominal value as mean; ``v_th`` is
    normal. With ``truncate_to_bands`` samples outside the read bands are
    redrawn.
    """

    sigma_v_th: float = 0.0
    sigma_r_lrs: float = 0.0
    sigma_r_hrs: float = 0.0
    truncate_to_bands: bool = True
    lrs_max: float = LRS_MAX
    hrs_min: float = HRS_MIN
    max_retries: int = 1000

    def __post_init__(self):
        for name in ("sigma_v_th", "sigma_r_lrs", "sigma_r_hrs"):
            s = getattr(self, name)
            if not 0.0 <= s <= 0.5:
                raise ConfigError(f"{name}={s} outside [0, 0.5]")

    @property
    def is_zero(self) -> bool:
        return self.sigma_v_th == 0 and self.sigma_r_lrs == 0 and self.sigma_r_hrs == 0

    @classmethod
    def from_dict(cls, data: dict) -> VariabilitySpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown variability fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


NO_VARIABILITY = VariabilitySpec()
DEFAULT_VARIABILITY = VariabilitySpec(sigma_v_th=0.05, sigma_r_lrs=0.2, sigma_r_hrs=0.2)


def _lognormal(rng: np.random.Generator, mean: float, rel_sigma: float) -> float:
    if rel_sigma == 0:
        return mean
    s2 = math.log1p(rel_sigma**2)
    return float(rng.lognormal(math.log(mean) - s2 / 2, math.sqrt(s2)))


def sample_device(
    nominal: DeviceParams,
    variability: VariabilitySpec,
    seed: int | Sequence[int],
) -> DeviceParams:
    """Draw one device; deterministic for a given ``seed``."""
    if variability.is_zero:
        return nominal
    rng = np.random.default_rng(seed)
    for _ in range(variability.max_retries):
        v_th = nominal.v_th
        if variability.sigma_v_th:
            v_th = float(rng.normal(nominal.v_th, nominal.v_th * variability.sigma_v_th))
        r_lrs = _lognormal(rng, nominal.r_lrs, variability.sigma_r_lrs)
        r_hrs = _lognormal(rng, nominal.r_hrs, variability.sigma_r_hrs)
        if variability.truncate_to_bands and (r_lrs > variability.lrs_max or r_hrs < variability.hrs_min):
            continue
        candidate = dict(nominal.to_dict(), v_th=v_th, r_lrs=r_lrs, r_hrs=r_hrs)
        if not (0 < candidate["r_on"] < r_lrs < r_hrs and nominal.v_hold < v_th < nominal.v_reset):
            continue
        return DeviceParams(**candidate)
    raise SamplingFailed(f"no valid device after {variability.max_retries} draws")
