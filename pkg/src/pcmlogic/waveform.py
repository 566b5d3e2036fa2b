"""Piecewise-linear voltage pulses."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence


@dataclass(frozen=True)
class PulseWaveform:
    """A piecewise-linear waveform that starts and ends at 0 V.

    ``segments`` is a sequence of ``(duration, end_voltage)`` pairs; each
    segment ramps linearly from the previous end voltage (0 V for the first)
    to its own end voltage. Outside ``[0, duration]`` the waveform is 0 V.
    """

    segments: tuple[tuple[float, float], ...]
    _knots_t: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _knots_v: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple((float(d), float(v)) for d, v in self.segments)
        if not segs:
            raise ValueError("waveform needs at least one segment")
        if any(d <= 0 for d, _ in segs):
            raise ValueError("segment durations must be positive")
        if segs[-1][1] != 0.0:
            raise ValueError("waveform must end at 0 V")
        ts, vs = [0.0], [0.0]
        for d, v in segs:
            ts.append(ts[-1] + d)
            vs.append(v)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_knots_t", tuple(ts))
        object.__setattr__(self, "_knots_v", tuple(vs))

    @classmethod
    def pulse(cls, rise: float, width: float, fall: float, amplitude: float) -> PulseWaveform:
        """Trapezoid from rise/width/fall times and plateau amplitude."""
        return cls(((rise, amplitude), (width, amplitude), (fall, 0.0)))

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]]) -> PulseWaveform:
        """Build from absolute ``(time, voltage)`` knots starting at ``(0, 0)``."""
        pts = list(points)
        if pts[0][0] != 0 or pts[0][1] != 0:
            raise ValueError("first point must be (0, 0)")
        segs = [(t1 - t0, v1) for (t0, _), (t1, v1) in zip(pts, pts[1:])]
        return cls(tuple(segs))

    @property
    def duration(self) -> float:
        return self._knots_t[-1]

    @property
    def amplitude(self) -> float:
        return max(self._knots_v, key=abs)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self._knots_t

    @property
    def final_fall(self) -> float:
        return self.segments[-1][0]

    def __call__(self, t: float) -> float:
        ts = self._knots_t
        if t <= 0.0 or t >= ts[-1]:
            return 0.0
        i = bisect_right(ts, t) - 1
        t0, t1 = ts[i], ts[i + 1]
        v0, v1 = self._knots_v[i], self._knots_v[i + 1]
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)

    def scaled(self, factor: float) -> PulseWaveform:
        return PulseWaveform(tuple((d, v * factor) for d, v in self.segments))

    def time_at_or_above(self, level: float) -> float:
        """Total time with ``|v(t)| >= level`` (exact for piecewise-linear)."""
        total = 0.0
        ts, vs = self._knots_t, self._knots_v
        for i in range(len(ts) - 1):
            a, b = abs(vs[i]), abs(vs[i + 1])
            d = ts[i + 1] - ts[i]
            if vs[i] * vs[i + 1] < 0:
                # sign change inside the segment: split at the zero crossing
                tz = d * a / (a + b)
                total += _ramp_time_above(a, 0.0, tz, level) + _ramp_time_above(0.0, b, d - tz, level)
            else:
                total += _ramp_time_above(a, b, d, level)
        return total


def _ramp_time_above(a: float, b: float, d: float, level: float) -> float:
    lo, hi = min(a, b), max(a, b)
    if lo >= level:
        return d
    if hi < level:
        return 0.0
    return d * (hi - level) / (hi - lo)

