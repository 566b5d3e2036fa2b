"""Worst-case DC voltage margins of a gate over resistance-band corners."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .device import HRS_MIN, LRS_MAX
from .gates import GateConfig, GateKind, execute_gate_functional, operand_combinations
from .solver import steady_state_node_voltage


@dataclass(frozen=True)
class Bands:
    """Resistance bands; the inner edges are always corners.

    ``lrs_min`` / ``hrs_max`` add the outer band limits as extra corners.
    """

    lrs_max: float = LRS_MAX
    hrs_min: float = HRS_MIN
    lrs_min: float | None = None
    hrs_max: float | None = None

    def corners(self, bit: int) -> tuple[float, ...]:
        if bit:
            return (self.lrs_max,) if self.lrs_min is None else (self.lrs_min, self.lrs_max)
        return (self.hrs_min,) if self.hrs_max is None else (self.hrs_min, self.hrs_max)


@dataclass
class CaseMargin:
    operands: tuple[int, int]
    switching: bool
    v_out_worst: float
    v_input_max: float


@dataclass
class MarginReport:
    kind: GateKind
    v_th: float
    cases: list[CaseMargin] = field(default_factory=list)

    @property
    def min_switching_margin(self) -> float:
        vals = [c.v_out_worst - self.v_th for c in self.cases if c.switching]
        return min(vals) if vals else float("inf")

    @property
    def max_nonswitching_margin(self) -> float:
        """``v_th`` minus the largest OUT voltage over non-switching cases."""
        vals = [c.v_out_worst for c in self.cases if not c.switching]
        return self.v_th - max(vals) if vals else float("inf")

    @property
    def input_margin(self) -> float:
        """``v_th`` minus the largest voltage seen by an HRS input (informational)."""
        vals = [c.v_input_max for c in self.cases]
        return self.v_th - max(vals) if vals else float("inf")

    @property
    def passed(self) -> bool:
        return self.min_switching_margin > 0 and self.max_nonswitching_margin > 0

    def to_dict(self) -> dict:
        return {
            "gate": self.kind.value,
            "v_th": self.v_th,
            "min_switching_margin": self.min_switching_margin,
            "max_nonswitching_margin": self.max_nonswitching_margin,
            "input_margin": self.input_margin,
            "passed": self.passed,
            "cases": [
                {"operands": list(c.operands), "switching": c.switching,
                 "v_out_worst": c.v_out_worst, "v_input_max": c.v_input_max}
                for c in self.cases
            ],
        }


def worst_case_margins(gate: GateConfig, bands: Bands = Bands(), v_th: float = 1.0) -> MarginReport:
    """DC margins at the pulse plateau with OUT in HRS before it switches.

    For IMPLY only ``out_old = 0`` cases are swept; with ``out_old = 1`` the
    output is already set and there is nothing to switch.
    """
    v1, v2, vo = gate.plateau
    report = MarginReport(gate.kind, v_th)
    for a, b in operand_combinations(gate.kind):
        if gate.kind is GateKind.IMPLY:
            if b == 1:
                continue
            bits = (a, None, 0)
            switching = bool(execute_gate_functional(gate.kind, a, None, 0))
        else:
            bits = (a, b, 0)
            switching = bool(execute_gate_functional(gate.kind, a, b, 0))
        volts = (v1, v2 if bits[1] is not None else None, vo)
        choices = [bands.corners(bit) if bit is not None else (1.0,) for bit in bits]
        worst = None
        v_in_max = 0.0
        for rs in itertools.product(*choices):
            v_b = steady_state_node_voltage(volts, [1.0 / r for r in rs], gate.r_fix)
            v_out = abs(vo - v_b)
            if worst is None or (v_out < worst if switching else v_out > worst):
                worst = v_out
            for idx in (0, 1):
                if volts[idx] is not None and bits[idx] == 0:
                    v_in_max = max(v_in_max, abs(volts[idx] - v_b))
        report.cases.append(CaseMargin((a, b), switching, worst, v_in_max))
    return report
