"""Monte Carlo robustness of the circuit-level gates under device variability."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import device
from .device import DeviceParams, VariabilitySpec
from .errors import PCMError
from .gates import (
    GateKind,
    GateSetup,
    execute_gate_circuit,
    execute_gate_functional,
    input_stability,
    operand_combinations,
    write_verify,
)

CELL_NAMES = ("in1", "in2", "out")


@dataclass
class Failure:
    iteration: int
    combination: tuple[int, int]
    seeds: list[list[int]]
    reason: str


@dataclass
class RobustnessReport:
    kind: GateKind
    iterations: int
    seed: int
    stability_tolerance: float
    successes: dict[tuple[int, int], int] = field(default_factory=dict)
    scatter: list[tuple[int, str, str, float]] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)

    @property
    def trials(self) -> int:
        return self.iterations * len(self.successes)

    @property
    def success_rate(self) -> float:
        return sum(self.successes.values()) / self.trials if self.trials else 0.0

    def quartiles(self) -> dict[str, dict[str, list[float]]]:
        """Post-operation resistance quartiles per combination and cell."""
        out: dict[str, dict[str, list[float]]] = {}
        groups: dict[tuple[str, str], list[float]] = {}
        for _, cell, combo, r in self.scatter:
            groups.setdefault((combo, cell), []).append(r)
        for (combo, cell), values in sorted(groups.items()):
            q = np.percentile(values, [0, 25, 50, 75, 100])
            out.setdefault(combo, {})[cell] = [float(x) for x in q]
        return out

    def to_dict(self) -> dict:
        return {
            "gate": self.kind.value,
            "iterations": self.iterations,
            "seed": self.seed,
            "stability_tolerance": self.stability_tolerance,
            "success_rate": self.success_rate,
            "successes": {_combo_key(c): n for c, n in self.successes.items()},
            "resistance_quartiles_ohm": self.quartiles(),
            "failures": [
                {"iteration": f.iteration, "combination": _combo_key(f.combination),
                 "seeds": f.seeds, "reason": f.reason}
                for f in self.failures
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_scatter_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "cell", "combination", "resistance_ohm"])
            for it, cell, combo, r in self.scatter:
                w.writerow([it, cell, combo, format(r, ".12g")])


def _combo_key(combo: tuple[int, int]) -> str:
    return f"{combo[0]}{combo[1]}"


def trial_seed(seed: int, iteration: int, combo_index: int, cell: int) -> list[int]:
    """Seed of one sampled device, independent of execution order."""
    return [seed, iteration, combo_index, cell]


def run_trial(
    kind: GateKind,
    combination: tuple[int, int],
    params: list[DeviceParams],
    setup: GateSetup,
    tolerance: float,
) -> tuple[bool, str, list[float]]:
    """One write-verify + gate + check; returns (ok, reason, post resistances)."""
    a, b = combination
    in1, _ = write_verify(device.amorphous(params[0]), a)
    if kind is GateKind.IMPLY:
        out, _ = write_verify(device.amorphous(params[2]), b)
        result = execute_gate_circuit(kind, in1, None, out, setup)
        expected = execute_gate_functional(kind, a, None, b)
        r_post = [result.r_post[0], float("nan"), result.r_post[1]]
    else:
        in2, _ = write_verify(device.amorphous(params[1]), b)
        out, _ = write_verify(device.amorphous(params[2]), 0)
        result = execute_gate_circuit(kind, in1, in2, out, setup)
        expected = execute_gate_functional(kind, a, b, 0)
        r_post = [float(x) for x in result.r_post]
    if result.output != expected:
        return False, f"output {result.output}, expected {expected}", r_post
    if not input_stability(result, tolerance):
        return False, f"input unstable (drift {result.drift:.3g})", r_post
    return True, "", r_post


def monte_carlo(
    kind: GateKind | str,
    iterations: int,
    variability: VariabilitySpec,
    seed: int = 0,
    nominal: DeviceParams = DeviceParams(),
    setup: GateSetup = GateSetup(),
    tolerance: float = 0.05,
) -> RobustnessReport:
    """Sample, program, run and check every operand combination ``iterations`` times."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    kind = GateKind.parse(kind) if isinstance(kind, str) else kind
    combos = operand_combinations(kind)
    report = RobustnessReport(kind, iterations, seed, tolerance, successes={c: 0 for c in combos})
    for it in range(iterations):
        for ci, combo in enumerate(combos):
            seeds = [trial_seed(seed, it, ci, j) for j in range(3)]
            try:
                params = [device.sample_device(nominal, variability, s) for s in seeds]
                ok, reason, r_post = run_trial(kind, combo, params, setup, tolerance)
            except PCMError as exc:
                ok, reason, r_post = False, f"{type(exc).__name__}: {exc}", []
            if ok:
                report.successes[combo] += 1
            else:
                report.failures.append(Failure(it, combo, seeds, reason))
            for name, r in zip(CELL_NAMES, r_post):
                if np.isfinite(r):
                    report.scatter.append((it, name, _combo_key(combo), r))
    return report
