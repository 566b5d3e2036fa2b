"""A PCM crossbar executing stateful-logic micro-op programs.

Each row shares one bottom-electrode line with its own peripheral fixed
resistor, so a gate's operands must sit in a single row and one step may
run the same gate on the same columns of many rows at once.

Program text format, one micro-op per line, steps separated by ``---``::

    INIT 0,2 1,2
    ---
    GATE NIMP row=0 in1=0 in2=1 out=2
    GATE NIMP row=1 in1=0 in2=1 out=2

``in2=-`` marks an absent second input (IMPLY, and the unary NOR/OR forms).
``#`` starts a comment.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from . import device
from .device import CellState, DeviceParams, EventKind, Phase, VariabilitySpec
from .errors import InvalidStep, ProgramSyntaxError
from .gates import (
    GateKind,
    GateResult,
    GateSetup,
    execute_gate_circuit,
    execute_gate_functional,
    read_bit,
    write_verify,
)

Address = tuple[int, int]

MODES = ("functional", "circuit")


@dataclass(frozen=True)
class Init:
    addresses: tuple[Address, ...]

    def __post_init__(self):
        object.__setattr__(self, "addresses", tuple((int(r), int(c)) for r, c in self.addresses))
        if len(set(self.addresses)) != len(self.addresses):
            raise InvalidStep("duplicate address in INIT")


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    row: int
    in1: int
    in2: int | None
    out: int

    def __post_init__(self):
        if self.kind is GateKind.IMPLY and self.in2 is not None:
            raise InvalidStep("IMPLY takes no in2")
        if self.kind is GateKind.NIMP and self.in2 is None:
            raise InvalidStep("NIMP needs in2")
        cols = [c for c in (self.in1, self.in2, self.out) if c is not None]
        if len(set(cols)) != len(cols):
            raise InvalidStep(f"gate columns must be distinct: {cols}")

    @property
    def columns(self) -> tuple[int, int | None, int]:
        return (self.in1, self.in2, self.out)

    @property
    def cells(self) -> list[Address]:
        return [(self.row, c) for c in self.columns if c is not None]


MicroOp = Union[Init, Gate]


@dataclass(frozen=True)
class Step:
    ops: tuple[MicroOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    @property
    def gates(self) -> list[Gate]:
        return [op for op in self.ops if isinstance(op, Gate)]

    @property
    def inits(self) -> list[Init]:
        return [op for op in self.ops if isinstance(op, Init)]

    @property
    def is_computation(self) -> bool:
        return bool(self.gates)

    def validate(self) -> None:
        gates = self.gates
        if gates:
            kinds = {g.kind for g in gates}
            if len(kinds) > 1:
                raise InvalidStep(f"mixed gate kinds in one step: {sorted(k.value for k in kinds)}")
            triples = {g.columns for g in gates}
            if len(triples) > 1:
                raise InvalidStep("all gates in a step must use the same columns")
            rows = [g.row for g in gates]
            if len(set(rows)) != len(rows):
                raise InvalidStep("two gates in one step share a row")
        operand_cells = {a for g in gates for a in g.cells}
        init_cells = [a for op in self.inits for a in op.addresses]
        if len(set(init_cells)) != len(init_cells):
            raise InvalidStep("cell initialized twice in one step")
        clash = operand_cells.intersection(init_cells)
        if clash:
            raise InvalidStep(f"INIT targets gate operands in the same step: {sorted(clash)}")


@dataclass
class StepReport:
    index: int
    gate_ops: int
    init_ops: int
    events: list[tuple[int, int, float, EventKind]] = field(default_factory=list)

    @property
    def set_events(self) -> int:
        return sum(1 for e in self.events if e[3] is EventKind.SET)


@dataclass
class ProgramReport:
    steps: list[StepReport]
    logic_map: np.ndarray
    computation_steps: int
    init_ops: int
    max_switch_count: int
    total_set_events: int


@functools.lru_cache(maxsize=8192)
def _circuit_gate(kind: GateKind, in1: CellState, in2: CellState | None, out: CellState,
                  setup: GateSetup) -> GateResult:
    return execute_gate_circuit(kind, in1, in2, out, setup, allow_uninitialized=True)


def _rest_key(cell: CellState) -> CellState:
    return replace(cell, switch_count=0) if cell.switch_count else cell


class Crossbar:
    """``rows x cols`` grid of cells addressed ``(row, col)``, zero-based."""

    def __init__(self, cells: list[list[CellState]], setup: GateSetup = GateSetup()):
        if not cells or not cells[0]:
            raise ValueError("crossbar needs at least one row and one column")
        if any(len(r) != len(cells[0]) for r in cells):
            raise ValueError("ragged crossbar")
        self.cells = [list(r) for r in cells]
        self.setup = setup
        self.resistor_attached = [False] * len(cells)

    @classmethod
    def create(
        cls,
        rows: int,
        cols: int,
        params: DeviceParams = DeviceParams(),
        variability: VariabilitySpec | None = None,
        seed: int = 0,
        setup: GateSetup = GateSetup(),
    ) -> Crossbar:
        """All cells start amorphous; each is sampled from its own ``(seed, row, col)`` stream."""
        if rows < 1 or cols < 1:
            raise ValueError("rows and cols must be >= 1")
        var = variability or device.NO_VARIABILITY
        grid = [
            [device.amorphous(device.sample_device(params, var, [seed, r, c])) for c in range(cols)]
            for r in range(rows)
        ]
        return cls(grid, setup)

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0])

    def copy(self) -> Crossbar:
        other = Crossbar(self.cells, self.setup)
        other.resistor_attached = list(self.resistor_attached)
        return other

    def _check(self, addr: Address) -> None:
        r, c = addr
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"address {addr} outside {self.rows}x{self.cols} array")

    def write(self, addr: Address, bit: int) -> int:
        """Write-verify one cell; returns the number of program pulses used."""
        self._check(addr)
        r, c = addr
        self.cells[r][c], attempts = write_verify(self.cells[r][c], bit)
        return attempts

    def read(self, addr: Address) -> int:
        self._check(addr)
        r, c = addr
        return read_bit(self.cells[r][c])

    def logic_map(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.int8)
        for r, row in enumerate(self.cells):
            for c, cell in enumerate(row):
                out[r, c] = read_bit(cell)
        return out

    def resistance_map(self) -> np.ndarray:
        return np.array([[device.read_resistance(c) for c in row] for row in self.cells])

    def switch_counts(self) -> np.ndarray:
        return np.array([[c.switch_count for c in row] for row in self.cells])

    def write_logic_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.logic_map():
                w.writerow([int(v) for v in row])

    def write_resistance_json(self, path: str | Path) -> None:
        data = {"rows": self.rows, "cols": self.cols,
                "resistance_ohm": self.resistance_map().tolist(),
                "switch_count": self.switch_counts().tolist()}
        Path(path).write_text(json.dumps(data, indent=2) + "\n")

    def execute_step(self, step: Step, mode: str = "functional", index: int = 0) -> StepReport:
        """Apply one step; the array is only updated if every op succeeds."""
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        step.validate()
        for op in step.ops:
            for a in (op.addresses if isinstance(op, Init) else op.cells):
                self._check(a)
        staged = [list(r) for r in self.cells]
        report = StepReport(index, len(step.gates), sum(len(op.addresses) for op in step.inits))
        for op in step.inits:
            for r, c in op.addresses:
                staged[r][c], _ = write_verify(staged[r][c], 0)
        for g in step.gates:
            if mode == "functional":
                self._gate_functional(staged, g, report)
            else:
                self._gate_circuit(staged, g, report)
        self.cells = staged
        kind = step.gates[0].kind if step.gates else None
        for g in step.gates:
            self.resistor_attached[g.row] = kind in (GateKind.NOR, GateKind.IMPLY)
        return report

    @staticmethod
    def _gate_functional(staged, g: Gate, report: StepReport) -> None:
        row = staged[g.row]
        a = read_bit(row[g.in1])
        b = read_bit(row[g.in2]) if g.in2 is not None else None
        old = read_bit(row[g.out])
        if g.kind is GateKind.IMPLY:
            new = execute_gate_functional(g.kind, a, None, old)
        else:
            new = execute_gate_functional(g.kind, a, b, old)
        if new and not old:
            cell = row[g.out]
            row[g.out] = replace(cell, phase=Phase.CRYSTALLINE, switch_count=cell.switch_count + 1)
            report.events.append((g.row, g.out, math.nan, EventKind.SET))

    def _gate_circuit(self, staged, g: Gate, report: StepReport) -> None:
        row = staged[g.row]
        cols = [c for c in g.columns if c is not None]
        before = [row[c] for c in cols]
        keys = [_rest_key(c) for c in before]
        if g.in2 is None:
            res = _circuit_gate(g.kind, keys[0], None, keys[1], self.setup)
        else:
            res = _circuit_gate(g.kind, keys[0], keys[1], keys[2], self.setup)
        for col, old, new in zip(cols, before, res.cells):
            row[col] = replace(old, phase=new.phase, switch_count=old.switch_count + new.switch_count)
        for ev in res.events:
            report.events.append((g.row, cols[ev.cell], ev.time, ev.kind))

    def run_program(self, program: Iterable[Step], mode: str = "functional") -> ProgramReport:
        program = list(program)
        for s in program:
            s.validate()
        reports = [self.execute_step(s, mode, i) for i, s in enumerate(program)]
        counts = self.switch_counts()
        return ProgramReport(
            steps=reports,
            logic_map=self.logic_map(),
            computation_steps=sum(1 for s in program if s.is_computation),
            init_ops=sum(r.init_ops for r in reports),
            max_switch_count=int(counts.max()),
            total_set_events=sum(r.set_events for r in reports),
        )


_GATE_RE = re.compile(
    r"^GATE\s+(?P<kind>\w+)\s+row=(?P<row>\d+)\s+in1=(?P<in1>\d+)\s+in2=(?P<in2>\d+|-)\s+out=(?P<out>\d+)$",
    re.IGNORECASE,
)
_ADDR_RE = re.compile(r"^(\d+),(\d+)$")


def parse_program(text: str) -> list[Step]:
    steps: list[Step] = []
    ops: list[MicroOp] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "---":
            steps.append(Step(tuple(ops)))
            ops = []
            continue
        head = line.split()[0].upper()
        try:
            if head == "INIT":
                addrs = []
                for tok in line.split()[1:]:
                    m = _ADDR_RE.match(tok)
                    if not m:
                        raise ProgramSyntaxError(f"bad address {tok!r}", lineno)
                    addrs.append((int(m[1]), int(m[2])))
                if not addrs:
                    raise ProgramSyntaxError("INIT needs at least one address", lineno)
                ops.append(Init(tuple(addrs)))
            elif head == "GATE":
                m = _GATE_RE.match(" ".join(line.split()))
                if not m:
                    raise ProgramSyntaxError(f"malformed GATE: {line!r}", lineno)
                in2 = None if m["in2"] == "-" else int(m["in2"])
                ops.append(Gate(GateKind.parse(m["kind"]), int(m["row"]), int(m["in1"]), in2, int(m["out"])))
            else:
                raise ProgramSyntaxError(f"unknown micro-op {head!r}", lineno)
        except (InvalidStep, ValueError) as exc:
            if isinstance(exc, ProgramSyntaxError):
                raise
            raise ProgramSyntaxError(str(exc), lineno) from exc
    if ops:
        steps.append(Step(tuple(ops)))
    return steps


def format_program(program: Iterable[Step]) -> str:
    blocks = []
    for s in program:
        lines = []
        for op in s.ops:
            if isinstance(op, Init):
                lines.append("INIT " + " ".join(f"{r},{c}" for r, c in op.addresses))
            else:
                in2 = "-" if op.in2 is None else str(op.in2)
                lines.append(f"GATE {op.kind.value} row={op.row} in1={op.in1} in2={in2} out={op.out}")
        blocks.append("\n".join(lines))
    return "\n---\n".join(blocks) + "\n"
