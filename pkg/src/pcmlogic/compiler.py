"""Compile Boolean netlists to crossbar programs over {NOR, IMPLY, OR, NIMP}.

Netlist text::

    # 1-bit half adder
    inputs a b
    s = XOR(a, b)
    c = AND(a, b)
    out s c

Statements end at ``;`` or a newline. Operators (case-insensitive): AND, OR,
NOT, NOR, NAND, XOR, NIMP, IMPLY; NOT takes one argument, the rest two.

Pipeline: ``parse_netlist`` -> ``lower`` (native op list) -> ``allocate``
(one crossbar row, liveness-based cell reuse) -> ``schedule_rows`` (the
same program on many rows) -> ``verify_exhaustive``.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crossbar import Crossbar, Gate, Init, Step, format_program
from .device import DeviceParams
from .errors import (
    CyclicDefinition,
    DuplicateName,
    NetlistSyntaxError,
    RowOverflow,
    ShapeMismatch,
    UndefinedSignal,
)
from .gates import GateKind, GateSetup

OPERATORS = {"AND": 2, "OR": 2, "NOT": 1, "NOR": 2, "NAND": 2, "XOR": 2, "NIMP": 2, "IMPLY": 2}
KEYWORDS = {"inputs", "out", "outputs"}
EXHAUSTIVE_LIMIT = 16
SAMPLED_VECTORS = 4096
SAMPLE_SEED = 2024


@dataclass(frozen=True)
class Assignment:
    name: str
    op: str
    args: tuple[str, ...]
    line: int = 0


@dataclass
class Netlist:
    inputs: list[str]
    assignments: list[Assignment]
    outputs: list[str]

    def evaluate(self, bits) -> list[int]:
        """Reference Boolean evaluation; ``bits`` follow ``inputs`` order."""
        env = dict(zip(self.inputs, (int(b) for b in bits)))
        for a in self.assignments:
            env[a.name] = _eval_op(a.op, [env[x] for x in a.args])
        return [env[o] for o in self.outputs]

    def to_text(self) -> str:
        lines = ["inputs " + " ".join(self.inputs)]
        lines += [f"{a.name} = {a.op}({', '.join(a.args)})" for a in self.assignments]
        lines.append("out " + " ".join(self.outputs))
        return "\n".join(lines) + "\n"


def _eval_op(op: str, v: list[int]) -> int:
    if op == "NOT":
        return 1 - v[0]
    a, b = v
    return {
        "AND": a & b, "OR": a | b, "NOR": 1 - (a | b), "NAND": 1 - (a & b),
        "XOR": a ^ b, "NIMP": a & (1 - b), "IMPLY": (1 - a) | b,
    }[op]


_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[=(),])|(?P<bad>\S))")


def _tokens(stmt: str, line: int, col0: int):
    pos = 0
    while pos < len(stmt):
        m = _TOKEN.match(stmt, pos)
        if not m or m.end() == pos:
            break
        pos = m.end()
        kind = m.lastgroup
        start = m.start(kind) + col0 + 1
        if kind == "bad":
            raise NetlistSyntaxError(f"unexpected character {m[kind]!r}", line, start)
        yield kind, m[kind], start


def _statements(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        col = 0
        for part in line.split(";"):
            if part.strip():
                yield lineno, col, part
            col += len(part) + 1


def parse_netlist(text: str) -> Netlist:
    inputs: list[str] = []
    outputs: list[tuple[str, int, int]] = []
    assigns: list[tuple[Assignment, list[tuple[str, int]]]] = []
    defined: dict[str, int] = {}

    def declare(name, line, col):
        if name.lower() in KEYWORDS:
            raise NetlistSyntaxError(f"{name!r} is a keyword", line, col)
        if name in defined:
            raise DuplicateName(f"{name!r} already defined on line {defined[name]}", line, col)
        defined[name] = line

    for line, col0, stmt in _statements(text):
        toks = list(_tokens(stmt, line, col0))
        head_kind, head, head_col = toks[0]
        if head_kind == "name" and head.lower() == "inputs" and (len(toks) == 1 or toks[1][1] != "="):
            for kind, val, col in toks[1:]:
                if kind != "name":
                    raise NetlistSyntaxError(f"expected a signal name, got {val!r}", line, col)
                declare(val, line, col)
                inputs.append(val)
            continue
        if head_kind == "name" and head.lower() in ("out", "outputs") and (len(toks) == 1 or toks[1][1] != "="):
            if len(toks) == 1:
                raise NetlistSyntaxError("out needs at least one signal", line, head_col)
            for kind, val, col in toks[1:]:
                if kind != "name":
                    raise NetlistSyntaxError(f"expected a signal name, got {val!r}", line, col)
                outputs.append((val, line, col))
            continue
        # name = OP ( args )
        if head_kind != "name":
            raise NetlistSyntaxError(f"expected a statement, got {head!r}", line, head_col)
        if len(toks) < 4 or toks[1][1] != "=" or toks[2][0] != "name" or toks[3][1] != "(":
            raise NetlistSyntaxError("expected 'name = OP(args)'", line, head_col)
        op = toks[2][1].upper()
        if op not in OPERATORS:
            raise NetlistSyntaxError(f"unknown operator {toks[2][1]!r}", line, toks[2][2])
        args: list[tuple[str, int]] = []
        i = 4
        expect_name = True
        while i < len(toks) and toks[i][1] != ")":
            kind, val, col = toks[i]
            if expect_name and kind == "name":
                args.append((val, col))
            elif not expect_name and val == ",":
                pass
            else:
                raise NetlistSyntaxError(f"unexpected {val!r} in argument list", line, col)
            expect_name = not expect_name
            i += 1
        if i >= len(toks):
            raise NetlistSyntaxError("missing ')'", line, toks[-1][2])
        if expect_name and args:
            raise NetlistSyntaxError("trailing ',' in argument list", line, toks[i][2])
        if i != len(toks) - 1:
            raise NetlistSyntaxError(f"unexpected {toks[i + 1][1]!r} after ')'", line, toks[i + 1][2])
        if len(args) != OPERATORS[op]:
            raise NetlistSyntaxError(f"{op} takes {OPERATORS[op]} argument(s), got {len(args)}", line, toks[2][2])
        declare(head, line, head_col)
        assigns.append((Assignment(head, op, tuple(a for a, _ in args), line), args))

    if not outputs:
        raise NetlistSyntaxError("netlist declares no outputs", None, None)
    _check_references(inputs, assigns, outputs)
    return Netlist(inputs, [a for a, _ in assigns], [o for o, _, _ in outputs])


def _check_references(inputs, assigns, outputs) -> None:
    index = {a.name: i for i, (a, _) in enumerate(assigns)}
    deps = {a.name: set(a.args) for a, _ in assigns}

    def reaches(src: str, target: str) -> bool:
        seen, stack = set(), [src]
        while stack:
            n = stack.pop()
            if n == target:
                return True
            if n in seen:
                continue
            seen.add(n)
            stack.extend(deps.get(n, ()))
        return False

    known = set(inputs)
    for i, (a, args) in enumerate(assigns):
        for name, col in args:
            if name in known:
                continue
            if name not in index:
                raise UndefinedSignal(f"undefined signal {name!r}", a.line, col)
            if name == a.name or reaches(name, a.name):
                raise CyclicDefinition(f"{a.name!r} depends on itself through {name!r}", a.line, col)
            raise UndefinedSignal(f"{name!r} used before its definition", a.line, col)
        known.add(a.name)
    for name, line, col in outputs:
        if name not in known:
            raise UndefinedSignal(f"undefined output {name!r}", line, col)


@dataclass(frozen=True)
class NativeOp:
    """One native gate writing signal ``out``.

    ``fresh`` ops need an Init of a new cell first; the others accumulate
    into ``out``'s current cell. ``reuse`` names a dead signal whose cell
    ``out`` takes over in place (destructive IMPLY). ``kind=None`` is an
    Init-only constant 0.
    """

    kind: GateKind | None
    in1: str | None
    in2: str | None
    out: str
    fresh: bool = True
    reuse: str | None = None


@dataclass
class NativeDag:
    inputs: list[str]
    outputs: list[str]
    ops: list[NativeOp]

    @property
    def computation_steps(self) -> int:
        return sum(1 for op in self.ops if op.kind is not None)


def _last_use(netlist: Netlist) -> dict[str, int]:
    last = {}
    for i, a in enumerate(netlist.assignments):
        for x in a.args:
            last[x] = i
    for o in netlist.outputs:
        last[o] = len(netlist.assignments)
    return last


def _live_assignments(netlist: Netlist) -> list[Assignment]:
    needed = set(netlist.outputs)
    kept = []
    for a in reversed(netlist.assignments):
        if a.name in needed:
            kept.append(a)
            needed.update(a.args)
    return kept[::-1]


def lower(netlist: Netlist) -> NativeDag:
    """Rewrite every operator to native gates, dropping unused assignments."""
    body = _live_assignments(netlist)
    live = Netlist(netlist.inputs, body, netlist.outputs)
    last = _last_use(live)
    ops: list[NativeOp] = []
    tmp = itertools.count()

    def temp(base: str) -> str:
        return f"{base}~{next(tmp)}"

    for i, a in enumerate(body):
        x = a.name

        def dead(s: str) -> bool:
            return last.get(s, -1) <= i

        if a.op == "NOT":
            ops.append(NativeOp(GateKind.NOR, a.args[0], None, x))
            continue
        p, q = a.args
        if p == q:
            ops.extend(_lower_same(a.op, p, x))
            continue
        if a.op in ("OR", "NOR", "NIMP"):
            ops.append(NativeOp(GateKind(a.op), p, q, x))
        elif a.op == "AND":
            np_, nq = temp(x), temp(x)
            ops += [NativeOp(GateKind.NOR, p, None, np_), NativeOp(GateKind.NOR, q, None, nq),
                    NativeOp(GateKind.NOR, np_, nq, x)]
        elif a.op == "NAND":
            ops += [NativeOp(GateKind.NOR, p, None, x), NativeOp(GateKind.NOR, q, None, x, fresh=False)]
        elif a.op == "XOR":
            # The second NIMP disturbs its IN1 when OUT is already set, so that
            # operand must be dead; otherwise combine two fresh NIMPs with OR.
            if dead(q):
                ops += [NativeOp(GateKind.NIMP, p, q, x), NativeOp(GateKind.NIMP, q, p, x, fresh=False)]
            elif dead(p):
                ops += [NativeOp(GateKind.NIMP, q, p, x), NativeOp(GateKind.NIMP, p, q, x, fresh=False)]
            else:
                t1, t2 = temp(x), temp(x)
                ops += [NativeOp(GateKind.NIMP, p, q, t1), NativeOp(GateKind.NIMP, q, p, t2),
                        NativeOp(GateKind.OR, t1, t2, x)]
        elif a.op == "IMPLY":
            if dead(q):
                ops.append(NativeOp(GateKind.IMPLY, p, None, x, fresh=False, reuse=q))
            else:
                ops += [NativeOp(GateKind.OR, q, None, x), NativeOp(GateKind.IMPLY, p, None, x, fresh=False)]
    return NativeDag(list(netlist.inputs), list(netlist.outputs), ops)


def _lower_same(op: str, a: str, x: str) -> list[NativeOp]:
    """Operators whose two arguments are the same signal."""
    if op in ("AND", "OR"):
        return [NativeOp(GateKind.OR, a, None, x)]
    if op in ("NOR", "NAND"):
        return [NativeOp(GateKind.NOR, a, None, x)]
    if op in ("XOR", "NIMP"):
        return [NativeOp(None, None, None, x)]
    # IMPLY(a, a) = 1: copy a, then accumulate NOT a
    return [NativeOp(GateKind.OR, a, None, x), NativeOp(GateKind.NOR, a, None, x, fresh=False)]


@dataclass
class CompiledProgram:
    steps: list[Step]
    allocation: dict[str, int]
    inputs: list[str]
    outputs: list[str]
    row_width: int
    cells_used: int
    row: int = 0
    netlist_text: str = ""

    @property
    def computation_steps(self) -> int:
        return sum(1 for s in self.steps if s.is_computation)

    @property
    def init_ops(self) -> int:
        return sum(len(op.addresses) for s in self.steps for op in s.inits)

    @property
    def input_columns(self) -> list[int]:
        return [self.allocation[n] for n in self.inputs]

    @property
    def output_columns(self) -> list[int]:
        return [self.allocation[n] for n in self.outputs]

    def on_row(self, row: int) -> CompiledProgram:
        return CompiledProgram(
            [_move_step(s, row) for s in self.steps], dict(self.allocation), list(self.inputs),
            list(self.outputs), self.row_width, self.cells_used, row, self.netlist_text)

    def text(self) -> str:
        return format_program(self.steps)

    def stats(self) -> dict:
        kinds: dict[str, int] = {}
        writes: dict[int, int] = {}
        for s in self.steps:
            for g in s.gates:
                kinds[g.kind.value] = kinds.get(g.kind.value, 0) + 1
                writes[g.out] = writes.get(g.out, 0) + 1
        return {
            "computation_steps": self.computation_steps,
            "init_ops": self.init_ops,
            "cells_used": self.cells_used,
            "row_width": self.row_width,
            "gates_by_kind": dict(sorted(kinds.items())),
            "gate_writes_per_column": {str(c): n for c, n in sorted(writes.items())},
        }

    def allocation_dict(self) -> dict:
        return {
            "row": self.row,
            "row_width": self.row_width,
            "inputs": {n: self.allocation[n] for n in self.inputs},
            "outputs": {n: self.allocation[n] for n in self.outputs},
            "signals": dict(sorted(self.allocation.items())),
            "netlist": self.netlist_text,
        }

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        (out / "program.txt").write_text(self.text())
        (out / "allocation.json").write_text(json.dumps(self.allocation_dict(), indent=2) + "\n")

    @classmethod
    def from_files(cls, program_text: str, allocation: dict) -> CompiledProgram:
        from .crossbar import parse_program
        steps = parse_program(program_text)
        row_width = int(allocation["row_width"])
        cells = {c for s in steps for op in s.ops
                 for c in ([a[1] for a in op.addresses] if isinstance(op, Init) else
                           [x for x in op.columns if x is not None])}
        cells.update(allocation["inputs"].values())
        return cls(steps, dict(allocation["signals"]), list(allocation["inputs"]),
                   list(allocation["outputs"]), row_width, len(cells), int(allocation.get("row", 0)),
                   allocation.get("netlist", ""))


def _move_step(step: Step, row: int) -> Step:
    ops = []
    for op in step.ops:
        if isinstance(op, Init):
            ops.append(Init(tuple((row, c) for _, c in op.addresses)))
        else:
            ops.append(Gate(op.kind, row, op.in1, op.in2, op.out))
    return Step(tuple(ops))


def _place(dag: NativeDag, row_width: int | None) -> tuple[list[Step], dict[str, int], int]:
    last: dict[str, int] = {}
    for i, op in enumerate(dag.ops):
        for s in (op.in1, op.in2, op.reuse):
            if s is not None:
                last[s] = i
        last.setdefault(op.out, i)
        last[op.out] = max(last[op.out], i)
    end = len(dag.ops)
    for o in dag.outputs:
        last[o] = end

    where: dict[str, int] = {}
    allocation: dict[str, int] = {}
    free: list[int] = []
    next_col = 0
    peak = 0

    def take() -> int:
        nonlocal next_col
        if free:
            free.sort()
            return free.pop(0)
        next_col += 1
        return next_col - 1

    for name in dag.inputs:
        where[name] = allocation[name] = take()
    steps: list[Step] = []
    for i, op in enumerate(dag.ops):
        if op.reuse is not None:
            where[op.out] = where.pop(op.reuse)
        elif op.fresh:
            where[op.out] = take()
            steps.append(Step((Init(((0, where[op.out]),)),)))
        allocation[op.out] = where[op.out]
        peak = max(peak, next_col)
        if row_width is not None and next_col > row_width:
            raise RowOverflow(_peak(dag), row_width)
        if op.kind is not None:
            col = lambda s: where[s] if s is not None else None
            steps.append(Step((Gate(op.kind, 0, col(op.in1), col(op.in2), col(op.out)),)))
        # release dead cells, ties broken by signal name
        for name in sorted(n for n in list(where) if last.get(n, -1) <= i):
            free.append(where.pop(name))
    peak = max(peak, next_col)
    if row_width is not None and peak > row_width:
        raise RowOverflow(peak, row_width)
    return steps, allocation, peak


def _peak(dag: NativeDag) -> int:
    return _place(dag, None)[2]


def allocate(dag: NativeDag, row_width: int, netlist_text: str = "") -> CompiledProgram:
    """Greedy in-order allocation into one row; freed cells are re-Init'd before reuse."""
    if row_width < 1:
        raise ValueError("row_width must be >= 1")
    steps, allocation, peak = _place(dag, row_width)
    return CompiledProgram(steps, allocation, list(dag.inputs), list(dag.outputs), row_width, peak,
                           netlist_text=netlist_text)


def compile_netlist(netlist: Netlist | str, row_width: int) -> CompiledProgram:
    if isinstance(netlist, str):
        netlist = parse_netlist(netlist)
    return allocate(lower(netlist), row_width, netlist.to_text())


def _shape(step: Step):
    return tuple(
        ("INIT", tuple(c for _, c in op.addresses)) if isinstance(op, Init) else ("GATE", op.kind, op.columns)
        for op in step.ops
    )


def schedule_rows(programs: list[CompiledProgram], rows: list[int] | None = None) -> list[Step]:
    """Merge same-shape single-row programs, program ``i`` on ``rows[i]`` (default row ``i``)."""
    if not programs:
        return []
    rows = list(range(len(programs))) if rows is None else list(rows)
    if len(rows) != len(programs) or len(set(rows)) != len(rows):
        raise ValueError("need one distinct row per program")
    ref = programs[0]
    for p in programs[1:]:
        if len(p.steps) != len(ref.steps) or any(_shape(a) != _shape(b) for a, b in zip(p.steps, ref.steps)):
            raise ShapeMismatch("programs differ in step or column structure")
    merged = []
    for k, step in enumerate(ref.steps):
        inits = [a for r in rows for op in _move_step(step, r).inits for a in op.addresses]
        gates = [g for r in rows for g in _move_step(step, r).gates]
        ops: list = [Init(tuple(inits))] if inits else []
        merged.append(Step(tuple(ops + gates)))
    return merged


def check_init_discipline(steps: list[Step]) -> list[str]:
    """Structural Init check; returns a list of violations (empty when clean).

    Every non-IMPLY gate must write a cell that was Init'd earlier and has not
    been read as an operand since; accumulating writes in between are the
    intended OR semantics. IMPLY overwrites by design and is exempt.
    """
    problems = []
    ready: dict[tuple[int, int], bool] = {}
    for k, s in enumerate(steps):
        for op in s.inits:
            for a in op.addresses:
                ready[a] = True
        for g in s.gates:
            for c in (g.in1, g.in2):
                if c is not None:
                    ready[(g.row, c)] = False
        for g in s.gates:
            if g.kind is not GateKind.IMPLY and not ready.get((g.row, g.out), False):
                problems.append(f"step {k}: {g.kind.value} writes ({g.row},{g.out}) without a fresh Init")
    return problems


@dataclass
class VerifyReport:
    mode: str
    vectors: int
    exhaustive: bool
    mismatches: list[tuple[tuple[int, ...], list[int], list[int]]] = field(default_factory=list)
    computation_steps: int = 0
    max_set_events_per_cell: dict[int, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "vectors": self.vectors,
            "exhaustive": self.exhaustive,
            "passed": self.passed,
            "matched": self.vectors - len(self.mismatches),
            "computation_steps": self.computation_steps,
            "max_set_events_per_column": {str(c): n for c, n in sorted(self.max_set_events_per_cell.items())},
            "mismatches": [{"inputs": list(v), "expected": e, "got": g} for v, e, g in self.mismatches],
        }


def input_vectors(n: int, seed: int = SAMPLE_SEED) -> tuple[np.ndarray, bool]:
    """All ``2**n`` vectors up to the exhaustive limit, else a fixed random sample."""
    if n <= EXHAUSTIVE_LIMIT:
        v = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int8).reshape(-1, n)
        return v, True
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(SAMPLED_VECTORS, n), dtype=np.int8), False


def run_vectors(
    compiled: CompiledProgram,
    vectors: np.ndarray,
    mode: str = "functional",
    params: DeviceParams = DeviceParams(),
    setup: GateSetup = GateSetup(),
) -> tuple[np.ndarray, Crossbar]:
    """Run ``compiled`` once per vector, one crossbar row each; returns output bits."""
    vectors = np.atleast_2d(vectors)
    if vectors.shape[1] != len(compiled.inputs):
        raise ValueError(f"expected {len(compiled.inputs)} input bits, got {vectors.shape[1]}")
    rows = len(vectors)
    xbar = Crossbar.create(rows, compiled.row_width, params, setup=setup)
    for r, vec in enumerate(vectors):
        for col, bit in zip(compiled.input_columns, vec):
            xbar.write((r, col), int(bit))
    base = compiled.on_row(0)
    xbar.run_program(schedule_rows([base] * rows), mode)
    logic = xbar.logic_map()
    return logic[:, compiled.output_columns], xbar


def verify_exhaustive(
    netlist: Netlist,
    compiled: CompiledProgram,
    mode: str = "functional",
    params: DeviceParams = DeviceParams(),
    setup: GateSetup = GateSetup(),
) -> VerifyReport:
    vectors, exhaustive = input_vectors(len(netlist.inputs))
    got, xbar = run_vectors(compiled, vectors, mode, params, setup)
    report = VerifyReport(mode, len(vectors), exhaustive, computation_steps=compiled.computation_steps)
    for vec, out in zip(vectors, got):
        expected = netlist.evaluate(vec)
        if list(map(int, out)) != expected:
            report.mismatches.append((tuple(int(b) for b in vec), expected, [int(b) for b in out]))
    counts = xbar.switch_counts()
    for c in range(min(compiled.cells_used, xbar.cols)):
        report.max_set_events_per_cell[c] = int(counts[:, c].max())
    return report
