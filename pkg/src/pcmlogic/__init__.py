"""Simulator and compiler for stateful logic in phase-change memory."""

__version__ = "0.1.0"

from .compiler import compile_netlist, lower, allocate, parse_netlist, schedule_rows, verify_exhaustive
from .config import load_config, load_preset
from .crossbar import Crossbar, Gate, Init, Step, format_program, parse_program
from .device import (
    DEFAULT_VARIABILITY,
    CellState,
    DeviceParams,
    Phase,
    VariabilitySpec,
    sample_device,
)
from .gates import GateKind, GateSetup, execute_gate_circuit, execute_gate_functional, truth_table
from .margins import Bands, worst_case_margins
from .robustness import monte_carlo
from .solver import CircuitConfig, StepPolicy, solve_transient, steady_state_node_voltage
