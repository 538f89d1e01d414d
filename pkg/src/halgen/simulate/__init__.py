"""Simulated MMIO board model and program interpreter."""

from halgen.simulate.board import (
    BoardMap,
    ClockEnable,
    ConfigError,
    PeripheralSpec,
    RegisterSpec,
    Scenario,
    load_board_map,
    load_scenario,
)
from halgen.simulate.interp import (
    Diagnostic,
    MachineState,
    SimSetupError,
    Verdict,
    check_scenario,
    exec_program,
)

__all__ = [
    "BoardMap", "ClockEnable", "ConfigError", "Diagnostic", "MachineState",
    "PeripheralSpec", "RegisterSpec", "Scenario", "SimSetupError", "Verdict",
    "check_scenario", "exec_program", "load_board_map", "load_scenario",
]
