"""Simulator for two-sided retrodirective antenna arrays in wireless power transfer.

The generator and the receiver both phase-conjugate what they hear, so a
wave circulating between them converges onto the channel's strongest beam
mode.  A PI controller on the loop gain holds that circulation at marginal
stability, which is where transfer efficiency is highest.
"""
from .channel import (
    ArrayGeometry,
    ChannelSnapshot,
    EigenAnalysis,
    Obstruction,
    decompose_input,
    eig_analysis,
    efficiency,
    load_channel,
    save_channel,
    synth_channel,
)
from .control import ControllerParams, ControlState, PlantParams
from .loop import LoopParams, LoopState, step
from .scenario import ScenarioConfig, run_comparison, run_scenario, run_sweep
from .trace import SimulationTrace

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "ChannelSnapshot",
    "ControlState",
    "ControllerParams",
    "EigenAnalysis",
    "LoopParams",
    "LoopState",
    "Obstruction",
    "PlantParams",
    "ScenarioConfig",
    "SimulationTrace",
    "decompose_input",
    "efficiency",
    "eig_analysis",
    "load_channel",
    "run_comparison",
    "run_scenario",
    "run_sweep",
    "save_channel",
    "step",
    "synth_channel",
]
