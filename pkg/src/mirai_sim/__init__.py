"""Discrete-event simulator of a telnet-scanning IoT botnet and its DoS floods,
with a calibrated resource model for the sending and receiving devices."""

from .config import ScenarioConfig, load_config, parse_config, preset_config
from .scenario import RunResult, Simulation, run_scenario

__version__ = "0.1.0"
