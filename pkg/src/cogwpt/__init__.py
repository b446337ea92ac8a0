"""Beamforming optimization for cognitive wireless power transfer.

A multi-antenna energy transmitter powers a receiver over shared spectrum
while a rate-adaptive primary link re-allocates its power in reaction to the
interference it sees.  The package builds the reaction model, the proposed
dual-decomposition beam optimizer, three benchmark designs, and brute-force
oracles used by the test suite.
"""

from .scenario import (ANTENNA_SLOTS, Geometry, Scenario, generate_scenario,
                       load_scenario, save_scenario)
from .waterfill import (PowerBreakdown, WaterfillResult, interference_profile,
                        primary_sum_rate, received_power, waterfill)

__all__ = [
    "ANTENNA_SLOTS", "Geometry", "Scenario", "generate_scenario",
    "load_scenario", "save_scenario",
    "PowerBreakdown", "WaterfillResult", "interference_profile",
    "primary_sum_rate", "received_power", "waterfill",
]

__version__ = "0.1.0"
