"""Multiuser MIMO downlink beamforming with group max-SINR filter banks.

Iterative transmit/receive design through uplink-downlink duality, for
SINR balancing under a power budget and power minimization under SINR
targets, plus block-diagonalization and per-stream baselines.
"""
from .driver import Method, Status, feasibility_test, solve, solve_pp, solve_pr
from .errors import GsinrError
from .model import ChannelSet, SystemConfig, fixed_channel, generate_channel
from .numerics import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChannelSet",
    "GsinrError",
    "Method",
    "Status",
    "SystemConfig",
    "feasibility_test",
    "fixed_channel",
    "generate_channel",
    "solve",
    "solve_pp",
    "solve_pr",
]
