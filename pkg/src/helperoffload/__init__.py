"""Energy-optimal control of computation offloading to a helper with a randomly busy CPU."""

__version__ = "0.1.0"

from .chains import ChannelState, CpuState, TwoStateChain, stationary_dist
from .energy import Action, SlotState, SystemParams, local_energy, offload_energy, slot_cost
from .policies import make_policy
from .simulator import EvalReport, buffer_gain, evaluate, exact_expected_energy, run_episode

__all__ = [
    "Action",
    "ChannelState",
    "CpuState",
    "EvalReport",
    "SlotState",
    "SystemParams",
    "TwoStateChain",
    "buffer_gain",
    "evaluate",
    "exact_expected_energy",
    "local_energy",
    "make_policy",
    "offload_energy",
    "run_episode",
    "slot_cost",
    "stationary_dist",
]
