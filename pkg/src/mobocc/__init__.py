"""Optimistic concurrency control for mobile databases, simulated.

Conflicting transactions are restarted with fresh values multicast by the
base-station coordinator instead of being aborted.
"""

from .config import WorkloadSpec, load_config, spec_from_dict
from .coordinator import Strategy
from .simulation import Simulation, SimResult, simulate
from .verify import Verdict, verify_history

__all__ = [
    "Simulation", "SimResult", "Strategy", "Verdict", "WorkloadSpec",
    "load_config", "simulate", "spec_from_dict", "verify_history",
]
__version__ = "0.1.0"
