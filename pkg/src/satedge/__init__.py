"""Energy-optimal task offloading for satellite-terrestrial edge networks.

The package solves a joint server-assignment and bandwidth-allocation
problem with a consensus ADMM outer loop.  The discrete assignment
subproblem is handled either exhaustively or by a double deep Q-learning
agent whose Q-function mixes a classical MLP with a simulated
variational quantum circuit; the continuous bandwidth subproblems are
solved by a log-barrier interior-point method.
"""

from satedge.scenario import (
    ConfigError,
    ComputeParams,
    RadioParams,
    Scenario,
    TopologyParams,
    generate_scenario,
    load_scenario,
    save_scenario,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ComputeParams",
    "RadioParams",
    "Scenario",
    "TopologyParams",
    "generate_scenario",
    "load_scenario",
    "save_scenario",
    "validate",
    "__version__",
]
