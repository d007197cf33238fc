"""Real-time coarse-grained molecular dynamics engine."""

from .backend import active_backend
from .simulation import (
    GrabForce,
    IntegratorConfig,
    SimState,
    SimulationBlowupError,
    SingularGeometryError,
    advance,
    compute_forces,
    initial_state,
    nearest_atom,
    sim_to_world,
    step_vv,
    world_to_sim,
)
from .topology import (
    DEFAULT_CHAIN_LENGTH,
    DEFAULT_CHAIN_PARAMS,
    Topology,
    TopologyError,
    build_chain,
    load_checkpoint,
    load_topology,
    save_checkpoint,
    save_topology,
    zigzag_positions,
)

__all__ = [
    "GrabForce",
    "IntegratorConfig",
    "SimState",
    "SimulationBlowupError",
    "SingularGeometryError",
    "Topology",
    "TopologyError",
    "DEFAULT_CHAIN_LENGTH",
    "DEFAULT_CHAIN_PARAMS",
    "active_backend",
    "advance",
    "build_chain",
    "compute_forces",
    "initial_state",
    "load_checkpoint",
    "load_topology",
    "nearest_atom",
    "save_checkpoint",
    "save_topology",
    "sim_to_world",
    "step_vv",
    "world_to_sim",
    "zigzag_positions",
]
