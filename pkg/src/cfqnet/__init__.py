"""Simulation and analysis of counterfactual entanglement transmission and repeater chains."""

from .cfgate import CfGateModel, CqzeVariant, GateResult, cf_cnot, cf_cnot_ideal, cqze_loss_probability, cqze_map
from .errors import ConfigurationError, DivergenceError
from .protocol import ProtocolConfig, ProtocolResult, checkpoint_states, run_ghz_transmission, run_transmission
from .repeater import (
    ChainTopology,
    LobmModel,
    TrialResult,
    build_chain,
    consistency_16_17,
    monte_carlo,
    one_shot_trial,
    p_eff,
    t_tot_eff,
    t_tot_nodes,
)
from .state import (
    BellOutcome,
    DensityMatrix,
    QubitLabel,
    StateVector,
    apply_gate,
    bell_project,
    concurrence,
    fidelity,
    init_register,
    reduced_density,
)

__version__ = "0.1.0"

__all__ = [
    "apply_gate",
    "bell_project",
    "BellOutcome",
    "build_chain",
    "cf_cnot",
    "cf_cnot_ideal",
    "CfGateModel",
    "ChainTopology",
    "checkpoint_states",
    "concurrence",
    "ConfigurationError",
    "consistency_16_17",
    "cqze_loss_probability",
    "cqze_map",
    "CqzeVariant",
    "DensityMatrix",
    "DivergenceError",
    "fidelity",
    "GateResult",
    "init_register",
    "LobmModel",
    "monte_carlo",
    "one_shot_trial",
    "p_eff",
    "ProtocolConfig",
    "ProtocolResult",
    "QubitLabel",
    "reduced_density",
    "run_ghz_transmission",
    "run_transmission",
    "StateVector",
    "t_tot_eff",
    "t_tot_nodes",
    "TrialResult",
]
