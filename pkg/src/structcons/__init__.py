"""Structural consensus over leader-following digraphs with Paillier-encrypted exchanges."""
from .dynamics import (
    FirstOrderState,
    SecondOrderState,
    Trajectory,
    consensus_target,
    simulate,
    structural_consensus_check,
)
from .errors import ConsensusError
from .paillier import FixedPointCodec, decrypt, encrypt, hom_add, hom_scale, keygen
from .protocol import run_encrypted_simulation
from .spectral import (
    SecondOrderGains,
    SpectralBox,
    boundary_curve,
    epsilon_bound,
    estimate_spectral_box,
    select_gamma,
    solve_rho,
    spectral_radius_excess,
)
from .topology import Topology, build_topology, five_agent_topology, canonical_topology, sample_weights

__version__ = "0.1.0"

__all__ = [
    "ConsensusError",
    "FirstOrderState",
    "FixedPointCodec",
    "SecondOrderGains",
    "SecondOrderState",
    "SpectralBox",
    "Topology",
    "Trajectory",
    "boundary_curve",
    "build_topology",
    "consensus_target",
    "decrypt",
    "encrypt",
    "epsilon_bound",
    "estimate_spectral_box",
    "five_agent_topology",
    "hom_add",
    "hom_scale",
    "keygen",
    "canonical_topology",
    "run_encrypted_simulation",
    "sample_weights",
    "select_gamma",
    "simulate",
    "solve_rho",
    "spectral_radius_excess",
    "structural_consensus_check",
]
