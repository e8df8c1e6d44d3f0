"""Integrated-information structures and Q-shape collapse dynamics for small networks."""

from .netcore import BinaryNetwork, NetworkState, build_network, next_state_distribution
from .iit3 import QShape, big_phi, cause_repertoire, effect_repertoire, phi_max, qshape, small_phi
from .transport import emd, emd_star, emd_star_xemd

__all__ = [
    "BinaryNetwork",
    "NetworkState",
    "QShape",
    "big_phi",
    "build_network",
    "cause_repertoire",
    "effect_repertoire",
    "emd",
    "emd_star",
    "emd_star_xemd",
    "next_state_distribution",
    "phi_max",
    "qshape",
    "small_phi",
]

__version__ = "0.1.0"
