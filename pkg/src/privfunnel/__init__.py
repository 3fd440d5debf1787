"""Optimal local sanitisation protocols for the privacy funnel.

Submodules
----------
prob        joint distributions of (S, X) and information measures
polytope    H-polytopes and vertex enumeration by double description
lp          small dense simplex solver
mechanisms  channels, leakage evaluators, GRR / OUE / Conditional Reporting
optimal     protocol synthesis under LDP, LIP and side-channel-resistant LIP
data        CSV ingestion and JSON persistence
experiments sweep harness emitting CSV
cli         command-line front end
"""

from .errors import PrivFunnelError
from .mechanisms import (Channel, PrivacyReport, SecretAwareChannel, cr_channel, cr_lip,
                         cr_utility, grr, ldp_of, lip_grr, lip_of, oue_lip, oue_utility,
                         solve_alpha, utility)
from .optimal import (ProtocolResult, optimal_ldp, optimal_lip, srlip_check, srlip_protocol,
                      synthesize)
from .polytope import Polytope, enumerate_vertices
from .prob import (JointDistribution, entropy, mutual_information, sample_jeffreys,
                   sample_uniform_normalised)

__version__ = "0.1.0"

__all__ = [
    "Channel", "JointDistribution", "Polytope", "PrivFunnelError", "PrivacyReport",
    "ProtocolResult", "SecretAwareChannel", "cr_channel", "cr_lip", "cr_utility",
    "entropy", "enumerate_vertices", "grr", "ldp_of", "lip_grr", "lip_of",
    "mutual_information", "optimal_ldp", "optimal_lip", "oue_lip", "oue_utility",
    "sample_jeffreys", "sample_uniform_normalised", "solve_alpha", "srlip_check",
    "srlip_protocol", "synthesize", "utility",
]
