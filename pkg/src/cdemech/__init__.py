"""Monetary mechanisms for cooperative data exchange among selfish users.

Users holding subsets of k packets broadcast coded packets over GF(q) until
everyone knows everything. Two round-based mechanisms decide who transmits
and who pays whom; the rest of the package certifies, by brute force, that
the resulting rate-payment pairs are rational, coalition-stable and optimal.
"""

from .economics import (
    BrokerLedger,
    PaymentMatrix,
    check_optimality,
    check_stability,
    is_rational_pair,
    utility,
    utility_comparisons,
)
from .field import SelectionPolicy, SubspaceBasis
from .instance import Instance, generate, is_coalition, minor_coalitions
from .mechanism import MechanismConfig, replay_verify, run, run_algo1, run_algo2
from .rates import is_achieving, min_sum_rate

__version__ = "0.1.0"
