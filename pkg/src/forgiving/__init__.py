"""Self-healing overlay network built from half-full trees.

Deleted nodes are replaced by reconstruction trees so that every survivor's
degree and every pairwise distance stay within fixed factors of the graph of
all insertions.
"""

from .adversary import Delete, Insert, Trace, max_degree_attack, random_trace, star_attack
from .graph import ForgivingGraph, InvalidArgument, Ref, compute_haft
from .haft import Haft, make_haft, merge, strip, validate_haft
from .metrics import check_structure, check_theorem, lower_bound_beta
from .netsim import ProtocolError, RecoveryStats, run_recovery
from .runner import run_trace

__all__ = [
    "Delete",
    "ForgivingGraph",
    "Haft",
    "Insert",
    "InvalidArgument",
    "ProtocolError",
    "RecoveryStats",
    "Ref",
    "Trace",
    "check_structure",
    "check_theorem",
    "compute_haft",
    "lower_bound_beta",
    "make_haft",
    "max_degree_attack",
    "merge",
    "random_trace",
    "run_recovery",
    "run_trace",
    "star_attack",
    "strip",
    "validate_haft",
]
