"""Inference for probabilistic description-logic terminologies.

Terminologies are parsed from the line-oriented ``.crl`` format, grounded
over a finite domain and queried with one of several engines: exact
variable elimination, loopy belief propagation (grounded or lifted),
clustered propagation over slice regions, and interval propagation for
credal terminologies.
"""

from .cluster import cluster_query, compact_graph, domain_profile, limit_query
from .credal import CredalSpec, interval_query
from .exact import enumerate_query, ve_query
from .grounding import ground, prune, shatter
from .lbp import grounded_lbp, plbp
from .logic import (
    ConceptAssertion,
    Exact,
    Query,
    Range,
    RoleAssertion,
    Unconstrained,
    parse_evidence,
    parse_terminology,
    validate,
)
from .results import InferenceResult, Schedule

__version__ = "0.1.0"

__all__ = [
    "ConceptAssertion", "CredalSpec", "Exact", "InferenceResult", "Query", "Range", "RoleAssertion",
    "Schedule", "Unconstrained", "cluster_query", "compact_graph", "domain_profile", "enumerate_query",
    "ground", "grounded_lbp", "interval_query", "limit_query", "parse_evidence", "parse_terminology",
    "plbp", "prune", "shatter", "validate", "ve_query",
]
