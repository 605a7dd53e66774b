"""
Bounds when the terminology underdetermines the distribution
============================================================

Dropping the assessment ``P(B | A)`` from Tu leaves only the inclusion
``B < A``.  There is no longer a single distribution, so queries return an
interval.  Leaving the domain size open widens the interval further.
"""

from importlib import resources

from crdl import Unconstrained, compact_graph, interval_query, parse_terminology, validate
from crdl.logic import ConceptAssertion, Exact, Query

tbox = parse_terminology((resources.files("crdl") / "data" / "tu_relaxed.crl").read_text())
print(validate(tbox).profile)

# %%
# Fixed domain sizes: one interval per N, for both propagation schemes.

for n in (1, 5, 10):
    q = Query(ConceptAssertion("C", "a0"), (), Exact(n))
    g = compact_graph(tbox, q)
    for scheme in ("cluster", "l2u"):
        lo, hi = interval_query(g, None, q, scheme=scheme).interval
        print(f"N={n:<3d} {scheme:<8s} [{lo:.4f}, {hi:.4f}]")

# %%
# Unknown domain size, at most 20 individuals: the hull over every N.

q = Query(ConceptAssertion("C", "a0"), (), Unconstrained(20))
res = interval_query(compact_graph(tbox, q), None, q, scheme="l2u")
print("N<=20", [round(x, 4) for x in res.interval], res.warnings)
