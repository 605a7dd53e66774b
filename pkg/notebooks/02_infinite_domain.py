"""
Queries over an unbounded domain
================================

In the Tu terminology ``C = B or exists r.D`` with ``D = forall r.A``.
As the domain grows, D gets harder to satisfy (more r-successors to check)
while ``exists r.D`` gets more chances; the two effects meet at a limit.
"""

from importlib import resources

from crdl import cluster_query, compact_graph, limit_query, parse_terminology
from crdl.logic import ConceptAssertion, Exact, Query

tbox = parse_terminology((resources.files("crdl") / "data" / "tu.crl").read_text())


def ask(n):
    q = Query(ConceptAssertion("C", "a0"), (), Exact(n))
    return cluster_query(compact_graph(tbox, q), q)


# %%
# The curve rises while D is still likely, then falls to its limit.

for n in (1, 5, 9, 20, 50, 100, 200, 500, 5000):
    print(f"N={n:<5d} P(C(a0)) = {ask(n).probability:.4f}")

# %%
# The generic individuals enter only through powers of one message, so the
# limit is found by doubling N until every power term is numerically 0 or 1.

q = Query(ConceptAssertion("C", "a0"), (), Exact(1))
res = limit_query(compact_graph(tbox, q), q)
print(f"N=inf   P(C(a0)) = {res.probability:.4f}  (saturated at N={res.extra['saturation_n']})")
