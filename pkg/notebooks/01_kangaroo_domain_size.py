"""
How a query changes with the size of the domain
===============================================

The kangaroo terminology says who is a parent: a human with some human
child.  ``P(Parent(a0))`` depends on how many individuals could be a0's
child, so we ask the same query over growing domains and compare the
engines.
"""

from importlib import resources

from crdl import cluster_query, compact_graph, ground, parse_terminology, plbp, shatter, ve_query
from crdl.logic import ConceptAssertion, Exact, Query

text = (resources.files("crdl") / "data" / "kangaroo.crl").read_text()
print(text)
tbox = parse_terminology(text)

# %%
# Exact inference grounds the terminology: N concept indicators per concept
# and N^2 role indicators.  That only works for small N.

for n in (1, 2, 5, 9):
    q = Query(ConceptAssertion("Parent", "a0"), (), Exact(n))
    net = ground(tbox, q)
    print(f"N={n:<3d} variables={len(net):<5d} exact={ve_query(net, q):.4f}")

# %%
# Loopy belief propagation on the lifted graph costs the same at every N,
# but it double counts the loops through the role indicators.  The
# clustered engine keeps each individual's slice exact and only passes
# messages between individuals.

print(f"{'N':>5} {'LBP':>8} {'cluster':>8}")
for n in (1, 5, 9, 20, 200, 10_000):
    q = Query(ConceptAssertion("Parent", "a0"), (), Exact(n))
    lbp = plbp(shatter(tbox, q), q).probability
    cl = cluster_query(compact_graph(tbox, q), q).probability
    print(f"{n:>5} {lbp:8.4f} {cl:8.4f}")

# %%
# With many individuals someone is almost surely a human child, so the
# probability approaches P(Human) = 0.54.
