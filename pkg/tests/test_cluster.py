import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crdl.cluster import (
    cluster_query, compact_graph, conv_capped, domain_profile, limit_query, power_capped,
    region_network, restriction_aggregate,
)
from crdl.exact import ZeroEvidence, ve_marginals, ve_query
from crdl.grounding import GroundedVariable, ground
from crdl.logic import ConceptAssertion, ConceptName, Exact, Query, parse_terminology
from conftest import query
from fixtures import random_cases
from oracles import atleast_bruteforce, kangaroo_parent

SINGLE_ROLE = """
P(r) = 0.4
P(A) = 0.6
P(B | A) = 0.7
P(B | not A) = 0.2
C = A and exists r.B
"""


def evidence_possible(t, q) -> bool:
    """P(evidence) > 0, by exact inference on the evidence alone."""
    if not q.evidence:
        return True
    e = q.evidence[0]
    pe = ve_query(ground(t, Query(ConceptAssertion(e.concept, e.individual), (), q.domain)), None)
    return (pe if e.positive else 1.0 - pe) > 0.0


# -- closed-form aggregates -------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(
    k=st.integers(1, 4),
    role=st.floats(0.0, 1.0),
    named=st.lists(st.floats(0.0, 1.0), max_size=3),
    generic=st.floats(0.0, 1.0),
    gen=st.integers(0, 10),
)
def test_atleast_matches_bruteforce(k, role, named, generic, gen):
    m = len(named) + 1
    n = m + gen
    probs = [role * x for x in named] + [role * generic] * gen
    if k > n:
        return
    got = restriction_aggregate("atleast", role, named, generic, n, m, k)
    assert got == pytest.approx(atleast_bruteforce(k, probs), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(role=st.floats(0.0, 1.0), named=st.lists(st.floats(0.0, 1.0), max_size=3),
       generic=st.floats(0.0, 1.0), gen=st.integers(0, 8))
def test_exists_forall_match_bruteforce(role, named, generic, gen):
    m = len(named) + 1
    n = m + gen
    probs = [role * x for x in named] + [role * generic] * gen
    assert restriction_aggregate("exists", role, named, generic, n, m) == pytest.approx(
        atleast_bruteforce(1, probs), abs=1e-10)
    fails = [role * (1.0 - x) for x in named] + [role * (1.0 - generic)] * gen
    assert restriction_aggregate("forall", role, named, generic, n, m) == pytest.approx(
        1.0 - atleast_bruteforce(1, fails), abs=1e-10)


def test_aggregate_monotone_in_n():
    prev = 0.0
    for n in range(1, 40):
        cur = restriction_aggregate("exists", 0.3, [], 0.5, n, 1)
        assert cur >= prev
        prev = cur
    assert restriction_aggregate("forall", 0.3, [], 0.5, 10, 1) <= restriction_aggregate("forall", 0.3, [], 0.5, 2, 1)


def test_atleast_too_many_warns():
    with pytest.warns(RuntimeWarning):
        assert restriction_aggregate("atleast", 0.5, [], 0.5, 2, 1, 3) == 0.0


def test_capped_convolution_keeps_mass():
    d = np.array([[0.5, 0.2], [0.2, 0.1]])
    out = power_capped(d, 2 ** 50)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    assert out[1, 1] == pytest.approx(1.0, abs=1e-12)
    both = conv_capped(d, d)
    assert both.sum() == pytest.approx(1.0, abs=1e-12)
    assert both[0, 0] == pytest.approx(0.25)


# -- agreement with exact inference ----------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_kangaroo_matches_closed_form(kangaroo, n):
    q = query("Parent", n)
    assert cluster_query(compact_graph(kangaroo, q), q).probability == pytest.approx(kangaroo_parent(n), abs=1e-9)


def test_single_individual_is_exact():
    cases = random_cases(60, 1, seed=7, max_nodes=6)
    for _, t, q in cases:
        assert cluster_query(compact_graph(t, q), q).probability == pytest.approx(
            ve_query(ground(t, q), q), abs=1e-6)


@pytest.mark.parametrize("ev", [(), (ConceptAssertion("A", "a1", False),), (ConceptAssertion("C", "a1"),)])
def test_pair_scheme_exact_for_two_named(tu, ev):
    # N = M = 2: the two regions exchange the full joint over both filler sets
    q = query("C", 2, evidence=ev)
    assert cluster_query(compact_graph(tu, q), q).probability == pytest.approx(ve_query(ground(tu, q), q), abs=1e-9)


def test_small_fixtures_close_to_exact():
    worst = 0.0
    for _, t, q in random_cases(40, 4, seed=3):
        if not evidence_possible(t, q):
            continue
        worst = max(worst, abs(cluster_query(compact_graph(t, q), q).probability - ve_query(ground(t, q), q)))
    assert worst <= 0.05


def test_factored_scheme_close_to_exact(tu):
    for n in (2, 3, 4):
        q = query("C", n)
        got = cluster_query(compact_graph(tu, q), q, messages="factored").probability
        assert got == pytest.approx(ve_query(ground(tu, q), q), abs=0.05)


def test_zero_evidence_raises():
    t = parse_terminology("P(A) = 0.5\nP(B | A) = 1\nP(B | not A) = 1\n")
    q = query("A", 2, evidence=(ConceptAssertion("B", "a1", False),))
    with pytest.raises(ZeroEvidence):
        cluster_query(compact_graph(t, q), q)


def test_unknown_scheme(tu):
    with pytest.raises(ValueError):
        cluster_query(compact_graph(tu, query("C", 2)), query("C", 2), messages="bogus")


# -- region networks and limits ---------------------------------------------------


@pytest.mark.parametrize("ev", [(), (ConceptAssertion("A", "a1", False),)])
def test_region_network_reproduces_beliefs(ev):
    # with one restriction per role the factored regions are plain Bayesian networks
    t = parse_terminology(SINGLE_ROLE)
    q = query("C", 4, evidence=ev)
    g = compact_graph(t, q)
    run = cluster_query(g, q, messages="factored").extra["run"]
    for o in run.owners:
        net, _ = region_network(run, o)
        vs = [GroundedVariable(nd, (o,)) for nd in g.sn.nodes if isinstance(nd, ConceptName)]
        marg = ve_marginals(net, vs)
        for v in vs:
            assert marg[v] == pytest.approx(run.belief(o, v.relation), abs=1e-9)


def test_limit_saturates(tu):
    q = query("C", Exact(1))
    res = limit_query(compact_graph(tu, q), q)
    assert res.n == "inf"
    assert res.extra["saturation_n"] >= 2
    assert res.probability == pytest.approx(0.405, abs=2e-3)
    big = cluster_query(compact_graph(tu, query("C", 10 ** 6)), query("C", 10 ** 6)).probability
    assert big == pytest.approx(res.probability, abs=1e-6)


def test_limit_without_restrictions_is_n1():
    t = parse_terminology("P(A) = 0.3\nP(B | A) = 0.9\nP(B | not A) = 0.1\n")
    q = query("B", Exact(1))
    assert limit_query(compact_graph(t, q), q).probability == pytest.approx(0.3 * 0.9 + 0.7 * 0.1)


def test_profile_contains_every_named_belief(tu):
    from crdl.logic import parse_evidence
    q = query("A", 9, evidence=parse_evidence("not C(a0), not D(a1), B(a2), not B(a3)"))
    g = compact_graph(tu, q)
    lo, hi = domain_profile(g, "A", q)
    assert 0.0 <= lo <= hi <= 1.0
    assert hi == 1.0  # B(a2) forces A(a2)
    for ind in ("a0", "a1", "a3"):
        p = cluster_query(g, Query(ConceptAssertion("A", ind), q.evidence, q.domain)).probability
        assert lo - 1e-12 <= p <= hi + 1e-12

