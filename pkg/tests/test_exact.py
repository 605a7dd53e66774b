import pytest

from crdl.exact import ZeroEvidence, enumerate_query, enumeration_guard, ve_marginals, ve_query
from crdl.grounding import ground
from crdl.logic import ConceptAssertion, ResourceLimit, parse_terminology
from conftest import query
from fixtures import random_cases
from oracles import kangaroo_parent, tu_c

CASES = random_cases(200, 3, seed=1)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_tu_matches_closed_form(tu, n):
    assert ve_query(ground(tu, query("C", n)), query("C", n)) == pytest.approx(tu_c(n), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 9, 12])
def test_kangaroo_matches_closed_form(kangaroo, n):
    q = query("Parent", n)
    assert ve_query(ground(kangaroo, q), q) == pytest.approx(kangaroo_parent(n), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_enumeration_agrees_on_bundled(tu, kangaroo, n):
    for t, c in ((tu, "C"), (kangaroo, "Parent")):
        q = query(c, n)
        net = ground(t, q)
        assert enumerate_query(net, q) == pytest.approx(ve_query(net, q), abs=1e-12)


def test_enumerate_vs_ve_on_generated():
    assert len(CASES) == 200
    worst = 0.0
    for _, t, q in CASES:
        net = ground(t, q)
        worst = max(worst, abs(enumerate_query(net, q) - ve_query(net, q)))
    assert worst <= 1e-12


def test_enumeration_guard(tu, monkeypatch):
    q = query("C", 4)
    with pytest.raises(ResourceLimit):
        enumerate_query(ground(tu, q), q, prune_first=False)
    monkeypatch.setenv("CRDL_EXACT_GUARD", "7")
    assert enumeration_guard() == 7


def test_trivial_identities(tu):
    for n in (1, 2, 5):
        q = query("A", n)
        assert ve_query(ground(tu, q), q) == pytest.approx(0.9, abs=1e-12)
        q = query("A", n, evidence=[ConceptAssertion("A", "a0")])
        assert ve_query(ground(tu, q), q) == 1.0


def test_zero_evidence():
    t = parse_terminology("P(A)=0.5\nB = A and not A\n")
    q = query("A", 1, evidence=[ConceptAssertion("B", "a0")])
    with pytest.raises(ZeroEvidence):
        ve_query(ground(t, q), q)


def test_marginals_match_queries(kangaroo):
    q = query("Parent", 3)
    net = ground(kangaroo, q)
    picks = [v for v in net.variables if str(v.relation) in ("Human", "Parent", "Kangaroo")]
    marg = ve_marginals(net, picks)
    for v in picks:
        sub = query(str(v.relation), 3, ind=v.args[0])
        assert marg[v] == pytest.approx(ve_query(ground(kangaroo, sub), sub), abs=1e-12)


def test_evidence_posterior_by_bayes(tu):
    """P(A | C) = P(C | A) P(A) / P(C) with every term from separate queries."""
    n = 2
    pc = ve_query(ground(tu, query("C", n)), query("C", n))
    q_ac = query("C", n, evidence=[ConceptAssertion("A", "a0")])
    pc_a = ve_query(ground(tu, q_ac), q_ac)
    q_ca = query("A", n, evidence=[ConceptAssertion("C", "a0")])
    assert ve_query(ground(tu, q_ca), q_ca) == pytest.approx(pc_a * 0.9 / pc, abs=1e-12)
