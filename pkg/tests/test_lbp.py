import itertools
import math

import pytest

from crdl.counting import restriction_factor_messages
from crdl.exact import ve_query
from crdl.grounding import ground, shatter
from crdl.lbp import grounded_lbp, lift_key, plbp
from crdl.logic import ConceptAssertion, UnsupportedConstruct, parse_terminology
from crdl.results import Schedule
from conftest import query

POLYTREE = """
P(A) = 0.3
P(B | A) = 0.8
P(B | not A) = 0.1
P(E) = 0.6
C = B and E
P(F | C) = 0.7
P(F | not C) = 0.2
"""


def lifted_history_gap(t, q):
    h_ground, h_lift = [], []
    r1 = grounded_lbp(ground(t, q), q, history=h_ground)
    sn = shatter(t, q)
    r2 = plbp(sn, q, history=h_lift)
    assert r1.iterations == r2.iterations
    gap = 0.0
    for b1, b2 in zip(h_ground, h_lift):
        for key, p in b1.items():
            lk = lift_key(key, sn.named)
            gap = max(gap, abs(p - b2[lk]))
    return gap, r1, r2


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("name,concept", [("tu", "C"), ("kangaroo", "Parent")])
def test_lifting_equivalence(request, name, concept, n):
    t = request.getfixturevalue(name)
    gap, r1, r2 = lifted_history_gap(t, query(concept, n))
    assert gap <= 1e-9
    assert r1.probability == pytest.approx(r2.probability, abs=1e-12)


def test_lifting_equivalence_with_evidence(tu):
    ev = [ConceptAssertion("B", "a1", False), ConceptAssertion("D", "a2")]
    gap, _, _ = lifted_history_gap(tu, query("C", 5, evidence=ev))
    assert gap <= 1e-9


@pytest.mark.parametrize("target", ["A", "B", "C", "F"])
@pytest.mark.parametrize("evidence", [(), (ConceptAssertion("F", "a0"),), (ConceptAssertion("B", "a0", False),)])
def test_polytree_is_exact(target, evidence):
    t = parse_terminology(POLYTREE)
    q = query(target, 1, evidence=evidence)
    net = ground(t, q)
    assert grounded_lbp(net, q).probability == pytest.approx(ve_query(net, q), abs=1e-9)


def test_lbp_n1_value(tu):
    assert plbp(shatter(tu, query("C", 1)), query("C", 1)).probability == pytest.approx(0.578145, abs=1e-6)


def test_schedules_reach_same_fixed_point(kangaroo):
    q = query("Parent", 4)
    base = plbp(shatter(kangaroo, q), q).probability
    seq = plbp(shatter(kangaroo, q), q, Schedule(mode="sequential")).probability
    damped = plbp(shatter(kangaroo, q), q, Schedule(damping=0.5, max_iter=20000)).probability
    assert seq == pytest.approx(base, abs=1e-6)
    assert damped == pytest.approx(base, abs=1e-6)


def test_nonconvergence_is_reported(tu):
    q = query("C", 3)
    res = plbp(shatter(tu, q), q, Schedule(max_iter=1))
    assert not res.converged and res.warnings


def test_inverse_roles_rejected_by_lifted_graph():
    t = parse_terminology("P(A)=0.4\nP(r)=0.3\nB = exists r-.A\n")
    q = query("B", 3)
    with pytest.raises(UnsupportedConstruct):
        plbp(shatter(t, q), q)
    assert 0.0 < grounded_lbp(ground(t, q), q).probability < 1.0


def _brute_restriction(cap, negated, child, groups):
    """Messages of the restriction factor by summing over every member's role and filler."""
    members = [(r, f) for r, f, size in groups for _ in range(size)]
    n = len(members)

    def weight(states, skip=None):
        w = 1.0
        for j, ((r, f), (rv, fv)) in enumerate(zip(members, states)):
            if j == skip:
                continue
            w *= (r if rv else 1 - r) * (f if fv else 1 - f)
        return w

    def holds(states):
        count = sum(rv and (fv != negated) for rv, fv in states)
        reached = count >= cap
        return not reached if negated else reached

    to_child = 0.0
    per_member = []
    cfgs = list(itertools.product(itertools.product((0, 1), repeat=2), repeat=n))
    for states in cfgs:
        if holds(states):
            to_child += weight(states)
    for j in range(n):
        out_r, out_f = [0.0, 0.0], [0.0, 0.0]
        for states in cfgs:
            h = holds(states)
            c = child if h else 1 - child
            rv, fv = states[j]
            f_j = members[j][1]
            out_r[rv] += c * weight(states, skip=j) * (f_j if fv else 1 - f_j)
            r_j = members[j][0]
            out_f[fv] += c * weight(states, skip=j) * (r_j if rv else 1 - r_j)
        per_member.append((out_r[1] / sum(out_r), out_f[1] / sum(out_f)))
    return to_child, per_member


@pytest.mark.parametrize("negated", [False, True])
@pytest.mark.parametrize("cap", [1, 2])
def test_restriction_messages_brute_force(negated, cap):
    groups = [(0.3, 0.6, 1), (0.5, 0.2, 2), (0.7, 0.9, 1)]
    child = 0.35
    to_child, per_group = restriction_factor_messages(cap, negated, child, groups)
    bf_child, bf_members = _brute_restriction(cap, negated, child, groups)
    assert to_child == pytest.approx(bf_child, abs=1e-12)
    firsts = [0, 1, 3]
    for (r_msg, f_msg), j in zip(per_group, firsts):
        assert r_msg == pytest.approx(bf_members[j][0], abs=1e-12)
        assert f_msg == pytest.approx(bf_members[j][1], abs=1e-12)
    assert not math.isnan(to_child)
