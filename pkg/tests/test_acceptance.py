"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL (or WARN) line that pytest prints in an
"acceptance criteria" section.  Run directly with ``python3
tests/test_acceptance.py`` for the same report.
"""

import random
import sys
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, query  # noqa: E402
from crdl.cluster import cluster_query, compact_graph, domain_profile, limit_query, restriction_aggregate  # noqa: E402
from crdl.credal import CredalSpec, interval_query  # noqa: E402
from crdl.exact import enumerate_query, ve_query  # noqa: E402
from crdl.grounding import ground, prune, shatter  # noqa: E402
from crdl.lbp import plbp  # noqa: E402
from crdl.logic import Exact, Unconstrained, build_tnetwork, local_models, parse_evidence  # noqa: E402
from fixtures import twenty_node_cases, random_cases  # noqa: E402
from oracles import atleast_bruteforce  # noqa: E402
from test_credal import TWO_PARAMS, point_value  # noqa: E402
from test_lbp import lifted_history_gap  # noqa: E402


def record(label: str, ok: bool, detail: str, *, warn_only: bool = False) -> None:
    status = "PASS" if ok else ("WARN" if warn_only else "FAIL")
    ACCEPTANCE_LINES.append(f"[{status}] {label}: {detail}")
    print(f"[{status}] {label}: {detail}")


def within(got, want, tol) -> bool:
    return abs(got - want) <= tol


def fmt(vals) -> str:
    return ", ".join(f"{v:.4f}" for v in vals)


def evidence_possible(t, q) -> bool:
    if not q.evidence:
        return True
    e = q.evidence[0]
    from crdl.logic import ConceptAssertion, Query
    pe = ve_query(ground(t, Query(ConceptAssertion(e.concept, e.individual), (), q.domain)), None)
    return (pe if e.positive else 1.0 - pe) > 0.0


def exact(t, concept, n, evidence=()):
    q = query(concept, n, evidence)
    return ve_query(ground(t, q), q)


def cluster(t, concept, n, evidence=()):
    q = query(concept, n, evidence)
    return cluster_query(compact_graph(t, q), q).probability


# ---------------------------------------------------------------------------


def test_c1_exact_tu(tu):
    want = {1: 0.5535, 5: 0.8445, 9: 0.9210}
    got = {n: exact(tu, "C", n) for n in want}
    ok = all(within(got[n], want[n], 5e-5) for n in want)
    record("1 exact Tu N=1,5,9", ok, f"got {fmt(got.values())} want {fmt(want.values())} (5e-5)")
    assert ok


def test_c2_exact_kangaroo(kangaroo):
    want = {1: 0.1620, 5: 0.3536, 9: 0.4481}
    got = {n: exact(kangaroo, "Parent", n) for n in want}
    ok = all(within(got[n], want[n], 5e-5) for n in want)
    record("2 exact Kangaroo N=1,5,9", ok, f"got {fmt(got.values())} want {fmt(want.values())} (5e-5)")
    assert ok


def test_c3_trivial_identities(tu):
    worst = 0.0
    for n in (1, 2, 5):
        worst = max(worst, abs(exact(tu, "A", n) - 0.9))
        worst = max(worst, abs(exact(tu, "A", n, parse_evidence("A(a0)")) - 1.0))
    ok = worst <= 1e-12
    record("3 P(A)=0.9, P(A|A)=1 for N=1,2,5", ok, f"max deviation {worst:.1e} (1e-12)")
    assert ok


def test_c4_cluster_kangaroo(kangaroo):
    ns = (1, 5, 9)
    got = [cluster(kangaroo, "Parent", n) for n in ns]
    ex = [exact(kangaroo, "Parent", n) for n in ns]
    p20, p200 = cluster(kangaroo, "Parent", 20), cluster(kangaroo, "Parent", 200)
    ok = all(within(a, b, 0.005) for a, b in zip(got, ex)) and within(p20, 0.5268, 0.02) and within(p200, 0.54, 0.005)
    record("4 cluster Kangaroo", ok,
           f"N=1,5,9 {fmt(got)} vs exact {fmt(ex)} (0.005); N=20 {p20:.4f} (0.5268+-0.02); N=200 {p200:.4f} (0.5400+-0.005)")
    assert ok


def test_c5_cluster_tu_large(tu):
    p500 = cluster(tu, "C", 500)
    q = query("C", Exact(1))
    lim = limit_query(compact_graph(tu, q), q)
    sat = lim.extra.get("saturation_n")
    ok = within(p500, 0.405, 0.002) and within(lim.probability, 0.405, 0.002) and lim.converged and sat is not None
    record("5 cluster Tu N=500 and N=inf", ok, f"N=500 {p500:.4f}, limit {lim.probability:.4f} saturated at N={sat} (0.4050+-0.002)")
    assert ok


def test_c6_lifting_equivalence(tu, kangaroo):
    worst = 0.0
    for t, c in ((tu, "C"), (kangaroo, "Parent")):
        for n in (2, 3, 4):
            gap, _, _ = lifted_history_gap(t, query(c, n))
            worst = max(worst, gap)
    ok = worst <= 1e-9
    record("6 plbp = grounded LBP per iteration", ok, f"max gap {worst:.1e} (1e-9)")
    assert ok


def test_c7_lbp_baseline(tu):
    want = {1: 0.5781, 5: 0.8558, 9: 0.9421, 50: 0.9798}
    got = {n: plbp(shatter(tu, query("C", n)), query("C", n)).probability for n in want}
    ok = all(within(got[n], want[n], 0.03) for n in want)
    record("7 LBP baseline Tu (warning only)", ok,
           f"got {fmt(got.values())} want {fmt(want.values())} (0.03)", warn_only=True)
    if not ok:
        warnings.warn("LBP baseline differs from the published row beyond 0.03")


def test_c8_domain_profile(tu):
    q = query("A", 9, evidence=parse_evidence("not C(a0), not D(a1), B(a2), not B(a3)"))
    lo, hi = domain_profile(compact_graph(tu, q), "A", q)
    ok = within(lo, 0.598, 0.01) and hi == 1.0
    record("8 domain profile Tu N=9", ok, f"[{lo:.4f}, {hi:.4f}] want [0.598+-0.01, 1]")
    assert ok


def test_c9_credal(tu_relaxed):
    q10 = query("C", 10)
    a = interval_query(compact_graph(tu_relaxed, q10), None, q10, scheme="l2u").interval
    qu = query("C", Unconstrained(20))
    b = interval_query(compact_graph(tu_relaxed, qu), None, qu, scheme="l2u").interval
    ok = (within(a[0], 0.9179, 0.01) and within(a[1], 0.9917, 0.01)
          and within(b[0], 0.2910, 0.02) and within(b[1], 0.9831, 0.02))
    record("9 credal Tu without P(B|A)", ok,
           f"N=10 [{a[0]:.4f}, {a[1]:.4f}] want [0.9179, 0.9917] (0.01); "
           f"N<=20 [{b[0]:.4f}, {b[1]:.4f}] want [0.2910, 0.9831] (0.02)")
    assert ok


# -- property suites ------------------------------------------------------------


def test_c10a_enumerate_vs_ve():
    cases = random_cases(200, 3, seed=1)
    worst = max(abs(enumerate_query(ground(t, q), q) - ve_query(ground(t, q), q)) for _, t, q in cases)
    ok = worst <= 1e-12
    record("10a enumerate vs VE, 200 fixtures N<=3", ok, f"max diff {worst:.1e} (1e-12)")
    assert ok


def test_c10b_atleast_bruteforce():
    rng = random.Random(10)
    worst = 0.0
    for _ in range(300):
        named = [rng.random() for _ in range(rng.randint(0, 3))]
        m = len(named) + 1
        gen = rng.randint(0, 10)
        k = rng.randint(1, min(4, m + gen))
        role, generic = rng.random(), rng.random()
        probs = [role * x for x in named] + [role * generic] * gen
        got = restriction_aggregate("atleast", role, named, generic, m + gen, m, k)
        worst = max(worst, abs(got - atleast_bruteforce(k, probs)))
    ok = worst <= 1e-10
    record("10b atleast aggregate vs brute force, N-M<=10", ok, f"max diff {worst:.1e} (1e-10)")
    assert ok


def test_c10c_variable_count():
    bad = 0
    cases = random_cases(200, 4, seed=2)
    for _, t, q in cases:
        tn = build_tnetwork(t, local_models(t))
        n = q.domain.n
        bad += len(ground(t, q)) != n * len(tn.unary_nodes()) + n * n * len(tn.roles())
    ok = bad == 0
    record("10c grounded variables = N|C| + N^2|R|", ok, f"{bad} mismatches over {len(cases)} fixtures")
    assert ok


def test_c10d_prune_invariance():
    worst = 0.0
    for _, t, q in random_cases(200, 3, seed=4):
        net = ground(t, q)
        worst = max(worst, abs(ve_query(prune(net, q), q, prune_first=False) - ve_query(net, q, prune_first=False)))
    ok = worst <= 1e-12
    record("10d prune invariance", ok, f"max diff {worst:.1e} (1e-12)")
    assert ok


def test_c10e_credal_soundness(tu_relaxed):
    from crdl.logic import parse_terminology
    checked, escaped = 0, 0
    for t in (tu_relaxed, parse_terminology(TWO_PARAMS)):
        spec = CredalSpec.from_terminology(t)
        for n in (1, 2, 3, 5):
            q = query("C", n)
            for scheme in ("cluster", "l2u"):
                lo, hi = interval_query(compact_graph(t, q), spec, q, scheme=scheme).interval
                for _, models in spec.vertices():
                    p = point_value(t, q, models, scheme)
                    checked += 1
                    escaped += not (lo - 1e-9 <= p <= hi + 1e-9)
    ok = escaped == 0
    record("10e credal bounds contain every endpoint selection", ok, f"{escaped} of {checked} outside")
    assert ok


def test_c10f_cluster_vs_exact():
    fixtures = [(f"random {i}", t, q) for i, (_, t, q) in enumerate(random_cases(100, 4, seed=5))]
    fixtures += [(f"20-node seed {s}", t, q) for s, t, q in twenty_node_cases(200, 4)]
    worst, where, over, used = 0.0, "", 0, 0
    for label, t, q in fixtures:
        if not evidence_possible(t, q):
            continue
        used += 1
        d = abs(cluster_query(compact_graph(t, q), q).probability - ve_query(ground(t, q), q))
        over += d > 0.05
        if d > worst:
            worst, where = d, f"{label}, {q}"
    n1 = max(abs(cluster_query(compact_graph(t, q), q).probability - ve_query(ground(t, q), q))
             for _, t, q in random_cases(100, 1, seed=6, max_nodes=8))
    ok = over == 0 and n1 <= 1e-6
    record("10f cluster vs exact, N<=4", ok,
           f"{over} of {used} fixtures over 0.05, worst {worst:.4f} ({where}); N=1 max diff {n1:.1e} (1e-6)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
