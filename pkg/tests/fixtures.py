"""Seeded random (terminology, query) pairs for the property suites."""

import random

from crdl.generate import generate_text
from crdl.logic import ConceptAssertion, Exact, Query, parse_terminology


def random_cases(count: int, max_n: int, seed: int = 0, *, max_nodes: int = 5, evidence: bool = True):
    rng = random.Random(seed)
    out = []
    s = 0
    while len(out) < count:
        s += 1
        nodes = rng.randint(1, max_nodes)
        det = rng.randint(0, nodes - 1)
        restr = rng.randint(0, min(2, nodes - 1 - det)) if det else 0
        try:
            text = generate_text(seed * 100_000 + s, nodes, det, restr)
        except ValueError:
            continue
        t = parse_terminology(text)
        names = [c for c in t.concept_names() if c.startswith("C")]
        n = rng.randint(1, max_n)
        ev = ()
        if evidence and n > 1 and rng.random() < 0.5:
            ev = (ConceptAssertion("C0", "a1", rng.random() < 0.5),)
        q = Query(ConceptAssertion(rng.choice(names), "a0"), ev, Exact(n))
        out.append((text, t, q))
    return out


def twenty_node_cases(count: int = 200, max_n: int = 4):
    """20-node terminologies with 15 definitions and 2 restrictions, one query each.

    The domain size cycles through 1..max_n; half of the queries with N > 1
    carry one evidence assertion on a1.
    """
    out = []
    for seed in range(count):
        rng = random.Random(seed)
        t = parse_terminology(generate_text(seed, 20, 15, 2))
        names = [c for c in t.concept_names() if c.startswith("C")]
        n = 1 + seed % max_n
        ev = ()
        if n > 1 and rng.random() < 0.5:
            ev = (ConceptAssertion(rng.choice(names), "a1", rng.random() < 0.5),)
        out.append((seed, t, Query(ConceptAssertion(rng.choice(names), "a0"), ev, Exact(n))))
    return out
