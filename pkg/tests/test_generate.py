import pytest

from crdl.generate import generate, generate_text
from crdl.logic import build_tnetwork, validate


@pytest.mark.parametrize("seed", range(25))
def test_requested_mix(seed):
    t = generate(seed, 20, 15, 2)
    tn = build_tnetwork(t)
    assert len(tn.restrictions()) == 2
    assert len(t.definition_map) == 15
    assert len(tn.concepts()) == 20 - 2
    report = validate(t)
    assert report.passed and report.profile.bayesian


def test_deterministic_by_seed():
    assert generate_text(3, 10, 5, 2) == generate_text(3, 10, 5, 2)
    assert generate_text(3, 10, 5, 2) != generate_text(4, 10, 5, 2)


def test_single_node():
    t = generate(0, 1)
    assert [c for c in t.concept_names()] == ["C0"]


def test_counting_and_roles():
    t = generate(5, 12, 6, 4, roles=3, counting=True)
    assert validate(t).passed


@pytest.mark.parametrize("args,kw", [
    ((0, 0), {}),
    ((0, 3, 3), {}),
    ((0, 3, 0, 1), {}),
    ((0, 4, 1, 1), {"roles": 0}),
])
def test_inconsistent_counts(args, kw):
    with pytest.raises(ValueError):
        generate_text(*args, **kw)
