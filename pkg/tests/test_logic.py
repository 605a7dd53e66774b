import pytest

from crdl.logic import (
    AtLeast, ConceptAssertion, CycleDetected, Forall, Not, Or,
    ParseError, Range, RoleAssertion, Unconstrained, ValidationError, build_tnetwork,
    local_models, parse_assertion, parse_evidence, parse_terminology, require_valid,
    serialize, validate,
)
from conftest import query


def test_parse_kangaroo_symbols(kangaroo):
    names = set(kangaroo.concept_names())
    assert {"Animal", "Rational", "Human", "Beast", "Parent", "Kangaroo", "MaternityKangaroo"} <= names
    assert kangaroo.role_names() == ["hasChild"]


def test_parse_expression_shapes():
    t = parse_terminology("P(A)=0.5\nP(r)=0.2\nE = atleast 2 r.A or forall r.(not A)\n")
    e = t.definition_map["E"]
    assert isinstance(e, Or)
    left, right = e.left, e.right
    assert isinstance(left, AtLeast) and left.k == 2
    # complex fillers are named by an auxiliary definition
    assert isinstance(right, Forall)
    aux = right.filler.name
    assert aux in t.synthetic and isinstance(t.definition_map[aux], Not)


def test_unicode_aliases_match_ascii():
    a = parse_terminology("P(A)=0.9\nP(r)=0.3\nD ≡ ∀r.A\nC ≡ ¬A ⊔ ∃r.D\n")
    b = parse_terminology("P(A)=0.9\nP(r)=0.3\nD = forall r.A\nC = not A or exists r.D\n")
    assert a.definition_map == b.definition_map


@pytest.mark.parametrize("name", ["tu", "kangaroo", "tu_relaxed"])
def test_serialize_round_trip(name, request):
    t = request.getfixturevalue(name)
    again = parse_terminology(serialize(t))
    assert again.definition_map == t.definition_map
    assert local_models(again) == local_models(t)


@pytest.mark.parametrize("text", [
    "P(A) = 1.5\n",
    "P(A = 0.3\n",
    "C = A and\n",
    "C = exists .A\n",
])
def test_parse_errors_carry_location(text):
    with pytest.raises(ParseError) as err:
        parse_terminology(text)
    assert err.value.line == 1


def test_assertions_and_evidence():
    assert parse_assertion("C(a0)") == ConceptAssertion("C", "a0")
    assert parse_assertion("not B(a1)") == ConceptAssertion("B", "a1", False)
    assert parse_assertion("r(a0,a1)") == RoleAssertion("r", "a0", "a1")
    ev = parse_evidence("not C(a0), not D(a1), B(a2), not B(a3)")
    assert [str(e) for e in ev] == ["not C(a0)", "not D(a1)", "B(a2)", "not B(a3)"]


def test_tnetwork_is_acyclic_with_expected_edges(tu):
    tn = build_tnetwork(tu)
    assert {str(c) for c in tn.concepts()} >= {"A", "B", "C", "D"}
    assert len(tn.restrictions()) == 2 and len(tn.roles()) == 1
    edges = {(str(a), str(b)) for a, b in tn.edges()}
    assert ("A", "B") in edges
    assert any(a == "r" for a, _ in edges)


def test_cycle_detected():
    t = parse_terminology("P(r)=0.3\nA = exists r.B\nB = forall r.A\n")
    with pytest.raises(CycleDetected):
        build_tnetwork(t)
    report = validate(t)
    assert not report.passed
    assert report.violations[0][0] == "cycle"


def test_profiles(tu, kangaroo, tu_relaxed):
    assert validate(kangaroo).profile.bayesian
    assert validate(tu).to_dict()["profile"] == "bayesian"
    relaxed = validate(tu_relaxed)
    assert relaxed.passed and relaxed.to_dict()["profile"] == "credal"
    assert not relaxed.profile.uniqueness


def test_duplicate_assessment_is_hard():
    report = validate(parse_terminology("P(A)=0.3\nP(A)=0.4\n"))
    assert not report.passed
    with pytest.raises(ValidationError):
        require_valid(parse_terminology("P(A)=0.3\nP(A)=0.4\n"))


def test_interval_assessment_downgrades_profile():
    t = parse_terminology("P(A) in [0.2, 0.4]\nP(r)=0.5\nB = exists r.A\n")
    report = validate(t)
    assert report.passed and not report.profile.bayesian


def test_domain_specs_and_confinement(tu):
    assert validate(tu, query("C", 5)).profile.bayesian
    assert not validate(tu, query("C", Range(2, 5))).profile.confined_domain
    assert not validate(tu, query("C", Unconstrained(20))).profile.bayesian
    small = validate(tu, query("C", 1, evidence=[ConceptAssertion("B", "a1")]))
    assert not small.passed


def test_unknown_symbol_in_query(tu):
    assert not validate(tu, query("Nope", 3)).passed


def test_shared_restriction_is_one_node():
    t = parse_terminology("P(A)=0.5\nP(r)=0.5\nB = exists r.A\nC = exists r.A and A\n")
    tn = build_tnetwork(t)
    # the same restriction used twice is one t-network node
    assert [str(r) for r in tn.restrictions()] == ["(exists r.A)"]
