from importlib import resources

import pytest

from crdl.logic import ConceptAssertion, Exact, Query, parse_terminology

ACCEPTANCE_LINES: list[str] = []


def bundled(name: str):
    return parse_terminology((resources.files("crdl") / "data" / name).read_text(encoding="utf-8"))


def query(concept: str, n, evidence=(), ind: str = "a0") -> Query:
    domain = Exact(n) if isinstance(n, int) else n
    return Query(ConceptAssertion(concept, ind), tuple(evidence), domain)


@pytest.fixture(scope="session")
def tu():
    return bundled("tu.crl")


@pytest.fixture(scope="session")
def kangaroo():
    return bundled("kangaroo.crl")


@pytest.fixture(scope="session")
def tu_relaxed():
    return bundled("tu_relaxed.crl")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
