"""Concept language, terminologies, queries and the .crl parser.

A terminology is stored close to its source: definitions ``C = D``,
inclusions ``C < D`` and probabilistic assessments, one object per source
line.  :func:`local_models` turns it into one local model per concept and
role name, which is what grounding and the engines consume.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Iterator, Union


class CrdlError(Exception):
    """Base class for all errors raised by the package."""


class ParseError(CrdlError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class CycleDetected(CrdlError):
    def __init__(self, cycle: list):
        self.cycle = cycle
        super().__init__("cyclic terminology: " + " -> ".join(str(n) for n in cycle))


class ValidationError(CrdlError):
    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"{code}: {detail}" for code, detail in violations))


class UnsupportedConstruct(CrdlError):
    """The chosen engine cannot handle a construct present in the terminology."""


class ResourceLimit(CrdlError):
    """An exact computation would exceed its size guard."""


# ---------------------------------------------------------------------------
# concept expressions


@dataclass(frozen=True)
class RoleRef:
    name: str
    inverted: bool = False

    def __str__(self) -> str:
        return self.name + ("-" if self.inverted else "")


@dataclass(frozen=True)
class ConceptName:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Top:
    def __str__(self) -> str:
        return "Top"


@dataclass(frozen=True)
class Bottom:
    def __str__(self) -> str:
        return "Bottom"


@dataclass(frozen=True)
class Nominal:
    individual: str

    def __str__(self) -> str:
        return "{" + self.individual + "}"


@dataclass(frozen=True)
class Not:
    arg: "ConceptExpr"


@dataclass(frozen=True)
class And:
    left: "ConceptExpr"
    right: "ConceptExpr"


@dataclass(frozen=True)
class Or:
    left: "ConceptExpr"
    right: "ConceptExpr"


@dataclass(frozen=True)
class Exists:
    role: RoleRef
    filler: "ConceptExpr"


@dataclass(frozen=True)
class Forall:
    role: RoleRef
    filler: "ConceptExpr"


@dataclass(frozen=True)
class AtLeast:
    k: int
    role: RoleRef
    filler: "ConceptExpr"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("atleast needs k >= 1")


@dataclass(frozen=True)
class AtMost:
    k: int
    role: RoleRef
    filler: "ConceptExpr"

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("atmost needs k >= 0")


@dataclass(frozen=True)
class Exactly:
    k: int
    role: RoleRef
    filler: "ConceptExpr"

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("exactly needs k >= 0")


ConceptExpr = Union[
    ConceptName, Top, Bottom, Nominal, Not, And, Or, Exists, Forall, AtLeast, AtMost, Exactly
]
RESTRICTIONS = (Exists, Forall, AtLeast, AtMost, Exactly)


@dataclass(frozen=True)
class Role:
    """t-network node for a role name."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Restriction:
    """t-network node for a normalized restriction.

    ``kind`` is ``"exists"``, ``"forall"`` or ``"atleast"``; the filler is a
    concept name or a nominal.  AtMost/Exactly never appear here, they are
    rewritten into negations and conjunctions of AtLeast nodes.
    """

    kind: str
    k: int
    role: RoleRef
    filler: Union[ConceptName, Nominal]

    def __str__(self) -> str:
        if self.kind == "atleast":
            return f"(atleast {self.k} {self.role}.{self.filler})"
        return f"({self.kind} {self.role}.{self.filler})"

    @property
    def witness_negated(self) -> bool:
        # forall counts violations r(x,y) & not C(y) and holds iff none exist
        return self.kind == "forall"

    @property
    def threshold(self) -> int:
        return self.k if self.kind == "atleast" else 1


Node = Union[ConceptName, Role, Restriction, Nominal]


def format_expr(e: ConceptExpr, prec: int = 0) -> str:
    if isinstance(e, (ConceptName, Top, Bottom, Nominal)):
        return str(e)
    if isinstance(e, Not):
        return "not " + format_expr(e.arg, 3)
    if isinstance(e, And):
        s = f"{format_expr(e.left, 2)} and {format_expr(e.right, 2)}"
        return f"({s})" if prec > 2 else s
    if isinstance(e, Or):
        s = f"{format_expr(e.left, 1)} or {format_expr(e.right, 1)}"
        return f"({s})" if prec > 1 else s
    if isinstance(e, (Exists, Forall)):
        kw = "exists" if isinstance(e, Exists) else "forall"
        return f"{kw} {e.role}.{format_expr(e.filler, 3)}"
    if isinstance(e, (AtLeast, AtMost, Exactly)):
        kw = type(e).__name__.lower()
        return f"{kw} {e.k} {e.role}.{format_expr(e.filler, 3)}"
    raise TypeError(e)


def subexpressions(e: ConceptExpr) -> Iterator[ConceptExpr]:
    yield e
    if isinstance(e, Not):
        yield from subexpressions(e.arg)
    elif isinstance(e, (And, Or)):
        yield from subexpressions(e.left)
        yield from subexpressions(e.right)
    elif isinstance(e, RESTRICTIONS):
        yield from subexpressions(e.filler)


def normalize(e: ConceptExpr) -> ConceptExpr:
    """Rewrite number restrictions into AtLeast/Exists/Forall restriction nodes."""
    if isinstance(e, (ConceptName, Top, Bottom, Nominal, Restriction)):
        return e
    if isinstance(e, Not):
        return Not(normalize(e.arg))
    if isinstance(e, And):
        return And(normalize(e.left), normalize(e.right))
    if isinstance(e, Or):
        return Or(normalize(e.left), normalize(e.right))
    if isinstance(e, Exists):
        return Restriction("exists", 1, e.role, e.filler)
    if isinstance(e, Forall):
        return Restriction("forall", 1, e.role, e.filler)
    if isinstance(e, AtLeast):
        return Restriction("atleast", e.k, e.role, e.filler)
    if isinstance(e, AtMost):
        return Not(Restriction("atleast", e.k + 1, e.role, e.filler))
    if isinstance(e, Exactly):
        upper = Not(Restriction("atleast", e.k + 1, e.role, e.filler))
        if e.k == 0:
            return upper
        return And(Restriction("atleast", e.k, e.role, e.filler), upper)
    raise TypeError(e)


def expr_leaves(e) -> set:
    """Concept names and restriction nodes a normalized expression directly uses."""
    if isinstance(e, (ConceptName, Restriction)):
        return {e}
    if isinstance(e, Not):
        return expr_leaves(e.arg)
    if isinstance(e, (And, Or)):
        return expr_leaves(e.left) | expr_leaves(e.right)
    return set()


def evaluate(e, value) -> bool:
    """Evaluate a normalized expression; ``value`` maps leaves to booleans."""
    if isinstance(e, (ConceptName, Restriction)):
        return bool(value(e))
    if isinstance(e, Top):
        return True
    if isinstance(e, Bottom):
        return False
    if isinstance(e, Not):
        return not evaluate(e.arg, value)
    if isinstance(e, And):
        return evaluate(e.left, value) and evaluate(e.right, value)
    if isinstance(e, Or):
        return evaluate(e.left, value) or evaluate(e.right, value)
    raise TypeError(f"cannot evaluate {e!r}")


# ---------------------------------------------------------------------------
# terminology


class AssessmentKind(str, enum.Enum):
    CONCEPT_PRIOR = "concept_prior"
    CONCEPT_CONDITIONAL = "concept_conditional"
    ROLE_PRIOR = "role_prior"
    ROLE_HIERARCHY = "role_hierarchy"


@dataclass(frozen=True)
class Assessment:
    kind: AssessmentKind
    subject: str
    lo: float
    hi: float
    condition: ConceptExpr | str | None = None
    negated: bool = False
    line: int = field(default=0, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"bad probability interval [{self.lo}, {self.hi}]")

    @property
    def point(self) -> bool:
        return self.lo == self.hi


@dataclass(frozen=True)
class Terminology:
    definitions: tuple[tuple[str, ConceptExpr], ...] = ()
    inclusions: tuple[tuple[str, ConceptExpr], ...] = ()
    assessments: tuple[Assessment, ...] = ()
    roles: frozenset[str] = frozenset()
    synthetic: frozenset[str] = frozenset()

    @property
    def definition_map(self) -> dict[str, ConceptExpr]:
        return dict(self.definitions)

    def concept_names(self) -> list[str]:
        """All concept names, in order of first appearance."""
        seen: dict[str, None] = {}

        def visit(e):
            for s in subexpressions(e):
                if isinstance(s, ConceptName):
                    seen.setdefault(s.name)

        for name, e in self.definitions:
            seen.setdefault(name)
            visit(e)
        for name, e in self.inclusions:
            seen.setdefault(name)
            visit(e)
        for a in self.assessments:
            if a.kind in (AssessmentKind.CONCEPT_PRIOR, AssessmentKind.CONCEPT_CONDITIONAL):
                seen.setdefault(a.subject)
                if isinstance(a.condition, (ConceptName, Not, And, Or, Top, Bottom) + RESTRICTIONS):
                    visit(a.condition)
        return list(seen)

    def role_names(self) -> list[str]:
        seen: dict[str, None] = {}
        for a in self.assessments:
            if a.kind in (AssessmentKind.ROLE_PRIOR, AssessmentKind.ROLE_HIERARCHY):
                seen.setdefault(a.subject)
                if a.condition is not None:
                    seen.setdefault(str(a.condition))
        for _, e in self.definitions + self.inclusions:
            for s in subexpressions(e):
                if isinstance(s, RESTRICTIONS):
                    seen.setdefault(s.role.name)
        for r in sorted(self.roles):
            seen.setdefault(r)
        return list(seen)

    def nominals(self) -> list[str]:
        seen: dict[str, None] = {}
        for _, e in self.definitions + self.inclusions:
            for s in subexpressions(e):
                if isinstance(s, Nominal):
                    seen.setdefault(s.individual)
        for a in self.assessments:
            if isinstance(a.condition, (Not, And, Or) + RESTRICTIONS):
                for s in subexpressions(a.condition):
                    if isinstance(s, Nominal):
                        seen.setdefault(s.individual)
        return list(seen)

    def has_inverse_roles(self) -> bool:
        for _, e in self.definitions + self.inclusions:
            for s in subexpressions(e):
                if isinstance(s, RESTRICTIONS) and s.role.inverted:
                    return True
        return False

    def without(self, predicate) -> "Terminology":
        """Copy with the assessments matching ``predicate`` removed."""
        kept = tuple(a for a in self.assessments if not predicate(a))
        return Terminology(self.definitions, self.inclusions, kept, self.roles, self.synthetic)

    def replace_assessments(self, assessments: Iterable[Assessment]) -> "Terminology":
        return Terminology(
            self.definitions, self.inclusions, tuple(assessments), self.roles, self.synthetic
        )


# ---------------------------------------------------------------------------
# abox and queries


@dataclass(frozen=True)
class ConceptAssertion:
    concept: str
    individual: str
    positive: bool = True

    def __str__(self) -> str:
        return ("not " if not self.positive else "") + f"{self.concept}({self.individual})"


@dataclass(frozen=True)
class RoleAssertion:
    role: str
    subject: str
    object: str
    positive: bool = True

    def __str__(self) -> str:
        return ("not " if not self.positive else "") + f"{self.role}({self.subject},{self.object})"


Assertion = Union[ConceptAssertion, RoleAssertion]


@dataclass(frozen=True)
class Exact:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("domain size must be positive")

    def __str__(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class Infinite:
    def __str__(self) -> str:
        return "inf"


@dataclass(frozen=True)
class Range:
    lo: int
    hi: int

    def __post_init__(self):
        if not 1 <= self.lo <= self.hi:
            raise ValueError("bad domain range")

    def __str__(self) -> str:
        return f"{self.lo}..{self.hi}"


@dataclass(frozen=True)
class Unconstrained:
    n_max: int

    def __str__(self) -> str:
        return f"le:{self.n_max}"


DomainSpec = Union[Exact, Infinite, Range, Unconstrained]


@dataclass(frozen=True)
class Query:
    target: ConceptAssertion
    evidence: tuple[Assertion, ...] = ()
    domain: DomainSpec = Exact(1)

    def named_individuals(self, tbox: Terminology | None = None) -> list[str]:
        """Named individuals, target individual first."""
        seen: dict[str, None] = {self.target.individual: None}
        for a in self.evidence:
            if isinstance(a, ConceptAssertion):
                seen.setdefault(a.individual)
            else:
                seen.setdefault(a.subject)
                seen.setdefault(a.object)
        if tbox is not None:
            for c in tbox.nominals():
                seen.setdefault(c)
        return list(seen)

    def with_domain(self, domain: DomainSpec) -> "Query":
        return Query(self.target, self.evidence, domain)

    def __str__(self) -> str:
        s = f"P({self.target}"
        if self.evidence:
            s += " | " + ", ".join(str(e) for e in self.evidence)
        return s + ")"


# ---------------------------------------------------------------------------
# tokenizer and parser

_ALIASES = {"⊑": "<", "≡": "=", "¬": "not", "⊓": "and", "⊔": "or", "∃": "exists", "∀": "forall", "⊤": "Top", "⊥": "Bottom"}
_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<sym>[()|=<,\[\].{}\-]|[⊑≡¬⊓⊔∃∀⊤⊥]))"
)
_KEYWORDS = {"not", "and", "or", "exists", "forall", "atleast", "atmost", "exactly", "in", "Top", "Bottom"}
_AUX_PREFIX = "_aux"


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(text: str, lineno: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[col - 1]!r}", lineno, col)
        kind = m.lastgroup
        tok = m.group(kind)
        col = m.start(kind) + 1
        if kind == "sym" and tok in _ALIASES:
            tok = _ALIASES[tok]
            kind = "name" if tok.isalpha() else "sym"
        if kind == "name" and tok in _KEYWORDS:
            kind = "kw"
        toks.append(_Tok(kind, tok, col))
        pos = m.end()
    return toks


class _LineParser:
    def __init__(self, toks: list[_Tok], lineno: int, owner: "_Parser"):
        self.toks = toks
        self.i = 0
        self.lineno = lineno
        self.owner = owner

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, msg: str) -> ParseError:
        tok = self.peek()
        col = tok.col if tok else (self.toks[-1].col + len(self.toks[-1].text) if self.toks else 1)
        return ParseError(msg, self.lineno, col)

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text and tok.kind in ("sym", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            found = self.peek().text if self.peek() else "end of line"
            raise self.error(f"expected {text!r}, found {found!r}")

    def name(self) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "name":
            raise self.error("expected a name")
        self.i += 1
        return tok.text

    def number(self) -> float:
        tok = self.peek()
        if tok is None or tok.kind != "num":
            raise self.error("expected a number")
        self.i += 1
        return float(tok.text)

    def integer(self) -> int:
        tok = self.peek()
        if tok is None or tok.kind != "num" or not tok.text.isdigit():
            raise self.error("expected a non-negative integer")
        self.i += 1
        return int(tok.text)

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    # expression grammar: or > and > not/restriction > atom
    def expr(self) -> ConceptExpr:
        e = self.conj()
        while self.accept("or"):
            e = Or(e, self.conj())
        return e

    def conj(self) -> ConceptExpr:
        e = self.unary()
        while self.accept("and"):
            e = And(e, self.unary())
        return e

    def role(self) -> RoleRef:
        name = self.name()
        inverted = self.accept("-")
        self.owner.role_uses.add(name)
        return RoleRef(name, inverted)

    def filler(self) -> ConceptExpr:
        tok = self.peek()
        if tok is not None and tok.text == "{":
            self.i += 1
            ind = self.name()
            self.expect("}")
            return Nominal(ind)
        e = self.unary()
        if isinstance(e, ConceptName):
            return e
        return self.owner.aux_for(e)

    def unary(self) -> ConceptExpr:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of expression")
        if self.accept("not"):
            return Not(self.unary())
        for kw, cls in (("exists", Exists), ("forall", Forall)):
            if self.accept(kw):
                r = self.role()
                self.expect(".")
                return cls(r, self.filler())
        for kw, cls in (("atleast", AtLeast), ("atmost", AtMost), ("exactly", Exactly)):
            if self.accept(kw):
                k = self.integer()
                if cls is AtLeast and k < 1:
                    raise ParseError("atleast needs k >= 1", self.lineno, tok.col)
                r = self.role()
                self.expect(".")
                return cls(k, r, self.filler())
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("Top"):
            return Top()
        if self.accept("Bottom"):
            return Bottom()
        if tok.text == "{":
            raise self.error("nominals are only allowed as restriction fillers")
        return ConceptName(self.name())


@dataclass
class _RawAssessment:
    subject: str
    condition: ConceptExpr | None
    negated: bool
    lo: float
    hi: float
    line: int


class _Parser:
    def __init__(self):
        self.role_uses: set[str] = set()
        self.declared_roles: set[str] = set()
        self.definitions: list[tuple[str, ConceptExpr]] = []
        self.inclusions: list[tuple[str, ConceptExpr]] = []
        self.raw: list[_RawAssessment] = []
        self.aux: dict[ConceptExpr, str] = {}
        self.aux_defs: list[tuple[str, ConceptExpr]] = []
        self.names_seen: set[str] = set()

    def aux_for(self, e: ConceptExpr) -> ConceptName:
        if e not in self.aux:
            name = f"{_AUX_PREFIX}{len(self.aux) + 1}"
            self.aux[e] = name
            self.aux_defs.append((name, e))
        return ConceptName(self.aux[e])

    def probability(self, p: _LineParser) -> tuple[float, float]:
        start = p.peek()
        if p.accept("="):
            v = p.number()
            lo = hi = v
        elif p.accept("in"):
            p.expect("[")
            lo = p.number()
            p.expect(",")
            hi = p.number()
            p.expect("]")
        else:
            raise p.error("expected '=' or 'in'")
        col = start.col if start else 1
        for v in (lo, hi):
            if not 0.0 <= v <= 1.0 or math.isnan(v):
                raise ParseError(f"probability {v} out of range [0, 1]", p.lineno, col)
        if lo > hi:
            raise ParseError(f"interval [{lo}, {hi}] has lo > hi", p.lineno, col)
        return lo, hi

    def line(self, text: str, lineno: int) -> None:
        toks = _tokenize(text, lineno)
        if not toks:
            return
        p = _LineParser(toks, lineno, self)
        first = toks[0]
        if first.kind == "name" and first.text == "role" and len(toks) > 1 and toks[1].kind == "name":
            p.i = 1
            self.declared_roles.add(p.name())
            while p.accept(","):
                self.declared_roles.add(p.name())
        elif first.kind == "name" and first.text == "P" and len(toks) > 1 and toks[1].text == "(":
            p.i = 2
            subject = p.name()
            condition = None
            negated = False
            if p.accept("|"):
                cond = p.expr()
                if isinstance(cond, Not) and isinstance(cond.arg, ConceptName):
                    condition, negated = cond.arg, True
                else:
                    condition = cond
            p.expect(")")
            lo, hi = self.probability(p)
            self.raw.append(_RawAssessment(subject, condition, negated, lo, hi, lineno))
        else:
            name = p.name()
            if p.accept("<"):
                self.inclusions.append((name, p.expr()))
            elif p.accept("="):
                self.definitions.append((name, p.expr()))
            else:
                raise p.error("expected '<' or '=' after concept name")
        if not p.at_end():
            raise p.error(f"unexpected token {p.peek().text!r}")

    def build(self) -> Terminology:
        roles = self.role_uses | self.declared_roles
        # role-ness propagates through hierarchy assessments P(r | s)
        changed = True
        while changed:
            changed = False
            for a in self.raw:
                if isinstance(a.condition, ConceptName):
                    c = a.condition.name
                    if a.subject in roles and c not in roles:
                        roles.add(c)
                        changed = True
                    elif c in roles and a.subject not in roles:
                        roles.add(a.subject)
                        changed = True
        assessments = []
        for a in self.raw:
            if a.subject in roles:
                if a.condition is None:
                    kind, cond = AssessmentKind.ROLE_PRIOR, None
                elif isinstance(a.condition, ConceptName) and a.condition.name in roles:
                    kind, cond = AssessmentKind.ROLE_HIERARCHY, a.condition.name
                else:
                    raise ParseError("role assessments may only be conditioned on a role", a.line, 1)
            else:
                if a.condition is None:
                    kind, cond = AssessmentKind.CONCEPT_PRIOR, None
                else:
                    kind, cond = AssessmentKind.CONCEPT_CONDITIONAL, a.condition
            assessments.append(Assessment(kind, a.subject, a.lo, a.hi, cond, a.negated, line=a.line))
        clash = roles & ({n for n, _ in self.definitions} | {n for n, _ in self.inclusions})
        if clash:
            raise ParseError(f"name used both as role and concept: {sorted(clash)}")
        return Terminology(
            definitions=tuple(self.definitions + self.aux_defs),
            inclusions=tuple(self.inclusions),
            assessments=tuple(assessments),
            roles=frozenset(roles),
            synthetic=frozenset(n for n, _ in self.aux_defs),
        )


def parse_terminology(text: str) -> Terminology:
    """Parse .crl source.  Raises :class:`ParseError` with line/column."""
    parser = _Parser()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if line.strip():
            parser.line(line, lineno)
    return parser.build()


def load_terminology(path) -> Terminology:
    with open(path, encoding="utf-8") as fh:
        return parse_terminology(fh.read())


def serialize(t: Terminology) -> str:
    """Render a terminology as .crl text; synthetic names are inlined back."""
    synth = dict((n, e) for n, e in t.definitions if n in t.synthetic)

    def inline(e):
        if isinstance(e, ConceptName) and e.name in synth:
            return inline(synth[e.name])
        if isinstance(e, Not):
            return Not(inline(e.arg))
        if isinstance(e, And):
            return And(inline(e.left), inline(e.right))
        if isinstance(e, Or):
            return Or(inline(e.left), inline(e.right))
        if isinstance(e, (Exists, Forall)):
            return type(e)(e.role, inline(e.filler))
        if isinstance(e, (AtLeast, AtMost, Exactly)):
            return type(e)(e.k, e.role, inline(e.filler))
        return e

    def filler_text(e):
        # non-atomic fillers need parentheses to reparse into the same aux
        if isinstance(e, (Exists, Forall, AtLeast, AtMost, Exactly)):
            kw = type(e).__name__.lower()
            head = f"{kw} {e.k} " if isinstance(e, (AtLeast, AtMost, Exactly)) else f"{kw} "
            f = inline(e.filler)
            inner = format_expr(f) if isinstance(f, (ConceptName, Nominal)) else f"({expr_text(f)})"
            return f"{head}{e.role}.{inner}"
        return None

    def expr_text(e, prec=0):
        if isinstance(e, (Exists, Forall, AtLeast, AtMost, Exactly)):
            return filler_text(e)
        if isinstance(e, Not):
            return "not " + expr_text(e.arg, 3)
        if isinstance(e, And):
            s = f"{expr_text(e.left, 2)} and {expr_text(e.right, 2)}"
            return f"({s})" if prec > 2 else s
        if isinstance(e, Or):
            s = f"{expr_text(e.left, 1)} or {expr_text(e.right, 1)}"
            return f"({s})" if prec > 1 else s
        return format_expr(e)

    lines = []
    declared = sorted(t.roles)
    if declared:
        lines.append("role " + ", ".join(declared))
    for a in t.assessments:
        head = f"P({a.subject}"
        if a.condition is not None:
            cond = a.condition if isinstance(a.condition, str) else expr_text(a.condition)
            head += " | " + ("not " if a.negated else "") + cond
        head += ")"
        val = f" = {a.lo!r}" if a.point else f" in [{a.lo!r}, {a.hi!r}]"
        lines.append(head + val)
    for name, e in t.inclusions:
        lines.append(f"{name} < {expr_text(e)}")
    for name, e in t.definitions:
        if name not in t.synthetic:
            lines.append(f"{name} = {expr_text(e)}")
    return "\n".join(lines) + ("\n" if lines else "")


_ASSERTION = re.compile(
    r"^\s*(?P<neg>not\s+|¬\s*)?(?P<rel>[A-Za-z_][A-Za-z0-9_]*)\s*\(\s*(?P<a>[A-Za-z_][A-Za-z0-9_]*)"
    r"\s*(?:,\s*(?P<b>[A-Za-z_][A-Za-z0-9_]*)\s*)?\)\s*$"
)


def parse_assertion(text: str) -> Assertion:
    m = _ASSERTION.match(text)
    if not m:
        raise ParseError(f"bad assertion {text.strip()!r}")
    positive = m.group("neg") is None
    if m.group("b") is None:
        return ConceptAssertion(m.group("rel"), m.group("a"), positive)
    return RoleAssertion(m.group("rel"), m.group("a"), m.group("b"), positive)


def parse_evidence(text: str) -> tuple[Assertion, ...]:
    """Parse ``"not C(a1), B(a2), r(a0,a1)"``."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return tuple(parse_assertion(p) for p in parts if p.strip())


# ---------------------------------------------------------------------------
# local models: one per concept / role name


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def point(self) -> bool:
        return self.lo == self.hi

    @property
    def value(self) -> float:
        if not self.point:
            raise CrdlError(f"interval [{self.lo}, {self.hi}] is not point-valued")
        return self.lo


VACUOUS = Interval(0.0, 1.0)


@dataclass(frozen=True)
class DefinitionModel:
    expr: ConceptExpr  # normalized


@dataclass(frozen=True)
class PriorModel:
    p: Interval


@dataclass(frozen=True)
class ConditionalModel:
    """P(child | cond) and P(child | not cond); ``cond`` is a normalized expression
    for concepts and a role name for role hierarchies."""

    cond: object
    p_true: Interval
    p_false: Interval


LocalModel = Union[DefinitionModel, PriorModel, ConditionalModel]


@dataclass
class LocalModels:
    concepts: dict[str, LocalModel]
    roles: dict[str, LocalModel]
    violations: list[tuple[str, str]]  # hard errors
    notes: list[tuple[str, str]]  # uniqueness failures (credal profile)


def local_models(t: Terminology) -> LocalModels:
    concepts: dict[str, LocalModel] = {}
    roles: dict[str, LocalModel] = {}
    hard: list[tuple[str, str]] = []
    soft: list[tuple[str, str]] = []
    role_names = set(t.role_names())

    defs: dict[str, ConceptExpr] = {}
    for name, e in t.definitions:
        if name in defs:
            hard.append(("conflict", f"{name} has two definitions"))
        defs[name] = e
    incl: dict[str, list[ConceptExpr]] = {}
    for name, e in t.inclusions:
        incl.setdefault(name, []).append(e)

    by_subject: dict[str, list[Assessment]] = {}
    for a in t.assessments:
        by_subject.setdefault(a.subject, []).append(a)
        if not a.point:
            soft.append(("interval", f"P({a.subject}{'|' + str(a.condition) if a.condition else ''}) is interval-valued"))

    for name in t.concept_names():
        ass = by_subject.get(name, [])
        if name in defs:
            if ass or name in incl:
                hard.append(("conflict", f"{name} has both a definition and other specifications"))
            concepts[name] = DefinitionModel(normalize(defs[name]))
            continue
        priors = [a for a in ass if a.kind == AssessmentKind.CONCEPT_PRIOR]
        conds = [a for a in ass if a.kind == AssessmentKind.CONCEPT_CONDITIONAL]
        if len(priors) > 1:
            hard.append(("duplicate", f"{name} has {len(priors)} prior assessments"))
        if priors and (conds or name in incl):
            hard.append(("conflict", f"{name} has both a prior and conditional/inclusion specifications"))
        if priors:
            concepts[name] = PriorModel(Interval(priors[0].lo, priors[0].hi))
            continue
        include_expr = None
        if name in incl:
            parts = incl[name]
            include_expr = parts[0]
            for extra in parts[1:]:
                include_expr = And(include_expr, extra)
        conditions = {a.condition for a in conds}
        if len(conditions) > 1:
            hard.append(("conflict", f"{name} is conditioned on different concepts"))
            continue
        cond = next(iter(conditions)) if conditions else include_expr
        if cond is None:
            soft.append(("unspecified", f"concept {name} has no specification; P({name}) in [0, 1]"))
            concepts[name] = PriorModel(VACUOUS)
            continue
        if include_expr is not None and conds and include_expr != cond:
            hard.append(("conflict", f"{name}: inclusion and conditional assessments use different conditions"))
            continue
        if not isinstance(cond, ConceptName):
            soft.append(("complex-condition", f"{name} is conditioned on the complex concept {format_expr(cond)}"))
        pos = [a for a in conds if not a.negated]
        neg = [a for a in conds if a.negated]
        if len(pos) > 1 or len(neg) > 1:
            hard.append(("duplicate", f"{name} has duplicate conditional assessments"))
        p_true = Interval(pos[0].lo, pos[0].hi) if pos else VACUOUS
        if include_expr is not None:
            if neg and neg[0].hi > 0.0:
                hard.append(("conflict", f"{name} < {format_expr(include_expr)} forces P({name}|not ...) = 0"))
            p_false = Interval(0.0, 0.0)
        else:
            p_false = Interval(neg[0].lo, neg[0].hi) if neg else VACUOUS
        if not pos:
            soft.append(("unspecified", f"P({name} | {format_expr(cond)}) unspecified; taken as [0, 1]"))
        if include_expr is None and not neg:
            soft.append(("unspecified", f"P({name} | not {format_expr(cond)}) unspecified; taken as [0, 1]"))
        concepts[name] = ConditionalModel(normalize(cond), p_true, p_false)

    for name in t.role_names():
        ass = by_subject.get(name, [])
        priors = [a for a in ass if a.kind == AssessmentKind.ROLE_PRIOR]
        hier = [a for a in ass if a.kind == AssessmentKind.ROLE_HIERARCHY]
        if len(priors) > 1:
            hard.append(("duplicate", f"role {name} has {len(priors)} prior assessments"))
        if priors and hier:
            hard.append(("conflict", f"role {name} has both a prior and hierarchy assessments"))
        if priors:
            roles[name] = PriorModel(Interval(priors[0].lo, priors[0].hi))
        elif hier:
            supers = {a.condition for a in hier}
            if len(supers) > 1:
                hard.append(("conflict", f"role {name} has several super-roles"))
                continue
            pos = [a for a in hier if not a.negated]
            neg = [a for a in hier if a.negated]
            if len(pos) > 1 or len(neg) > 1:
                hard.append(("duplicate", f"role {name} has duplicate hierarchy assessments"))
            if not pos or not neg:
                soft.append(("unspecified", f"role {name} hierarchy pair incomplete; missing side taken as [0, 1]"))
            roles[name] = ConditionalModel(
                next(iter(supers)),
                Interval(pos[0].lo, pos[0].hi) if pos else VACUOUS,
                Interval(neg[0].lo, neg[0].hi) if neg else VACUOUS,
            )
        else:
            soft.append(("unspecified", f"role {name} has no assessment; P({name}) in [0, 1]"))
            roles[name] = PriorModel(VACUOUS)

    known = set(concepts) | set(role_names)
    for a in t.assessments:
        if a.subject not in known:
            hard.append(("unknown-symbol", f"assessment on undeclared symbol {a.subject}"))
    return LocalModels(concepts, roles, hard, soft)


# ---------------------------------------------------------------------------
# t-network


@dataclass(frozen=True)
class TNetwork:
    """Directly-uses DAG; ``parents[node]`` lists the nodes ``node`` uses."""

    parents: dict
    order: tuple  # topological, parents first

    @property
    def nodes(self) -> tuple:
        return self.order

    def edges(self) -> list[tuple]:
        return [(p, c) for c in self.order for p in self.parents[c]]

    def concepts(self) -> list[ConceptName]:
        return [n for n in self.order if isinstance(n, ConceptName)]

    def restrictions(self) -> list[Restriction]:
        return [n for n in self.order if isinstance(n, Restriction)]

    def roles(self) -> list[Role]:
        return [n for n in self.order if isinstance(n, Role)]

    def nominals(self) -> list[Nominal]:
        return [n for n in self.order if isinstance(n, Nominal)]

    def unary_nodes(self) -> list:
        """Nodes grounded once per individual (the set counted as C in N|C| + N^2|R|)."""
        return [n for n in self.order if not isinstance(n, Role)]

    def ancestors(self, nodes: Iterable) -> set:
        out: set = set()
        stack = list(nodes)
        while stack:
            n = stack.pop()
            if n in out:
                continue
            out.add(n)
            stack.extend(self.parents[n])
        return out


def _model_parents(model: LocalModel) -> list:
    if isinstance(model, DefinitionModel):
        return sorted(expr_leaves(model.expr), key=str)
    if isinstance(model, ConditionalModel):
        if isinstance(model.cond, str):
            return [Role(model.cond)]
        return sorted(expr_leaves(model.cond), key=str)
    return []


def build_tnetwork(t: Terminology, models: LocalModels | None = None) -> TNetwork:
    models = models or local_models(t)
    parents: dict = {}

    def add_restriction(r: Restriction):
        if r in parents:
            return
        parents[r] = [Role(r.role.name), r.filler]
        add_node(Role(r.role.name))
        if isinstance(r.filler, Nominal):
            parents.setdefault(r.filler, [])

    def add_node(n):
        if n in parents:
            return
        if isinstance(n, Restriction):
            add_restriction(n)
            return
        if isinstance(n, Role):
            model = models.roles.get(n.name)
        else:
            model = models.concepts.get(n.name)
        ps = _model_parents(model) if model is not None else []
        parents[n] = ps
        for p in ps:
            add_node(p)

    for name in models.concepts:
        add_node(ConceptName(name))
    for name in models.roles:
        add_node(Role(name))
    # restriction fillers must exist as nodes too
    for n in list(parents):
        for p in parents[n]:
            if p not in parents:
                add_node(p)

    sorter = TopologicalSorter({n: list(ps) for n, ps in parents.items()})
    try:
        order = tuple(sorter.static_order())
    except CycleError as exc:
        raise CycleDetected(list(exc.args[1])) from None
    return TNetwork({n: tuple(ps) for n, ps in parents.items()}, order)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class AssumptionProfile:
    unique_name: bool = True
    confined_domain: bool = True
    uniqueness: bool = True

    @property
    def bayesian(self) -> bool:
        return self.unique_name and self.confined_domain and self.uniqueness

    @property
    def name(self) -> str:
        return "bayesian" if self.bayesian else "credal"


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple[tuple[str, str], ...]
    profile: AssumptionProfile
    notes: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "profile": self.profile.name,
            "assumptions": {
                "unique_name": self.profile.unique_name,
                "confined_domain": self.profile.confined_domain,
                "uniqueness": self.profile.uniqueness,
            },
            "violations": [{"code": c, "detail": d} for c, d in self.violations],
            "notes": [{"code": c, "detail": d} for c, d in self.notes],
        }


def validate(t: Terminology, q: Query | None = None) -> ValidationReport:
    """Check well-formedness and which parts of the Bayesian assumption hold.

    Hard violations make ``passed`` false; interval assessments, missing
    specifications and non-exact domains only downgrade the profile.
    """
    models = local_models(t)
    hard = list(models.violations)
    notes = list(models.notes)
    try:
        build_tnetwork(t, models)
    except CycleDetected as exc:
        hard.append(("cycle", str(exc)))
    confined = True
    if q is not None:
        concepts = set(models.concepts)
        roles = set(models.roles)
        for a in (q.target,) + tuple(q.evidence):
            if isinstance(a, ConceptAssertion) and a.concept not in concepts:
                hard.append(("unknown-symbol", f"assertion {a} uses unknown concept {a.concept}"))
            if isinstance(a, RoleAssertion) and a.role not in roles:
                hard.append(("unknown-symbol", f"assertion {a} uses unknown role {a.role}"))
        named = q.named_individuals(t)
        for c in t.nominals():
            if c not in named:
                hard.append(("nominal", f"nominal {{{c}}} is not a named individual"))
        confined = isinstance(q.domain, Exact)
        n_min = {Exact: lambda d: d.n, Range: lambda d: d.hi, Unconstrained: lambda d: d.n_max}
        if type(q.domain) in n_min and n_min[type(q.domain)](q.domain) < len(named):
            hard.append(("domain-too-small", f"domain {q.domain} smaller than {len(named)} named individuals"))
        if not confined:
            notes.append(("domain", f"domain {q.domain} is not an exact size"))
    uniqueness = not any(code in ("interval", "unspecified", "complex-condition") for code, _ in notes)
    profile = AssumptionProfile(True, confined, uniqueness)
    return ValidationReport(not hard, tuple(hard), profile, tuple(notes))


def require_valid(t: Terminology, q: Query | None = None) -> ValidationReport:
    report = validate(t, q)
    if not report.passed:
        raise ValidationError(list(report.violations))
    return report
