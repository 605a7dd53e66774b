"""Grounding terminologies into Bayesian networks of indicator variables.

Every unary t-network node (concept name, restriction, nominal) is grounded
once per individual and every role once per ordered pair, so a domain of
size N gives ``N*|C| + N**2*|R|`` variables before pruning.  Deterministic
CPTs stay symbolic: a restriction at ``x`` keeps the list of
``(role variable, filler)`` pairs it counts over instead of a table.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .logic import (
    ConceptAssertion,
    ConceptName,
    CrdlError,
    DefinitionModel,
    Exact,
    LocalModels,
    Nominal,
    PriorModel,
    Query,
    Restriction,
    Role,
    TNetwork,
    Terminology,
    build_tnetwork,
    evaluate,
    expr_leaves,
    local_models,
    require_valid,
)

GENERIC_PREFIX = "#"
B_INDIVIDUAL = "#b"
X_INDIVIDUAL = "#x"
Y_INDIVIDUAL = "#y"


class DomainTooSmall(CrdlError):
    pass


@dataclass(frozen=True)
class GroundedVariable:
    """Binary indicator of ``relation(*args)``.

    ``multiplicity`` only differs from 1 for the parameterized variables of a
    shattered network, where one variable stands for many groundings.
    """

    relation: object
    args: tuple[str, ...]
    multiplicity: int = field(default=1, compare=False)

    def __str__(self) -> str:
        return f"{self.relation}({','.join(self.args)})"

    @property
    def sort_key(self) -> tuple:
        return (str(self.relation), self.args)


Filler = Union[GroundedVariable, bool]


@dataclass(frozen=True)
class PriorCPT:
    p: float
    parents: tuple = ()
    deterministic = False

    def prob_true(self, value: Mapping) -> float:
        return self.p


@dataclass(frozen=True)
class ConditionalCPT:
    """Two-row table: ``p_true`` when ``cond`` holds, ``p_false`` otherwise.

    ``cond`` is a normalized concept expression grounded at ``individual``,
    or a role variable for role hierarchies.
    """

    cond: object
    individual: str | None
    p_true: float
    p_false: float
    parents: tuple = ()
    deterministic = False

    def holds(self, value: Mapping) -> bool:
        if isinstance(self.cond, GroundedVariable):
            return bool(value[self.cond])
        return evaluate(self.cond, lambda n: value[GroundedVariable(n, (self.individual,))])

    def prob_true(self, value: Mapping) -> float:
        return self.p_true if self.holds(value) else self.p_false


@dataclass(frozen=True)
class DefinitionCPT:
    expr: object
    individual: str
    parents: tuple = ()
    deterministic = True

    def prob_true(self, value: Mapping) -> float:
        ok = evaluate(self.expr, lambda n: value[GroundedVariable(n, (self.individual,))])
        return 1.0 if ok else 0.0


@dataclass(frozen=True)
class RestrictionCPT:
    """Threshold count over ``pairs``.

    A pair ``(role, filler)`` is a witness when the role holds and the filler
    holds (exists/atleast) or fails (forall).  The child is true iff the
    number of witnesses reaches ``threshold``; for forall it is negated.
    """

    restriction: Restriction
    pairs: tuple[tuple[GroundedVariable, Filler], ...]
    parents: tuple = ()
    deterministic = True

    @property
    def threshold(self) -> int:
        return self.restriction.threshold

    @property
    def negated(self) -> bool:
        return self.restriction.witness_negated

    def witness(self, role_value: int, filler_value: int) -> bool:
        if not role_value:
            return False
        return (not filler_value) if self.negated else bool(filler_value)

    def prob_true(self, value: Mapping) -> float:
        count = 0
        for role, filler in self.pairs:
            f = filler if isinstance(filler, bool) else value[filler]
            count += self.witness(value[role], f)
        reached = count >= self.threshold
        return 1.0 if reached != self.negated else 0.0


@dataclass(frozen=True)
class ConstantCPT:
    value: int
    parents: tuple = ()
    deterministic = True

    def prob_true(self, value: Mapping) -> float:
        return float(self.value)


CPT = Union[PriorCPT, ConditionalCPT, DefinitionCPT, RestrictionCPT, ConstantCPT]


def cpt_prob(cpt, child_value: int, value: Mapping) -> float:
    p = cpt.prob_true(value)
    return p if child_value else 1.0 - p


@dataclass
class GroundedNetwork:
    variables: list[GroundedVariable]
    cpts: dict[GroundedVariable, CPT]
    evidence: dict[GroundedVariable, int]
    n: int
    individuals: list[str]  # named individuals, query individual first
    target: GroundedVariable | None = None
    inverse_aliases: dict[tuple[str, str, str], GroundedVariable] = field(default_factory=dict)
    domain: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.variables)

    def children(self) -> dict[GroundedVariable, list[GroundedVariable]]:
        out: dict = {v: [] for v in self.variables}
        for v in self.variables:
            for p in self.cpts[v].parents:
                out[p].append(v)
        return out

    def topological(self) -> list[GroundedVariable]:
        indeg = {v: len(set(self.cpts[v].parents)) for v in self.variables}
        kids = self.children()
        queue = deque(v for v in self.variables if indeg[v] == 0)
        order = []
        while queue:
            v = queue.popleft()
            order.append(v)
            for c in kids[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if len(order) != len(self.variables):
            raise CrdlError("grounded network is cyclic")
        return order

    def variable(self, relation, *args) -> GroundedVariable:
        v = GroundedVariable(relation, tuple(args))
        if v not in self.cpts:
            raise KeyError(str(v))
        return v


def generic_names(count: int, taken=()) -> list[str]:
    taken = set(taken)
    out, i = [], 0
    while len(out) < count:
        i += 1
        name = f"{GENERIC_PREFIX}{i}"
        if name not in taken:
            out.append(name)
    return out


def _role_var(role_name: str, x: str, y: str) -> GroundedVariable:
    return GroundedVariable(Role(role_name), (x, y))


def _restriction_pairs(r: Restriction, x: str, domain: Sequence[str]) -> tuple:
    pairs = []
    for y in domain:
        role = _role_var(r.role.name, y, x) if r.role.inverted else _role_var(r.role.name, x, y)
        if isinstance(r.filler, Nominal):
            filler: Filler = y == r.filler.individual
        else:
            filler = GroundedVariable(r.filler, (y,))
        pairs.append((role, filler))
    return tuple(pairs)


def _point(interval) -> float:
    if not interval.point:
        raise CrdlError(
            f"interval-valued parameter [{interval.lo}, {interval.hi}]; "
            "fix endpoints with select_endpoints() or use the credal engine"
        )
    return interval.lo


def ground_unary(node, x: str, models: LocalModels, domain: Sequence[str]) -> CPT:
    """CPT of ``node(x)`` for a unary t-network node."""
    if isinstance(node, Restriction):
        pairs = _restriction_pairs(node, x, domain)
        parents = []
        for role, filler in pairs:
            parents.append(role)
            if isinstance(filler, GroundedVariable):
                parents.append(filler)
        return RestrictionCPT(node, pairs, tuple(dict.fromkeys(parents)))
    if isinstance(node, Nominal):
        return ConstantCPT(int(x == node.individual))
    model = models.concepts[node.name]
    if isinstance(model, PriorModel):
        return PriorCPT(_point(model.p))
    if isinstance(model, DefinitionModel):
        leaves = sorted(expr_leaves(model.expr), key=str)
        return DefinitionCPT(model.expr, x, tuple(GroundedVariable(n, (x,)) for n in leaves))
    leaves = sorted(expr_leaves(model.cond), key=str)
    return ConditionalCPT(
        model.cond, x, _point(model.p_true), _point(model.p_false),
        tuple(GroundedVariable(n, (x,)) for n in leaves),
    )


def ground_role(name: str, x: str, y: str, models: LocalModels) -> CPT:
    model = models.roles[name]
    if isinstance(model, PriorModel):
        return PriorCPT(_point(model.p))
    sup = _role_var(model.cond, x, y)
    return ConditionalCPT(sup, None, _point(model.p_true), _point(model.p_false), (sup,))


def evidence_variable(a) -> GroundedVariable:
    if isinstance(a, ConceptAssertion):
        return GroundedVariable(ConceptName(a.concept), (a.individual,))
    return _role_var(a.role, a.subject, a.object)


def _domain_size(q: Query) -> int:
    if not isinstance(q.domain, Exact):
        raise CrdlError(f"grounding needs an exact domain size, got {q.domain}")
    return q.domain.n


def ground(
    t: Terminology,
    q: Query,
    *,
    generic: Sequence[str] | None = None,
    tnet: TNetwork | None = None,
    models: LocalModels | None = None,
) -> GroundedNetwork:
    """Ground ``t`` over a domain of ``q.domain.n`` individuals.

    The named individuals of the query come first; the remaining elements
    get reserved names ``#1, #2, ...`` (or the names in ``generic``).
    """
    require_valid(t)
    models = models or local_models(t)
    tnet = tnet or build_tnetwork(t, models)
    n = _domain_size(q)
    named = q.named_individuals(t)
    if n < len(named):
        raise DomainTooSmall(f"N={n} is smaller than the {len(named)} named individuals")
    if generic is None:
        generic = generic_names(n - len(named), named)
    domain = list(named) + list(generic)
    if len(domain) != n or len(set(domain)) != n:
        raise CrdlError("generic names must be distinct from the named individuals")

    variables: list[GroundedVariable] = []
    cpts: dict[GroundedVariable, CPT] = {}
    for node in tnet.order:
        if isinstance(node, Role):
            for x in domain:
                for y in domain:
                    v = _role_var(node.name, x, y)
                    variables.append(v)
                    cpts[v] = ground_role(node.name, x, y, models)
        else:
            for x in domain:
                v = GroundedVariable(node, (x,))
                variables.append(v)
                cpts[v] = ground_unary(node, x, models, domain)

    aliases = {}
    if t.has_inverse_roles():
        for r in tnet.restrictions():
            if r.role.inverted:
                for x in domain:
                    for y in domain:
                        aliases[(r.role.name, x, y)] = _role_var(r.role.name, y, x)

    evidence = {}
    for a in q.evidence:
        v = evidence_variable(a)
        if v not in cpts:
            raise CrdlError(f"evidence {a} does not name a grounded variable")
        val = int(a.positive)
        if evidence.get(v, val) != val:
            raise CrdlError(f"contradictory evidence on {v}")
        evidence[v] = val
    target = evidence_variable(q.target)
    return GroundedNetwork(variables, cpts, evidence, n, named, target, aliases, domain)


# ---------------------------------------------------------------------------
# shattered network


@dataclass(frozen=True)
class RestrictionSplit:
    """Decomposition of ``restriction(owner)`` into the owner's own pair,
    one pair per other named individual (and b), and a generic remainder
    standing for ``generic_count`` identical pairs."""

    restriction: Restriction
    owner: str
    own: tuple
    named: tuple
    generic_count: int


@dataclass
class ShatteredNetwork:
    tbox: Terminology
    models: LocalModels
    tnet: TNetwork
    named: list[str]
    n: int
    evidence: tuple
    target: ConceptAssertion
    nodes: tuple  # t-network nodes kept (after pruning)
    slices: dict[str, list[GroundedVariable]]
    cross: list[GroundedVariable]
    splits: dict[tuple[Restriction, str], RestrictionSplit]

    @property
    def m(self) -> int:
        return len(self.named)

    @property
    def generic_count(self) -> int:
        """Number of domain elements outside the named set."""
        return self.n - self.m

    @property
    def concrete_owners(self) -> list[str]:
        return list(self.named) + ([B_INDIVIDUAL] if self.n > self.m else [])

    def variables(self) -> list[GroundedVariable]:
        out = []
        for vs in self.slices.values():
            out.extend(vs)
        return out + list(self.cross)

    def grounded_count(self) -> int:
        return sum(v.multiplicity for v in self.variables())

    def expand(self) -> GroundedNetwork:
        """Ground the full network; generic individuals become ``#b, #x1, #x2, ...``."""
        k = self.n - self.m - 1
        generic = ([B_INDIVIDUAL] if self.n > self.m else []) + [f"{X_INDIVIDUAL}{i}" for i in range(1, k + 1)]
        q = Query(self.target, self.evidence, Exact(self.n))
        return ground(self.tbox, q, generic=generic, models=self.models, tnet=_sub_tnetwork(self.tnet, self.nodes))

    def has_inverse_roles(self) -> bool:
        return any(isinstance(n, Restriction) and n.role.inverted for n in self.nodes)


def _sub_tnetwork(tnet: TNetwork, keep) -> TNetwork:
    keep = set(keep)
    order = tuple(n for n in tnet.order if n in keep)
    return TNetwork({n: tnet.parents[n] for n in order}, order)


def shatter(t: Terminology, q: Query, *, n: int | None = None) -> ShatteredNetwork:
    """Named slices, a slice for the reserved individual b, and a
    parameterized slice for the remaining ``N - M - 1`` individuals."""
    require_valid(t)
    models = local_models(t)
    tnet = build_tnetwork(t, models)
    named = q.named_individuals(t)
    if any(a.startswith(GENERIC_PREFIX) for a in named):
        raise CrdlError(f"individual names starting with {GENERIC_PREFIX!r} are reserved")
    if n is None:
        n = q.domain.n if isinstance(q.domain, Exact) else len(named) + 1
    m = len(named)
    if n < m:
        raise DomainTooSmall(f"N={n} is smaller than the {m} named individuals")
    k = n - m - 1  # size of the parameterized slice
    concrete = list(named) + ([B_INDIVIDUAL] if n > m else [])
    slices: dict[str, list[GroundedVariable]] = {a: [] for a in concrete}
    if k > 0:
        slices[X_INDIVIDUAL] = []
    cross: list[GroundedVariable] = []
    splits = {}
    unary = [nd for nd in tnet.order if not isinstance(nd, Role)]
    roles = [nd for nd in tnet.order if isinstance(nd, Role)]
    for nd in unary:
        for a in concrete:
            slices[a].append(GroundedVariable(nd, (a,)))
        if k > 0:
            slices[X_INDIVIDUAL].append(GroundedVariable(nd, (X_INDIVIDUAL,), k))
    for r in roles:
        for a in concrete:
            for c in concrete:
                slices[a].append(GroundedVariable(r, (a, c)))
            if k > 0:
                slices[a].append(GroundedVariable(r, (a, X_INDIVIDUAL), k))
                cross.append(GroundedVariable(r, (X_INDIVIDUAL, a), k))
        if k > 0:
            slices[X_INDIVIDUAL].append(GroundedVariable(r, (X_INDIVIDUAL, X_INDIVIDUAL), k))
            if k > 1:
                slices[X_INDIVIDUAL].append(GroundedVariable(r, (X_INDIVIDUAL, Y_INDIVIDUAL), k * (k - 1)))
    for r in tnet.restrictions():
        for a in concrete:
            own = _restriction_pairs(r, a, [a])
            others = _restriction_pairs(r, a, [c for c in concrete if c != a])
            splits[(r, a)] = RestrictionSplit(r, a, own, others, max(k, 0))
    return ShatteredNetwork(
        t, models, tnet, named, n, tuple(q.evidence), q.target, tnet.order, slices, cross, splits
    )


# ---------------------------------------------------------------------------
# pruning


def _prune_grounded(net: GroundedNetwork) -> GroundedNetwork:
    target = net.target
    if target in net.evidence:
        cpt = ConstantCPT(net.evidence[target])
        return GroundedNetwork(
            [target], {target: cpt}, {target: net.evidence[target]}, net.n,
            net.individuals, target, {}, net.domain,
        )
    # ancestral set of target and evidence
    anc: set = set()
    stack = [target] + list(net.evidence)
    while stack:
        v = stack.pop()
        if v in anc:
            continue
        anc.add(v)
        stack.extend(net.cpts[v].parents)
    # moral graph over the ancestral set; evidence nodes block paths
    adj: dict = {v: set() for v in anc}
    for v in anc:
        ps = list(dict.fromkeys(net.cpts[v].parents))
        for p in ps:
            adj[v].add(p)
            adj[p].add(v)
        for i, p in enumerate(ps):
            for q in ps[i + 1:]:
                adj[p].add(q)
                adj[q].add(p)
    comp = {target}
    queue = deque([target])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w in comp or w in net.evidence:
                continue
            comp.add(w)
            queue.append(w)
    keep = set(comp)
    for v in comp:
        keep.update(w for w in adj[v] if w in net.evidence)
    cpts = {}
    for v in keep:
        cpt = net.cpts[v]
        if v in net.evidence and not all(p in keep for p in cpt.parents):
            cpt = ConstantCPT(net.evidence[v])
        cpts[v] = cpt
    variables = [v for v in net.variables if v in keep]
    evidence = {v: e for v, e in net.evidence.items() if v in keep}
    aliases = {k: v for k, v in net.inverse_aliases.items() if v in keep}
    return GroundedNetwork(variables, cpts, evidence, net.n, net.individuals, target, aliases, net.domain)


def _prune_shattered(sn: ShatteredNetwork) -> ShatteredNetwork:
    relevant = [ConceptName(sn.target.concept)]
    for a in sn.evidence:
        relevant.append(ConceptName(a.concept) if isinstance(a, ConceptAssertion) else Role(a.role))
    keep = sn.tnet.ancestors(relevant)
    nodes = tuple(nd for nd in sn.nodes if nd in keep)
    slices = {a: [v for v in vs if v.relation in keep] for a, vs in sn.slices.items()}
    cross = [v for v in sn.cross if v.relation in keep]
    splits = {key: s for key, s in sn.splits.items() if key[0] in keep}
    return ShatteredNetwork(
        sn.tbox, sn.models, sn.tnet, sn.named, sn.n, sn.evidence, sn.target, nodes, slices, cross, splits
    )


def prune(net, q: Query | None = None):
    """Drop everything d-separated from the target given the evidence.

    Grounded networks are reduced to the target's component of the moral
    graph of the ancestral set (evidence removed), plus the adjacent
    evidence variables.  Shattered networks keep the t-network ancestors of
    the target and evidence relations.
    """
    if isinstance(net, ShatteredNetwork):
        return _prune_shattered(net)
    if q is not None and net.target is None:
        net.target = evidence_variable(q.target)
    return _prune_grounded(net)
