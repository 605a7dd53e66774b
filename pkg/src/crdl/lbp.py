"""Loopy belief propagation on grounded networks and its parameterized form.

Both engines run the same sum-product update on a *counted* factor graph:
each factor and variable node may stand for a class of interchangeable
groundings.  On a grounded network every count is 1.  For the shattered
network the generic individuals collapse into one class, a restriction
factor sees its generic partners as one group of size N-M (or N-M-1), and
a variable adds the log-odds of a message once per factor instance it
stands for, i.e. the message is raised to the matching power.

Binary messages are stored as P(value = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .counting import restriction_factor_messages
from .exact import _expr_table
from .grounding import (
    ConstantCPT,
    GroundedNetwork,
    GroundedVariable,
    PriorCPT,
    RestrictionCPT,
    ShatteredNetwork,
    evidence_variable,
    ground_role,
    ground_unary,
)
from .logic import (
    LocalModels,
    ConceptName,
    Nominal,
    Query,
    Restriction,
    Role,
    UnsupportedConstruct,
)
from .results import InferenceResult, Schedule

EPS = 1e-12
GENERIC = "#G"
GENERIC_OTHER = "#H"


def _clip(p: float) -> float:
    return min(max(p, EPS), 1.0 - EPS)


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass
class _Factor:
    slots: list  # variable keys
    table: np.ndarray | None = None  # table factors: axes follow slots
    cap: int = 0
    negated: bool = False
    # restriction factors: slot 0 is the child; groups are (role slot, filler slot or bool, size)
    groups: list = field(default_factory=list)


@dataclass
class CountedGraph:
    factors: list[_Factor] = field(default_factory=list)
    edges: dict = field(default_factory=dict)  # var key -> [(factor, slot, vcount)]
    evidence: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)  # var key -> number of groundings

    def add_var(self, key, count: int = 1) -> None:
        self.edges.setdefault(key, [])
        self.counts.setdefault(key, count)

    def add_factor(self, f: _Factor, vcounts: list[int]) -> None:
        idx = len(self.factors)
        self.factors.append(f)
        for s, (key, vc) in enumerate(zip(f.slots, vcounts)):
            if key is None or vc <= 0:
                continue
            self.add_var(key)
            self.edges[key].append((idx, s, vc))


def _table_factor(cpt, child) -> _Factor:
    if isinstance(cpt, (PriorCPT, ConstantCPT)):
        p = cpt.prob_true({})
        return _Factor([child], np.array([1.0 - p, p]))
    f = _expr_table(cpt, child)
    return _Factor(list(f.vars), f.table)


def _restriction_factor(cpt_like: Restriction, child, groups) -> tuple[_Factor, list[int]]:
    """``groups`` holds (role key, filler key or bool, size, role vcount, filler vcount)."""
    slots = [child]
    vcounts = [1]
    fgroups = []
    for role, filler, size, vc_role, vc_filler in groups:
        if size <= 0:
            continue
        slots.append(role)
        vcounts.append(vc_role)
        rs = len(slots) - 1
        if isinstance(filler, bool):
            fgroups.append((rs, filler, size))
        else:
            slots.append(filler)
            vcounts.append(vc_filler)
            fgroups.append((rs, len(slots) - 1, size))
    f = _Factor(slots, None, cpt_like.threshold, cpt_like.witness_negated, fgroups)
    return f, vcounts


# ---------------------------------------------------------------------------
# graph construction


def _barren_pruned(net: GroundedNetwork) -> GroundedNetwork:
    keep: set = set()
    stack = [net.target] + list(net.evidence)
    while stack:
        v = stack.pop()
        if v in keep:
            continue
        keep.add(v)
        stack.extend(net.cpts[v].parents)
    return GroundedNetwork(
        [v for v in net.variables if v in keep],
        {v: net.cpts[v] for v in keep},
        {v: e for v, e in net.evidence.items() if v in keep},
        net.n, net.individuals, net.target, net.inverse_aliases, net.domain,
    )


def grounded_graph(net: GroundedNetwork) -> CountedGraph:
    g = CountedGraph()
    for v in net.variables:
        g.add_var(v)
    for v in net.variables:
        cpt = net.cpts[v]
        if isinstance(cpt, RestrictionCPT):
            groups = [(role, filler, 1, 1, 1) for role, filler in cpt.pairs]
            f, vc = _restriction_factor(cpt.restriction, v, groups)
        else:
            f = _table_factor(cpt, v)
            vc = [1] * len(f.slots)
        g.add_factor(f, vc)
    g.evidence = dict(net.evidence)
    return g


def lift_key(v: GroundedVariable, named) -> GroundedVariable:
    """Class of a grounded variable in the parameterized graph."""
    named = set(named)
    args = []
    first_generic = None
    for a in v.args:
        if a in named:
            args.append(a)
        elif first_generic is None or a == first_generic:
            first_generic = a
            args.append(GENERIC)
        else:
            args.append(GENERIC_OTHER)
    return GroundedVariable(v.relation, tuple(args))


def lifted_graph(sn: ShatteredNetwork, models: LocalModels | None = None) -> CountedGraph:
    if sn.has_inverse_roles():
        raise UnsupportedConstruct(
            "inverse roles are not supported by the parameterized engines; use exact or lbp"
        )
    models = models or sn.models
    named = list(sn.named)
    g_size = sn.n - sn.m
    owners = named + ([GENERIC] if g_size > 0 else [])
    size = {a: 1 for a in named}
    size[GENERIC] = g_size
    graph = CountedGraph()

    def role_pairs():
        pairs = []
        for x in owners:
            for y in owners:
                if x == GENERIC and y == GENERIC:
                    pairs.append((GENERIC, GENERIC, g_size))
                    if g_size > 1:
                        pairs.append((GENERIC, GENERIC_OTHER, g_size * (g_size - 1)))
                else:
                    pairs.append((x, y, size[x] * size[y]))
        return pairs

    for node in sn.nodes:
        if isinstance(node, Role):
            for x, y, cnt in role_pairs():
                key = GroundedVariable(node, (x, y))
                graph.add_var(key, cnt)
                f = _table_factor(ground_role(node.name, x, y, models), key)
                graph.add_factor(f, [1] * len(f.slots))
            continue
        for x in owners:
            key = GroundedVariable(node, (x,))
            graph.add_var(key, size[x])
            if not isinstance(node, Restriction):
                f = _table_factor(ground_unary(node, x, models, []), key)
                graph.add_factor(f, [1] * len(f.slots))
                continue
            groups = []

            def filler_of(y: str):
                if isinstance(node.filler, Nominal):
                    return y == node.filler.individual
                return GroundedVariable(node.filler, (y,))

            role = node.role.name
            for a in named:
                vc_filler = g_size if x == GENERIC else 1
                groups.append((GroundedVariable(Role(role), (x, a)), filler_of(a), 1, 1, vc_filler))
            if g_size > 0:
                if x == GENERIC:
                    groups.append((GroundedVariable(Role(role), (GENERIC, GENERIC)), filler_of(GENERIC), 1, 1, 1))
                    if g_size > 1:
                        groups.append((
                            GroundedVariable(Role(role), (GENERIC, GENERIC_OTHER)),
                            filler_of(GENERIC), g_size - 1, 1, g_size - 1,
                        ))
                else:
                    groups.append((GroundedVariable(Role(role), (x, GENERIC)), filler_of(GENERIC), g_size, 1, 1))
            f, vc = _restriction_factor(node, key, groups)
            graph.add_factor(f, vc)
    for a in sn.evidence:
        graph.evidence[evidence_variable(a)] = int(a.positive)
    return graph


# ---------------------------------------------------------------------------
# message passing


def factor_messages(f: _Factor, inc: list[float]) -> list[float]:
    """Sum-product messages from factor ``f`` given its incoming messages."""
    if f.table is not None:
        out = []
        k = len(f.slots)
        vecs = [np.array([1.0 - p, p]) for p in inc]
        for s in range(k):
            t = f.table
            for j in range(k):
                if j == s:
                    continue
                shape = [1] * k
                shape[j] = 2
                t = t * vecs[j].reshape(shape)
            axes = tuple(j for j in range(k) if j != s)
            msg = t.sum(axis=axes) if axes else t
            z = msg[0] + msg[1]
            out.append(0.5 if z <= 0.0 else float(msg[1] / z))
        return out
    groups = [
        (inc[rs], fs if isinstance(fs, bool) else inc[fs], size) for rs, fs, size in f.groups
    ]
    to_child, per_group = restriction_factor_messages(f.cap, f.negated, inc[0], groups)
    out = [0.5] * len(f.slots)
    out[0] = to_child
    for (rs, fs, _), (to_role, to_filler) in zip(f.groups, per_group):
        out[rs] = to_role
        if not isinstance(fs, bool):
            out[fs] = to_filler
    return out


class CountedLBP:
    def __init__(self, graph: CountedGraph, schedule: Schedule | None = None):
        self.g = graph
        self.s = schedule or Schedule()
        self.m = [[0.5] * len(f.slots) for f in graph.factors]
        self.n = [[0.5] * len(f.slots) for f in graph.factors]
        self.iterations = 0
        self.residual = math.inf
        for key in graph.edges:
            self._refresh_var(key)

    def _refresh_var(self, key) -> None:
        edges = self.g.edges[key]
        ev = self.g.evidence.get(key)
        if ev is not None:
            for f, s, _ in edges:
                self.n[f][s] = float(ev)
            return
        total = sum(vc * _logit(self.m[f][s]) for f, s, vc in edges)
        for f, s, _ in edges:
            self.n[f][s] = _sigmoid(total - _logit(self.m[f][s]))

    def belief(self, key) -> float:
        ev = self.g.evidence.get(key)
        if ev is not None:
            return float(ev)
        total = sum(vc * _logit(self.m[f][s]) for f, s, vc in self.g.edges[key])
        return _sigmoid(total)

    def beliefs(self) -> dict:
        return {k: self.belief(k) for k in self.g.edges}

    def _factor_out(self, fi: int) -> list[float]:
        return factor_messages(self.g.factors[fi], self.n[fi])

    def _update_factor(self, fi: int) -> float:
        new = self._factor_out(fi)
        d = self.s.damping
        res = 0.0
        row = self.m[fi]
        for s, p in enumerate(new):
            p = _clip(p)
            if d:
                p = (1.0 - d) * p + d * row[s]
            res = max(res, abs(p - row[s]))
            row[s] = p
        return res

    def step(self) -> float:
        res = 0.0
        if self.s.mode == "synchronous":
            news = [self._factor_out(fi) for fi in range(len(self.g.factors))]
            d = self.s.damping
            for fi, new in enumerate(news):
                row = self.m[fi]
                for s, p in enumerate(new):
                    p = _clip(p)
                    if d:
                        p = (1.0 - d) * p + d * row[s]
                    res = max(res, abs(p - row[s]))
                    row[s] = p
            for key in self.g.edges:
                self._refresh_var(key)
        else:
            for fi, f in enumerate(self.g.factors):
                res = max(res, self._update_factor(fi))
                for key in dict.fromkeys(k for k in f.slots if k is not None):
                    self._refresh_var(key)
        self.iterations += 1
        self.residual = res
        return res

    def run(self, history: list | None = None) -> bool:
        for _ in range(self.s.max_iter):
            res = self.step()
            if history is not None:
                history.append(self.beliefs())
            if res < self.s.tol:
                return True
        return False


def _result(engine: CountedLBP, key, converged: bool, name: str, n) -> InferenceResult:
    res = InferenceResult(
        probability=engine.belief(key), iterations=engine.iterations, converged=converged,
        residual=engine.residual, engine=name, n=n,
    )
    if not converged:
        res.warnings.append(f"{name} did not converge in {engine.iterations} iterations")
    return res


def grounded_lbp(
    net: GroundedNetwork, q: Query | None = None, s: Schedule | None = None,
    *, history: list | None = None,
) -> InferenceResult:
    """Sum-product on the factor graph with one factor per CPT."""
    if q is not None and net.target is None:
        net.target = evidence_variable(q.target)
    pruned = _barren_pruned(net)
    engine = CountedLBP(grounded_graph(pruned), s)
    converged = engine.run(history)
    return _result(engine, pruned.target, converged, "lbp", net.n)


def plbp(
    sn: ShatteredNetwork, q: Query | None = None, s: Schedule | None = None,
    *, history: list | None = None,
) -> InferenceResult:
    """Parameterized LBP: one message per class of identical grounded messages."""
    from .grounding import prune

    sn = prune(sn)
    engine = CountedLBP(lifted_graph(sn), s)
    converged = engine.run(history)
    target = GroundedVariable(ConceptName(sn.target.concept), (sn.target.individual,))
    return _result(engine, target, converged, "plbp", sn.n)
