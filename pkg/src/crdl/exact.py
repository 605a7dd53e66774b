"""Exact inference on grounded networks.

Two independent routes: :func:`enumerate_query` sums the factorized joint
over every assignment (vectorized in blocks), :func:`ve_query` runs
variable elimination after compiling restriction CPTs into chains of
capped witness counters, so no table ever has more than a handful of
binary parents.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from itertools import product
from typing import Hashable, Iterable, Sequence

import numpy as np

from .grounding import (
    ConditionalCPT,
    ConstantCPT,
    DefinitionCPT,
    GroundedNetwork,
    GroundedVariable,
    PriorCPT,
    RestrictionCPT,
    prune,
)
from .logic import And, Bottom, ConceptName, CrdlError, Not, Or, Query, ResourceLimit, Restriction, Top

DEFAULT_ENUM_GUARD = 25
DEFAULT_FACTOR_BUDGET = 1 << 24


class ZeroEvidence(CrdlError):
    """The evidence has probability zero, so the conditional is undefined."""


def enumeration_guard() -> int:
    return int(os.environ.get("CRDL_EXACT_GUARD", DEFAULT_ENUM_GUARD))


# ---------------------------------------------------------------------------
# discrete factors


@dataclass
class Factor:
    vars: tuple
    table: np.ndarray

    @property
    def cards(self) -> tuple[int, ...]:
        return self.table.shape

    def aligned(self, order: Sequence) -> np.ndarray:
        """Table transposed to ``order`` (a superset of vars) with singleton axes."""
        perm = [self.vars.index(v) for v in order if v in self.vars]
        t = np.transpose(self.table, perm) if perm != list(range(len(perm))) else self.table
        shape = [self.table.shape[self.vars.index(v)] if v in self.vars else 1 for v in order]
        return t.reshape(shape)

    def reduce(self, evidence: dict) -> "Factor":
        idx = []
        keep = []
        for v in self.vars:
            if v in evidence:
                idx.append(evidence[v])
            else:
                idx.append(slice(None))
                keep.append(v)
        return Factor(tuple(keep), self.table[tuple(idx)])


def multiply(factors: Sequence[Factor], budget: int = DEFAULT_FACTOR_BUDGET) -> Factor:
    order: list = []
    cards: dict = {}
    for f in factors:
        for v, c in zip(f.vars, f.table.shape):
            if v not in cards:
                cards[v] = c
                order.append(v)
    size = 1
    for v in order:
        size *= cards[v]
    if size > budget:
        raise ResourceLimit(f"intermediate factor with {size} entries exceeds budget {budget}")
    out = np.ones([cards[v] for v in order])
    for f in factors:
        out = out * f.aligned(order)
    return Factor(tuple(order), out)


def sum_out(f: Factor, v) -> Factor:
    ax = f.vars.index(v)
    return Factor(f.vars[:ax] + f.vars[ax + 1:], f.table.sum(axis=ax))


# ---------------------------------------------------------------------------
# compiling CPTs into factors


def _expr_table(cpt, child: GroundedVariable) -> Factor:
    parents = list(cpt.parents)
    if len(parents) > 20:
        raise ResourceLimit(f"{child} has {len(parents)} tabulated parents")
    table = np.zeros([2] * (len(parents) + 1))
    for combo in product((0, 1), repeat=len(parents)):
        value = dict(zip(parents, combo))
        p = cpt.prob_true(value)
        table[(0,) + combo] = 1.0 - p
        table[(1,) + combo] = p
    return Factor((child,) + tuple(parents), table)


def _restriction_factors(cpt: RestrictionCPT, child: GroundedVariable) -> list[Factor]:
    """Chain ``s_j = min(cap, s_{j-1} + witness_j)`` ending in the child."""
    cap = cpt.threshold
    factors = []
    prev = None  # count state so far; None means 0
    for j, (role, filler) in enumerate(cpt.pairs):
        state = ("count", child, j)
        if isinstance(filler, bool):
            scope = [role]
            combos = [(r, filler) for r in (0, 1)]
        else:
            scope = [role, filler]
            combos = list(product((0, 1), repeat=2))
        prev_states = range(cap + 1) if prev is not None else [0]
        shape = ([cap + 1] if prev is not None else []) + [2] * len(scope) + [cap + 1]
        table = np.zeros(shape)
        for s in prev_states:
            for combo in combos:
                w = cpt.witness(combo[0], combo[1])
                idx = ([s] if prev is not None else []) + list(combo[: len(scope)]) + [min(cap, s + w)]
                table[tuple(idx)] = 1.0
        fvars = ((prev,) if prev is not None else ()) + tuple(scope) + (state,)
        factors.append(Factor(fvars, table))
        prev = state
    final = np.zeros((cap + 1, 2)) if prev is not None else np.zeros(2)
    if prev is None:
        holds = (0 >= cap) != cpt.negated
        final[int(holds)] = 1.0
        factors.append(Factor((child,), final))
    else:
        for s in range(cap + 1):
            holds = (s >= cap) != cpt.negated
            final[s, int(holds)] = 1.0
        factors.append(Factor((prev, child), final))
    return factors


def compile_factors(net: GroundedNetwork) -> list[Factor]:
    factors = []
    for v in net.variables:
        cpt = net.cpts[v]
        if isinstance(cpt, (PriorCPT, ConstantCPT)):
            p = cpt.prob_true({})
            factors.append(Factor((v,), np.array([1.0 - p, p])))
        elif isinstance(cpt, RestrictionCPT):
            factors.extend(_restriction_factors(cpt, v))
        else:
            factors.append(_expr_table(cpt, v))
    return factors


# ---------------------------------------------------------------------------
# variable elimination


def _fill_in(adj: dict, v) -> int:
    nbrs = list(adj[v])
    fill = 0
    for i, a in enumerate(nbrs):
        na = adj[a]
        for b in nbrs[i + 1:]:
            if b not in na:
                fill += 1
    return fill


def min_fill_order(factors: Iterable[Factor], keep: Iterable[Hashable] = ()) -> list:
    """Greedy min-fill; ties broken by degree, then by the variable's string id."""
    keep = set(keep)
    adj: dict = {}
    for f in factors:
        for v in f.vars:
            adj.setdefault(v, set())
        for v in f.vars:
            adj[v].update(w for w in f.vars if w != v)
    names = {v: repr(v) for v in adj}
    candidates = {v for v in adj if v not in keep}
    score = {v: (_fill_in(adj, v), len(adj[v]), names[v]) for v in candidates}
    order = []
    while candidates:
        v = min(candidates, key=score.__getitem__)
        order.append(v)
        candidates.discard(v)
        nbrs = adj.pop(v)
        for a in nbrs:
            adj[a].discard(v)
            adj[a].update(w for w in nbrs if w != a)
        touched = set(nbrs)
        for a in nbrs:
            touched.update(adj[a])
        for a in touched:
            if a in candidates:
                score[a] = (_fill_in(adj, a), len(adj[a]), names[a])
    return order


def eliminate(factors: list[Factor], order: Sequence, budget: int = DEFAULT_FACTOR_BUDGET) -> list[Factor]:
    pool = list(factors)
    for v in order:
        touching = [f for f in pool if v in f.vars]
        if not touching:
            continue
        pool = [f for f in pool if v not in f.vars]
        pool.append(sum_out(multiply(touching, budget), v))
    return pool


def posterior_table(
    factors: list[Factor], query_vars: Sequence, order: Sequence | None = None,
    budget: int = DEFAULT_FACTOR_BUDGET,
) -> Factor:
    """Unnormalized joint over ``query_vars`` with everything else summed out."""
    if order is None:
        order = min_fill_order(factors, keep=query_vars)
    pool = eliminate(factors, order, budget)
    scalars = [f for f in pool if not f.vars]
    rest = [f for f in pool if f.vars]
    joint = multiply(rest, budget) if rest else Factor((), np.array(1.0))
    for s in scalars:
        joint = Factor(joint.vars, joint.table * s.table)
    for v in list(joint.vars):
        if v not in query_vars:
            joint = sum_out(joint, v)
    missing = [v for v in query_vars if v not in joint.vars]
    if missing:
        raise CrdlError(f"query variables {missing} appear in no factor")
    return Factor(tuple(query_vars), joint.aligned(list(query_vars)))


def _check_target(net: GroundedNetwork) -> GroundedVariable:
    if net.target is None:
        raise CrdlError("network has no target variable")
    return net.target


def ve_query(
    net: GroundedNetwork,
    q: Query | None = None,
    order: Sequence | None = None,
    *,
    prune_first: bool = True,
    budget: int = DEFAULT_FACTOR_BUDGET,
) -> float:
    """P(target = 1 | evidence) by variable elimination (min-fill order by default)."""
    if prune_first:
        net = prune(net, q)
    target = _check_target(net)
    if target in net.evidence:
        return float(net.evidence[target])
    factors = [f.reduce(net.evidence) for f in compile_factors(net)]
    table = posterior_table(factors, [target], order, budget).table
    z = float(table.sum())
    if z <= 0.0:
        raise ZeroEvidence("evidence has probability zero")
    return float(table[1]) / z


def ve_marginals(net: GroundedNetwork, variables: Sequence[GroundedVariable],
                 budget: int = DEFAULT_FACTOR_BUDGET) -> dict:
    """P(v = 1 | evidence) for several variables of one (unpruned) network."""
    factors = [f.reduce(net.evidence) for f in compile_factors(net)]
    out = {}
    for v in variables:
        if v in net.evidence:
            out[v] = float(net.evidence[v])
            continue
        t = posterior_table(factors, [v], None, budget).table
        z = float(t.sum())
        if z <= 0.0:
            raise ZeroEvidence("evidence has probability zero")
        out[v] = float(t[1]) / z
    return out


# ---------------------------------------------------------------------------
# brute-force enumeration


def _vec_eval(e, lookup):
    if isinstance(e, (ConceptName, Restriction)):
        return lookup(e)
    if isinstance(e, Top):
        return True
    if isinstance(e, Bottom):
        return False
    if isinstance(e, Not):
        return np.logical_not(_vec_eval(e.arg, lookup))
    if isinstance(e, And):
        return np.logical_and(_vec_eval(e.left, lookup), _vec_eval(e.right, lookup))
    if isinstance(e, Or):
        return np.logical_or(_vec_eval(e.left, lookup), _vec_eval(e.right, lookup))
    raise TypeError(e)


def _vec_prob_true(cpt, value: dict, width: int) -> np.ndarray:
    if isinstance(cpt, (PriorCPT, ConstantCPT)):
        return np.full(width, cpt.prob_true({}))
    if isinstance(cpt, DefinitionCPT):
        ok = _vec_eval(cpt.expr, lambda n: value[GroundedVariable(n, (cpt.individual,))])
        return np.broadcast_to(np.asarray(ok, dtype=float), (width,))
    if isinstance(cpt, ConditionalCPT):
        if isinstance(cpt.cond, GroundedVariable):
            holds = value[cpt.cond]
        else:
            holds = _vec_eval(cpt.cond, lambda n: value[GroundedVariable(n, (cpt.individual,))])
        holds = np.broadcast_to(np.asarray(holds, dtype=bool), (width,))
        return np.where(holds, cpt.p_true, cpt.p_false)
    if isinstance(cpt, RestrictionCPT):
        count = np.zeros(width, dtype=np.int64)
        for role, filler in cpt.pairs:
            f = filler if isinstance(filler, bool) else value[filler]
            r = value[role].astype(bool)
            w = r & (np.logical_not(f) if cpt.negated else np.asarray(f, dtype=bool))
            count += w
        reached = count >= cpt.threshold
        return (reached != cpt.negated).astype(float)
    raise TypeError(cpt)


def enumerate_query(
    net: GroundedNetwork,
    q: Query | None = None,
    *,
    prune_first: bool = True,
    guard: int | None = None,
    block_bits: int = 16,
) -> float:
    """P(target = 1 | evidence) by summing the product of all CPTs."""
    if prune_first:
        net = prune(net, q)
    target = _check_target(net)
    guard = enumeration_guard() if guard is None else guard
    if len(net.variables) > guard:
        raise ResourceLimit(f"{len(net.variables)} variables exceed the enumeration guard of {guard}")
    free = [v for v in net.variables if v not in net.evidence]
    k = len(free)
    block = min(k, block_bits)
    width = 1 << block
    low = ((np.arange(width)[:, None] >> np.arange(block)) & 1).astype(np.int8)
    num = 0.0
    den = 0.0
    for hi in range(1 << (k - block)):
        value = {}
        for i in range(block):
            value[free[i]] = low[:, i]
        for i in range(block, k):
            value[free[i]] = np.full(width, (hi >> (i - block)) & 1, dtype=np.int8)
        for v, e in net.evidence.items():
            value[v] = np.full(width, e, dtype=np.int8)
        weight = np.ones(width)
        for v in net.variables:
            p = _vec_prob_true(net.cpts[v], value, width)
            weight *= np.where(value[v] == 1, p, 1.0 - p)
        den += float(weight.sum())
        num += float(weight[value[target] == 1].sum())
    if den <= 0.0:
        raise ZeroEvidence("evidence has probability zero")
    return num / den
