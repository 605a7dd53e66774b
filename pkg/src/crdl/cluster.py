"""Clustered propagation over slice factors.

Every concrete individual (the named ones and the reserved generic ``b``)
owns one region: all distributions of its slice, with each restriction
split into the owner's own pair, which stays inside, and the pairs with
the other individuals, which are summarized by an outer witness counter.
The counter's distribution is built from the messages of the other
individuals' fillers; the generic individuals all send b's message, so
their contribution is a power of one per-individual term.

Inside a region everything is exact (variable elimination); between
regions the scheme is loopy belief propagation.  Two message schemes:

``pair`` (default)
    tables over the filler variables of both individuals of a pair and one
    joint counter over all restrictions of a region;
``factored``
    one binary message per filler variable and one counter per
    restriction; the interval engine in :mod:`crdl.credal` builds on it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np

from .counting import count_distribution
from .exact import Factor, ZeroEvidence, posterior_table
from .grounding import (
    B_INDIVIDUAL,
    ConditionalCPT,
    GroundedNetwork,
    GroundedVariable,
    PriorCPT,
    ShatteredNetwork,
    ground_role,
    ground_unary,
    prune,
    shatter,
)
from .lbp import _table_factor, plbp
from .logic import (
    ConceptAssertion,
    ConceptName,
    CrdlError,
    Exact,
    LocalModels,
    Nominal,
    Query,
    Restriction,
    Role,
    RoleAssertion,
    Terminology,
    UnsupportedConstruct,
)
from .results import InferenceResult, Schedule

EPS = 1e-300  # floor for log-odds; powered messages must be able to get very small
SNAP = 1e-14  # messages this close to uniform are treated as uniform before powering
GEN = "#gen"  # a generic individual other than the region owner
REGION_BUDGET = 1 << 22
OVERFLOW_N = 1 << 62


# ---------------------------------------------------------------------------
# closed-form aggregates


def restriction_aggregate(
    kind: str, role_prob: float, named_msgs, generic_msg: float, n: int, m: int, k: int = 1,
) -> float:
    """P(restriction holds at a) when its N-1 role pairs are independent.

    ``named_msgs`` are the filler probabilities of the named partners and
    ``generic_msg`` the shared filler probability of the N-M generic ones.
    """
    if n < m:
        raise ValueError("N must be at least M")
    named_msgs = [float(x) for x in named_msgs]
    g = n - m
    if kind == "forall":
        if role_prob == 0.0:
            return 1.0
        out = math.prod(1.0 - role_prob * (1.0 - x) for x in named_msgs)
        base = 1.0 - role_prob * (1.0 - generic_msg)
        return out * _power(base, g)
    if kind == "exists":
        if role_prob == 0.0:
            return 0.0
        out = math.prod(1.0 - role_prob * x for x in named_msgs)
        base = 1.0 - role_prob * generic_msg
        return 1.0 - out * _power(base, g)
    if kind == "atleast":
        if k > n:
            warnings.warn(f"atleast {k} can never hold in a domain of {n} individuals", RuntimeWarning)
            return 0.0
        groups = [(role_prob * x, 1) for x in named_msgs] + [(role_prob * generic_msg, g)]
        return float(count_distribution(groups, k)[k])
    raise ValueError(f"unknown restriction kind {kind!r}")


def _power(base: float, e: int) -> float:
    if e == 0 or base == 1.0:
        return 1.0
    if base <= 0.0:
        return 0.0
    return math.exp(e * math.log(base))


# ---------------------------------------------------------------------------
# counters


def unit_counter(shape) -> np.ndarray:
    out = np.zeros(shape)
    out[(0,) * len(shape)] = 1.0
    return out


# ---------------------------------------------------------------------------
# structure


@dataclass
class SliceFactor:
    owner: str
    members: list  # variables grounded at the owner
    evidence: dict  # clamped members
    boundary: list  # member variables other regions read (filler concepts)
    aggregates: list  # restrictions whose outer pairs are summarized by counters

    @property
    def is_generic(self) -> bool:
        return self.owner == B_INDIVIDUAL


@dataclass
class CompactFactorGraph:
    sn: ShatteredNetwork
    models: LocalModels
    factors: dict  # owner -> SliceFactor
    restrictions: list
    roles: list
    fillers: list  # filler concept nodes read across regions
    fallback: str | None = None  # reason regions are too large for exact inference

    @property
    def n(self) -> int:
        return self.sn.n

    @property
    def m(self) -> int:
        return self.sn.m


def _node_evidence(sn: ShatteredNetwork) -> tuple[dict, dict]:
    unary, roles = {}, {}
    for a in sn.evidence:
        if isinstance(a, ConceptAssertion):
            unary[(ConceptName(a.concept), a.individual)] = int(a.positive)
        else:
            roles[(a.role, a.subject, a.object)] = int(a.positive)
    return unary, roles


def build_slice_factors(
    sn: ShatteredNetwork, *, models: LocalModels | None = None, budget: int = REGION_BUDGET,
) -> CompactFactorGraph:
    """One slice factor per named individual and for b, plus restriction counters."""
    if sn.has_inverse_roles():
        raise UnsupportedConstruct(
            "inverse roles are not supported by the cluster engine; use exact or lbp"
        )
    sn = prune(sn)
    models = models or sn.models
    unary_ev, _ = _node_evidence(sn)
    restrictions = [nd for nd in sn.nodes if isinstance(nd, Restriction)]
    roles = [nd for nd in sn.nodes if isinstance(nd, Role)]
    fillers = list(dict.fromkeys(r.filler for r in restrictions if isinstance(r.filler, ConceptName)))
    # b's region is always built so one graph serves every domain size
    owners = list(sn.named) + [B_INDIVIDUAL]
    factors = {}
    for o in owners:
        members = [GroundedVariable(nd, (o,)) for nd in sn.nodes if not isinstance(nd, Role)]
        members += [GroundedVariable(r, (o, o)) for r in roles]
        ev = {
            GroundedVariable(nd, (o,)): v for (nd, ind), v in unary_ev.items() if ind == o
        }
        for a in sn.evidence:
            if isinstance(a, RoleAssertion) and a.subject == o and a.object == o:
                ev[GroundedVariable(Role(a.role), (o, o))] = int(a.positive)
        boundary = [GroundedVariable(f, (o,)) for f in fillers]
        factors[o] = SliceFactor(o, members, ev, boundary, list(restrictions))
    fallback = None
    states = 1
    for r in restrictions:
        states *= r.threshold + 1
    if states > budget or len(factors.get(owners[0]).members if owners else []) > 64:
        fallback = f"regions too large for exact inference ({states} counter states)"
    return CompactFactorGraph(sn, models, factors, restrictions, roles, fillers, fallback)


# ---------------------------------------------------------------------------
# message state


def _logit(p: float) -> float:
    return math.log(max(p, EPS)) - math.log(max(1.0 - p, EPS))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _norm(v0: float, v1: float) -> float:
    z = v0 + v1
    if z <= 0.0:
        raise ZeroEvidence("a region's evidence has probability zero")
    p = v1 / z
    if abs(p - 0.5) < SNAP:
        return 0.5
    return p


class _Run:
    """Message state of one propagation at a fixed domain size."""

    def __init__(self, g: CompactFactorGraph, n: int, models: LocalModels):
        self.g = g
        self.n = n
        self.models = models
        self.named = list(g.sn.named)
        self.gcount = n - len(self.named)
        self.owners = self.named + ([B_INDIVIDUAL] if self.gcount > 0 else [])
        self.unary_ev, self.role_ev = _node_evidence(g.sn)
        self.shape = tuple(r.threshold + 1 for r in g.restrictions)
        self._role_cache: dict = {}
        self.fixed: dict | None = None  # pinned incoming messages (credal vertices)
        self.power_terms: list[float] = []
        self._own_tables = {o: self._region_factors(o) for o in self.owners}
        # m_own[o][F]: region o -> F(o); m_out[o][(F, y)]: region o -> F(y)
        self.m_own = {o: {} for o in self.owners}
        self.m_out = {o: {} for o in self.owners}
        for o in self.owners:
            for y in self.others(o):
                for f in g.fillers:
                    self.m_out[o][(f, y)] = 0.5

    # -- bookkeeping -------------------------------------------------------

    def others(self, o: str) -> list[str]:
        """Other individuals as seen from region o; GEN stands for one generic individual."""
        out = [a for a in self.named if a != o]
        if self.generic_others(o) > 0:
            out.append(GEN)
        return out

    def generic_others(self, o: str) -> int:
        return self.gcount - (1 if o == B_INDIVIDUAL else 0)

    def region_of(self, y: str) -> str:
        return B_INDIVIDUAL if y == GEN else y

    def clamp(self, f, y: str):
        if y in (GEN, B_INDIVIDUAL):
            return None
        return self.unary_ev.get((f, y))

    def _pow_logit(self, p: float, count: int) -> float:
        if count == 0 or p == 0.5:
            return 0.0
        x = count * _logit(p)
        self.power_terms.append(_sigmoid(-abs(x)))
        return x

    def n_own(self, o: str, f) -> float:
        """Message into region o about its own F(o) from every other region."""
        if self.fixed is not None:
            return self.fixed[("own", o, f)]
        x = 0.0
        for a in self.named:
            if a != o:
                x += _logit(self.m_out[a][(f, GEN if o == B_INDIVIDUAL else o)])
        senders = self.gcount - (1 if o == B_INDIVIDUAL else 0)
        if senders > 0:
            y = GEN if o == B_INDIVIDUAL else o
            x += self._pow_logit(self.m_out[B_INDIVIDUAL][(f, y)], senders)
        return _sigmoid(x)

    def n_to(self, o: str, f, y: str) -> float:
        """Message from F(y) into region o (y another individual or GEN)."""
        ev = self.clamp(f, y)
        if ev is not None:
            return float(ev)
        if self.fixed is not None:
            return self.fixed[("to", o, f, y)]
        src = self.region_of(y)
        x = _logit(self.m_own[src][f])
        for a in self.named:
            if a != o and a != y:
                x += _logit(self.m_out[a][(f, y)])
        senders = self.gcount - (1 if o == B_INDIVIDUAL else 0) - (1 if y == GEN else 0)
        if senders > 0:
            x += self._pow_logit(self.m_out[B_INDIVIDUAL][(f, y)], senders)
        return _sigmoid(x)

    # -- region structure ---------------------------------------------------

    def _region_factors(self, o: str) -> list[Factor]:
        g = self.g
        out = []
        for nd in g.sn.nodes:
            if isinstance(nd, Role):
                v = GroundedVariable(nd, (o, o))
                f = _table_factor(ground_role(nd.name, o, o, self.models), v)
            elif isinstance(nd, Restriction):
                continue
            else:
                v = GroundedVariable(nd, (o,))
                f = _table_factor(ground_unary(nd, o, self.models, []), v)
            out.append(Factor(tuple(f.slots), f.table))
        for i, r in enumerate(g.restrictions):
            out.append(self._restriction_factor(o, i, r))
        return out

    def counter_var(self, o: str, i: int):
        return ("outer", o, i)

    def _restriction_factor(self, o: str, i: int, r: Restriction) -> Factor:
        child = GroundedVariable(r, (o,))
        role = GroundedVariable(Role(r.role.name), (o, o))
        cap = r.threshold
        outer = self.counter_var(o, i)
        if isinstance(r.filler, Nominal):
            const = o == r.filler.individual
            table = np.zeros((2, 2, cap + 1))
            for rv, c in product((0, 1), range(cap + 1)):
                w = int(rv and (const != r.witness_negated))
                holds = (min(cap, c + w) >= cap) != r.witness_negated
                table[int(holds), rv, c] = 1.0
            return Factor((child, role, outer), table)
        filler = GroundedVariable(r.filler, (o,))
        if filler == child:
            raise CrdlError("restriction cannot use itself as filler")
        table = np.zeros((2, 2, 2, cap + 1))
        for rv, fv, c in product((0, 1), (0, 1), range(cap + 1)):
            w = int(rv and (bool(fv) != r.witness_negated))
            holds = (min(cap, c + w) >= cap) != r.witness_negated
            table[int(holds), rv, fv, c] = 1.0
        return Factor((child, role, filler, outer), table)

    # -- per-partner witness probabilities -------------------------------

    def role_marginal(self, o: str, y: str, name: str) -> float:
        """P(r(o, y)) under the role hierarchy, with role evidence clamped."""
        key = (o, y, name)
        if key in self._role_cache:
            return self._role_cache[key]
        yname = "#y" if y == GEN else y
        roles = self.g.roles
        total = 0.0
        for vals in product((0, 1), repeat=len(roles)):
            value = {GroundedVariable(r, (o, yname)): v for r, v in zip(roles, vals)}
            p = 1.0
            for r, v in zip(roles, vals):
                ev = self.role_ev.get((r.name, o, y))
                if ev is not None:
                    p *= float(ev == v)
                else:
                    pt = ground_role(r.name, o, yname, self.models).prob_true(value)
                    p *= pt if v else 1.0 - pt
                if p == 0.0:
                    break
            if value[GroundedVariable(Role(name), (o, yname))]:
                total += p
        self._role_cache[key] = total
        return total

    def witness(self, o: str, y: str, r: Restriction, fixed: tuple | None = None) -> float:
        """P(partner y is a witness for restriction r at o); ``fixed`` pins a filler (F, v)."""
        if isinstance(r.filler, Nominal):
            fp = float(y == r.filler.individual)
        elif fixed is not None and fixed[0] == r.filler:
            fp = float(fixed[1])
        else:
            fp = self.n_to(o, r.filler, y)
        rp = self.role_marginal(o, y, r.role.name)
        return rp * (1.0 - fp if r.witness_negated else fp)

    def counter_prior(self, o: str, skip: str | None = None, fixed=None) -> np.ndarray:
        """Joint distribution of the outer counters of region o.

        Each restriction has its own aggregate over the partners; ``skip``
        takes one partner out (GEN: one generic individual) and puts it back
        with filler ``fixed`` pinned.
        """
        joint = np.ones(())
        for r, cap in zip(self.g.restrictions, self.shape):
            groups = []
            for y in self.others(o):
                if y == GEN:
                    k = self.generic_others(o) - (1 if skip == GEN else 0)
                    p = self.witness(o, GEN, r)
                    if 0.0 < p < 1.0 and k > 0 and skip is None:
                        t = _power(1.0 - p, k)
                        self.power_terms.append(min(t, 1.0 - t))
                    groups.append((p, k))
                elif y != skip:
                    groups.append((self.witness(o, y, r), 1))
            if skip is not None:
                groups.append((self.witness(o, skip, r, fixed), 1))
            joint = np.multiply.outer(joint, count_distribution(groups, cap - 1))
        return joint

    # -- region inference ---------------------------------------------------

    def input_keys(self, o: str) -> list:
        """Incoming messages region o reads: own boundary variables, then partner fillers."""
        sf = self.g.factors[o]
        keys = [("own", o, v.relation) for v in sf.boundary if v not in sf.evidence]
        for y in self.others(o):
            for f in self.g.fillers:
                if self.clamp(f, y) is None:
                    keys.append(("to", o, f, y))
        return keys

    def input_value(self, key) -> float:
        if key[0] == "own":
            return self.n_own(key[1], key[2])
        return self.n_to(key[1], key[2], key[3])

    def region_inputs(self, o: str, exclude=None, with_prior=True) -> list[Factor]:
        sf = self.g.factors[o]
        factors = [f.reduce(sf.evidence) for f in self._own_tables[o]]
        for v in sf.boundary:
            if v in sf.evidence or v == exclude:
                continue
            p = self.n_own(o, v.relation)
            factors.append(Factor((v,), np.array([1.0 - p, p])))
        if with_prior and self.g.restrictions:
            factors.append(Factor(self.counter_vars(o), self.counter_prior(o)))
        return factors

    def counter_vars(self, o: str) -> tuple:
        return tuple(self.counter_var(o, i) for i in range(len(self.g.restrictions)))

    def marginal(self, factors: list[Factor], v, evidence: dict) -> float:
        if v in evidence:
            return float(evidence[v])
        t = posterior_table(factors, [v]).table
        return _norm(float(t[0]), float(t[1]))

    def update_region(self, o: str) -> tuple[dict, dict]:
        sf = self.g.factors[o]
        own = {}
        for v in sf.boundary:
            if v in sf.evidence:
                own[v.relation] = float(sf.evidence[v])
                continue
            own[v.relation] = self.marginal(self.region_inputs(o, exclude=v), v, sf.evidence)
        out = {}
        others = self.others(o)
        if others and self.g.fillers:
            cvars = self.counter_vars(o)
            lik = posterior_table(self.region_inputs(o, with_prior=False), list(cvars)).table
            if lik.sum() <= 0.0:
                raise ZeroEvidence("a region's evidence has probability zero")
            lik = lik / lik.max()
            for y in others:
                for f in self.g.fillers:
                    v0 = float((lik * self.counter_prior(o, y, (f, 0))).sum())
                    v1 = float((lik * self.counter_prior(o, y, (f, 1))).sum())
                    out[(f, y)] = _norm(v0, v1)
        return own, out

    def belief(self, o: str, node) -> float:
        sf = self.g.factors[o]
        v = GroundedVariable(node, (o,))
        return self.marginal(self.region_inputs(o), v, sf.evidence)

    def initialize(self) -> None:
        """Own messages start at the exact N=1 marginals (no evidence)."""
        g = self.g
        for o in self.owners:
            sf = g.factors[o]
            factors = list(self._own_tables[o])
            if g.restrictions:
                factors.append(Factor(self.counter_vars(o), unit_counter(self.shape)))
            for v in sf.boundary:
                self.m_own[o][v.relation] = self.marginal(factors, v, {})

    def step(self) -> float:
        updates = {o: self.update_region(o) for o in self.owners}
        res = 0.0
        for o, (own, out) in updates.items():
            for f, p in own.items():
                res = max(res, abs(p - self.m_own[o].get(f, 0.5)))
                self.m_own[o][f] = p
            for key, p in out.items():
                res = max(res, abs(p - self.m_out[o][key]))
                self.m_out[o][key] = p
        return res


# ---------------------------------------------------------------------------
# pair messages


def _sat_shift(a: np.ndarray, axis: int, s: int) -> np.ndarray:
    """Shift a capped count axis up by s; mass beyond the cap stays at the cap."""
    if s == 0:
        return a
    n = a.shape[axis]
    s = min(s, n - 1)
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    src[axis], dst[axis] = slice(0, n - s), slice(s, n)
    out[tuple(dst)] = a[tuple(src)]
    top = [slice(None)] * a.ndim
    top[axis] = n - 1
    tail = [slice(None)] * a.ndim
    tail[axis] = slice(n - s, n)
    out[tuple(top)] += a[tuple(tail)].sum(axis=axis)
    return out


def _shift(a: np.ndarray, offset) -> np.ndarray:
    for axis, s in enumerate(offset):
        a = _sat_shift(a, axis, s)
    return a


def conv_capped(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distribution of the capped sum of two independent count vectors."""
    if a.ndim == 0:
        return a * b
    out = np.zeros_like(a)
    for idx in zip(*np.nonzero(b)):
        out += b[idx] * _shift(a, idx)
    return out


def power_capped(d: np.ndarray, k: int) -> np.ndarray:
    """k-fold capped convolution of d with itself, by repeated squaring.

    Renormalized after every product: a rounding deficit of 1e-16 in the
    total mass would otherwise grow to (1 - 1e-16)^k.
    """
    result = unit_counter(d.shape)
    base = d / d.sum()
    while k > 0:
        if k & 1:
            result = conv_capped(result, base)
            result /= result.sum()
        k >>= 1
        if k:
            base = conv_capped(base, base)
            base /= base.sum()
    return result


class _PairRun(_Run):
    """Messages live on the fillers of both individuals of a pair.

    Region y tells region o how y's fillers depend on o's fillers, which
    keeps the reverse pair r(y, o) that reads o's concepts, the correlation
    between fillers of one individual, and restrictions sharing a role (one
    joint counter per region).  The separator of regions o and y is
    fillers(o) + fillers(y); every filler variable's regions form a star
    around its owner, so nothing is counted twice.

    ``msg[src][dst][i, j]`` is indexed by the receiver's filler configuration
    i and the sender's configuration j.
    """

    def __init__(self, g: CompactFactorGraph, n: int, models: LocalModels):
        super().__init__(g, n, models)
        self.k = len(g.fillers)
        self.configs = list(product((0, 1), repeat=self.k))
        kk = len(self.configs)
        flat = np.full((kk, kk), 1.0 / (kk * kk))
        self.msg = {o: {y: flat.copy() for y in self.others(o)} for o in self.owners}
        self._pair_cache: dict = {}

    def key_of(self, o: str) -> str:
        return GEN if o == B_INDIVIDUAL else o

    def mask(self, y: str) -> np.ndarray:
        m = np.ones(len(self.configs))
        for i, f in enumerate(self.g.fillers):
            ev = self.clamp(f, y)
            if ev is not None:
                m *= np.array([float(c[i] == ev) for c in self.configs])
        return m

    def incoming(self, o: str, y: str) -> np.ndarray:
        return self.msg[self.region_of(y)][self.key_of(o)] * self.mask(y)[None, :]

    # -- pair increments -------------------------------------------------------

    def role_joint(self, o: str, y: str) -> dict:
        """Distribution of the role values on the pair (o, y)."""
        yname = "#y" if y == GEN else y
        roles = self.g.roles
        out = {}
        for vals in product((0, 1), repeat=len(roles)):
            value = {GroundedVariable(r, (o, yname)): v for r, v in zip(roles, vals)}
            p = 1.0
            for r, v in zip(roles, vals):
                ev = self.role_ev.get((r.name, o, y))
                if ev is not None:
                    p *= float(ev == v)
                else:
                    pt = ground_role(r.name, o, yname, self.models).prob_true(value)
                    p *= pt if v else 1.0 - pt
            if p > 0.0:
                out[vals] = p
        return out

    def pair_table(self, o: str, y: str) -> np.ndarray:
        """Counter increments contributed by partner y, per filler configuration of y."""
        key = (o, y)
        if key in self._pair_cache:
            return self._pair_cache[key]
        g = self.g
        role_idx = [g.roles.index(Role(r.role.name)) for r in g.restrictions]
        table = np.zeros((len(self.configs),) + self.shape)
        for ci, cfg in enumerate(self.configs):
            for vals, p in self.role_joint(o, y).items():
                inc = []
                for r, ri in zip(g.restrictions, role_idx):
                    if isinstance(r.filler, Nominal):
                        fv = y == r.filler.individual
                    else:
                        fv = bool(cfg[g.fillers.index(r.filler)])
                    inc.append(int(vals[ri] and (fv != r.witness_negated)))
                table[(ci,) + tuple(inc)] += p
        self._pair_cache[key] = table
        return table

    def _generic_power(self, d: np.ndarray, k: int, record: bool) -> np.ndarray:
        out = power_capped(d, k)
        if record:
            for i, cap in enumerate(self.shape):
                marg = out.sum(axis=tuple(j for j in range(out.ndim) if j != i))
                t = float(marg[: cap - 1].sum())
                self.power_terms.append(min(t, 1.0 - t))
        return out

    def counter_factor(self, o: str, skip: str | None = None, pinned: int | None = None) -> np.ndarray:
        """Unnormalized table over (own filler configuration, counters).

        Each partner contributes its increments given the owner's
        configuration, weighted by its total message mass; ``skip`` takes one
        partner out and ``pinned`` puts it back with a fixed configuration.
        """
        kk = len(self.configs)
        dists = [unit_counter(self.shape) for _ in range(kk)]
        logmass = np.zeros(kk)
        for y in self.others(o):
            count = 1
            if y == GEN:
                count = self.generic_others(o) - (1 if skip == GEN else 0)
            elif y == skip:
                continue
            if count <= 0:
                continue
            table = self.pair_table(o, y).reshape(kk, -1)
            inc = (self.incoming(o, y) @ table).reshape((kk,) + self.shape)
            z = inc.reshape(kk, -1).sum(axis=1)
            with np.errstate(divide="ignore"):
                lz = np.log(z)
            if not np.isfinite(lz.max()):
                raise ZeroEvidence("a region's evidence has probability zero")
            lz -= lz.max()
            if count > 1:
                # one generic partner's mass is powered: snap rounding-level ties first
                lz[lz > -SNAP] = 0.0
                if skip is None:
                    for x in lz[(lz < 0.0) & np.isfinite(lz)]:
                        self.power_terms.append(math.exp(count * x))
            for i in range(kk):
                if z[i] <= 0.0:
                    continue
                d = inc[i] / z[i]
                if count > 1:
                    d = self._generic_power(d, count, skip is None)
                dists[i] = conv_capped(dists[i], d)
            logmass += count * lz
        if skip is not None and pinned is not None:
            step = self.pair_table(o, skip)[pinned]
            dists = [conv_capped(d, step) for d in dists]
        w = np.exp(logmass - logmass.max())
        return np.stack([d * wi for d, wi in zip(dists, w)])

    # -- region inference --------------------------------------------------------

    def _region(self, o: str, skip=None, pinned=None) -> list[Factor]:
        sf = self.g.factors[o]
        factors = [f.reduce(sf.evidence) for f in self._own_tables[o]]
        table = self.counter_factor(o, skip, pinned).reshape((2,) * self.k + self.shape)
        factors.append(Factor(tuple(sf.boundary) + self.counter_vars(o), table).reduce(sf.evidence))
        return factors

    def region_inputs(self, o: str, exclude=None, with_prior=True) -> list[Factor]:
        return self._region(o)

    def _boundary_joint(self, factors: list[Factor], o: str) -> np.ndarray:
        """Unnormalized joint over o's filler configurations (evidence embedded)."""
        sf = self.g.factors[o]
        free = [v for v in sf.boundary if v not in sf.evidence]
        table = posterior_table(factors, free).table if free else np.array(float(
            posterior_table(factors, []).table) if factors else 1.0)
        out = np.zeros((2,) * self.k)
        idx = tuple(sf.evidence[v] if v in sf.evidence else slice(None) for v in sf.boundary)
        out[idx] = table
        return out.reshape(-1)

    def update_region(self, o: str) -> dict:
        out = {}
        for y in self.others(o):
            table = np.array([self._boundary_joint(self._region(o, y, j), o) for j in range(len(self.configs))])
            z = table.sum()
            if z <= 0.0:
                raise ZeroEvidence("a region's evidence has probability zero")
            out[y] = table / z  # [receiver y's configuration, sender o's configuration]
        return out

    def initialize(self) -> None:
        """Every message starts as the sender's exact N=1 filler marginal."""
        kk = len(self.configs)
        for o in self.owners:
            factors = list(self._own_tables[o])
            if self.g.restrictions:
                factors.append(Factor(self.counter_vars(o), unit_counter(self.shape)))
            prior = self._boundary_joint(factors, o)
            prior = prior / prior.sum()
            for y in self.others(o):
                self.msg[o][y] = np.tile(prior, (kk, 1)) / kk

    def step(self) -> float:
        updates = {o: self.update_region(o) for o in self.owners}
        res = 0.0
        for o, out in updates.items():
            for y, table in out.items():
                res = max(res, float(np.abs(table - self.msg[o][y]).max()))
                self.msg[o][y] = table
        return res



MESSAGE_SCHEMES = {"pair": _PairRun, "factored": _Run}


def _target_of(q: Query):
    if not isinstance(q.target, ConceptAssertion):
        raise CrdlError("the target must be a concept assertion")
    return ConceptName(q.target.concept), q.target.individual


def propagate(
    g: CompactFactorGraph, n: int, s: Schedule | None = None, models: LocalModels | None = None,
    *, max_iter: int = 100, messages: str = "pair",
) -> tuple[_Run, bool, int, float]:
    s = s or Schedule(max_iter=max_iter)
    if messages not in MESSAGE_SCHEMES:
        raise ValueError(f"unknown message scheme {messages!r}")
    run = MESSAGE_SCHEMES[messages](g, n, models or g.models)
    run.initialize()
    converged = False
    res = math.inf
    it = 0
    limit = min(s.max_iter, max_iter)
    for it in range(1, limit + 1):
        run.power_terms = []
        res = run.step()
        if res < s.tol:
            converged = True
            break
    return run, converged, it, res


def cluster_query(
    g: CompactFactorGraph, q: Query, s: Schedule | None = None, *, n: int | None = None,
    models: LocalModels | None = None, messages: str = "pair",
) -> InferenceResult:
    """P(target | evidence) by region propagation at domain size ``n``.

    ``messages="pair"`` passes tables over the fillers of both individuals
    of a pair; ``"factored"`` passes one binary message per filler.
    """
    if n is None:
        if not isinstance(q.domain, Exact):
            raise CrdlError("cluster_query needs an exact domain size; use limit_query for N = infinity")
        n = q.domain.n
    if n < g.m:
        raise CrdlError(f"N={n} is smaller than the {g.m} named individuals")
    node, ind = _target_of(q)
    if g.fallback is not None:
        res = plbp(shatter(g.sn.tbox, q.with_domain(Exact(n))), q, s)
        res.warnings.append(f"{g.fallback}; fell back to parameterized LBP regions")
        return res
    run, converged, it, res = propagate(g, n, s, models, messages=messages)
    p = run.belief(ind, node)
    out = InferenceResult(probability=p, iterations=it, converged=converged, residual=res,
                          engine="cluster", n=n)
    out.extra["power_terms"] = list(run.power_terms)
    out.extra["run"] = run
    if not converged:
        out.warnings.append(f"cluster propagation did not converge in {it} iterations")
    return out


def saturated(power_terms, threshold: float = 1e-300) -> bool:
    """All power terms are indistinguishable from their limits 0 or 1."""
    return all(t < threshold for t in power_terms)


def limit_query(
    g: CompactFactorGraph, q: Query, s: Schedule | None = None, *, tol: float = 1e-9,
    messages: str = "pair",
) -> InferenceResult:
    """Approximate P(target | evidence) for a countably infinite domain.

    Runs the propagation with N = M+1, 2(M+1), ... until the power terms
    have saturated and two consecutive results agree.
    """
    n = g.m + 1
    prev = cluster_query(g, q, s, n=n, messages=messages)
    while True:
        if 2 * n > OVERFLOW_N:
            prev.converged = False
            prev.warnings.append("no saturation before the domain-size overflow guard")
            prev.n = "inf"
            return prev
        n *= 2
        cur = cluster_query(g, q, s, n=n, messages=messages)
        if (
            abs(cur.probability - prev.probability) < tol
            and saturated(cur.extra["power_terms"])
            and saturated(prev.extra["power_terms"])
        ):
            cur.extra["saturation_n"] = n // 2
            cur.probability = prev.probability
            cur.n = "inf"
            cur.engine = "cluster"
            return cur
        prev = cur


def domain_profile(
    g: CompactFactorGraph, concept: str, q: Query, s: Schedule | None = None,
    *, messages: str = "pair",
) -> tuple[float, float]:
    """[min, max] of P(concept(z) | evidence) over named individuals and a generic one."""
    res = cluster_query(g, q, s, messages=messages)
    run = res.extra["run"]
    node = ConceptName(concept)
    vals = [run.belief(o, node) for o in run.owners]
    return min(vals), max(vals)


def compact_graph(t: Terminology, q: Query, *, n: int | None = None) -> CompactFactorGraph:
    if n is None and isinstance(q.domain, Exact):
        n = q.domain.n
    return build_slice_factors(shatter(t, q, n=n))


# ---------------------------------------------------------------------------
# independent check: a region as an explicit Bayesian network


def region_network(run: _Run, o: str, soft_exclude=None) -> tuple[GroundedNetwork, dict]:
    """Region o written out as a grounded Bayesian network.

    Every partner is an explicit individual whose filler variables carry the
    incoming messages as priors; soft evidence on the owner's boundary
    variables becomes a clamped child.  Only practical for small N.
    Returns the network and a map from (F, partner key) to grounded filler.
    """
    g = run.g
    partners = []
    for y in run.others(o):
        if y == GEN:
            partners += [(GEN, f"#p{i}") for i in range(run.generic_others(o))]
        else:
            partners.append((y, y))
    domain = [o] + [name for _, name in partners]
    variables, cpts = [], {}
    for nd in g.sn.nodes:
        if isinstance(nd, Role):
            for y in domain:
                v = GroundedVariable(nd, (o, y))
                variables.append(v)
                cpts[v] = ground_role(nd.name, o, y, run.models)
        else:
            v = GroundedVariable(nd, (o,))
            variables.append(v)
            cpts[v] = ground_unary(nd, o, run.models, domain)
    fmap = {}
    for key, name in partners:
        for f in g.fillers:
            v = GroundedVariable(f, (name,))
            variables.insert(0, v)
            cpts[v] = PriorCPT(run.n_to(o, f, key))
            fmap.setdefault((f, key), v)
    evidence = dict(g.factors[o].evidence)
    for (rname, a, b), val in run.role_ev.items():
        if a == o and b in domain:
            evidence[GroundedVariable(Role(rname), (a, b))] = val
    for v in g.factors[o].boundary:
        if v in evidence or v == soft_exclude:
            continue
        p = run.n_own(o, v.relation)
        lam = max(p, 1.0 - p)
        soft = GroundedVariable(ConceptName(f"_soft_{v.relation}"), (o,))
        variables.append(soft)
        cpts[soft] = ConditionalCPT(v, o, p / lam, (1.0 - p) / lam, (v,))
        evidence[soft] = 1
    net = GroundedNetwork(variables, {v: cpts[v] for v in variables}, evidence, len(domain),
                          [o], None, {}, domain)
    return net, fmap
