"""Interval-valued inference when a single joint distribution is not pinned down.

Local parameters may be intervals (explicit interval assessments, bare
inclusions, unspecified concepts) and the domain size may range over a set.
Messages become intervals [lo, hi] of P(value = 1).  Every unit of the
propagation (a slice region or a single factor) bounds its outgoing
messages by visiting the endpoint combinations of its credal parameters and
of the incoming interval messages that are not degenerate, in the style of
the 2U algorithm for binary networks.  Two propagation schemes share that
machinery:

``cluster``
    slice regions with exact inference inside, as in :mod:`crdl.cluster`;
``l2u``
    loopy 2U on the parameterized factor graph of :mod:`crdl.lbp`.

Domain-size ranges are handled by running the propagation once per
admissible N and taking the hull.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product

from .cluster import CompactFactorGraph, _Run, _target_of
from .grounding import GroundedVariable, prune, shatter
from .lbp import CountedLBP, _clip, factor_messages, lifted_graph
from .logic import (
    ConceptName,
    ConditionalModel,
    CrdlError,
    Exact,
    Infinite,
    Interval,
    LocalModels,
    PriorModel,
    Query,
    Range,
    ResourceLimit,
    Terminology,
    Unconstrained,
    local_models,
)
from .results import InferenceResult, Schedule

VERTEX_LIMIT = 1 << 14
EXHAUSTIVE_N = 64


@dataclass(frozen=True)
class IntervalMessage:
    lo: float
    hi: float

    def __post_init__(self):
        if not (-1e-12 <= self.lo <= self.hi + 1e-12 and self.hi <= 1.0 + 1e-12):
            raise ValueError(f"bad interval message [{self.lo}, {self.hi}]")

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


# ---------------------------------------------------------------------------
# credal parameters

Param = tuple  # ("concept" | "role", name, field)


def _fields(model) -> tuple[str, ...]:
    if isinstance(model, PriorModel):
        return ("p",)
    if isinstance(model, ConditionalModel):
        return ("p_true", "p_false")
    return ()


@dataclass
class CredalSpec:
    """Local models whose probabilities may be intervals."""

    models: LocalModels

    @classmethod
    def from_terminology(cls, t: Terminology) -> "CredalSpec":
        return cls(local_models(t))

    def _table(self, kind: str) -> dict:
        return self.models.concepts if kind == "concept" else self.models.roles

    def interval(self, param: Param) -> Interval:
        kind, name, fld = param
        return getattr(self._table(kind)[name], fld)

    def parameters(self) -> list[Param]:
        """Interval-valued parameters, in a fixed order."""
        out = []
        for kind in ("concept", "role"):
            for name, model in self._table(kind).items():
                for fld in _fields(model):
                    if not getattr(model, fld).point:
                        out.append((kind, name, fld))
        return out

    def widened(self, param: Param, interval: Interval) -> "CredalSpec":
        kind, name, fld = param
        concepts, roles = dict(self.models.concepts), dict(self.models.roles)
        table = concepts if kind == "concept" else roles
        table[name] = replace(table[name], **{fld: interval})
        return CredalSpec(replace(self.models, concepts=concepts, roles=roles))

    def select(self, choice: dict) -> LocalModels:
        return select_endpoints(self.models, choice)

    def vertices(self, params: list[Param] | None = None) -> list[tuple[dict, LocalModels]]:
        """Every homogeneous endpoint selection: one value per parameter for all individuals."""
        params = self.parameters() if params is None else params
        out = []
        for ends in product(("lo", "hi"), repeat=len(params)):
            choice = dict(zip(params, ends))
            out.append((choice, self.select(choice)))
        return out


def select_endpoints(models, choice: dict) -> LocalModels:
    """Point-valued local models.

    ``choice`` maps each interval parameter ``(kind, name, field)`` to
    ``"lo"``, ``"hi"`` or a number inside its interval.  ``models`` may also
    be a terminology.
    """
    if isinstance(models, Terminology):
        models = local_models(models)
    concepts, roles = dict(models.concepts), dict(models.roles)
    for kind, table in (("concept", concepts), ("role", roles)):
        for name, model in table.items():
            updates = {}
            for fld in _fields(model):
                iv = getattr(model, fld)
                if iv.point:
                    continue
                key = (kind, name, fld)
                if key not in choice:
                    raise CrdlError(f"no endpoint selected for {kind} {name} ({fld})")
                pick = choice[key]
                if pick == "lo":
                    value = iv.lo
                elif pick == "hi":
                    value = iv.hi
                else:
                    value = float(pick)
                    if not iv.lo <= value <= iv.hi:
                        raise CrdlError(f"{value} lies outside [{iv.lo}, {iv.hi}]")
                updates[fld] = Interval(value, value)
            if updates:
                table[name] = replace(model, **updates)
    return replace(models, concepts=concepts, roles=roles)


def domain_sizes(domain, m: int, limit: int = EXHAUSTIVE_N) -> tuple[list[int], bool]:
    """Admissible domain sizes, and whether the list is exhaustive.

    Ranges longer than ``limit`` are covered by their first ``limit`` sizes,
    a doubling grid and the upper end.
    """
    if isinstance(domain, Exact):
        return [domain.n], True
    if isinstance(domain, Infinite):
        raise CrdlError("interval inference over an infinite domain is not supported")
    if isinstance(domain, Range):
        lo, hi = max(domain.lo, m), domain.hi
    elif isinstance(domain, Unconstrained):
        lo, hi = m, domain.n_max
    else:
        raise CrdlError(f"unknown domain specification {domain!r}")
    if lo > hi:
        raise CrdlError(f"no admissible domain size: at least {m} named individuals, at most {hi}")
    if hi - lo + 1 <= limit:
        return list(range(lo, hi + 1)), True
    sizes = list(range(lo, lo + limit))
    n = lo + limit
    while n < hi:
        sizes.append(n)
        n *= 2
    sizes.append(hi)
    return sizes, False


def _check_vertices(count: int) -> None:
    if count > VERTEX_LIMIT:
        raise ResourceLimit(f"{count} endpoint combinations exceed the limit of {VERTEX_LIMIT}")


# ---------------------------------------------------------------------------
# interval propagation over slice regions


class _IntervalCluster:
    def __init__(self, g: CompactFactorGraph, n: int, spec: CredalSpec):
        verts = spec.vertices()
        _check_vertices(len(verts))
        self.runs = [_Run(g, n, models) for _, models in verts]
        base = self.runs[0].models
        self.lo = _Run(g, n, base)
        self.hi = _Run(g, n, base)
        self.owners = self.lo.owners

    def initialize(self) -> None:
        for run in self.runs:
            run.initialize()
        for o in self.owners:
            for f in self.runs[0].m_own[o]:
                vals = [run.m_own[o][f] for run in self.runs]
                self.lo.m_own[o][f] = min(vals)
                self.hi.m_own[o][f] = max(vals)

    def _vertices(self, o: str):
        keys = self.lo.input_keys(o)
        lo = {k: self.lo.input_value(k) for k in keys}
        hi = {k: self.hi.input_value(k) for k in keys}
        knobs = [k for k in keys if hi[k] > lo[k]]
        _check_vertices(len(self.runs) << len(knobs))
        for run in self.runs:
            for bits in product((0, 1), repeat=len(knobs)):
                fixed = dict(lo)
                for k, b in zip(knobs, bits):
                    if b:
                        fixed[k] = hi[k]
                run.fixed = fixed
                yield run
            run.fixed = None

    def update_region(self, o: str):
        own_lo, own_hi, out_lo, out_hi = {}, {}, {}, {}
        for run in self._vertices(o):
            own, out = run.update_region(o)
            for src, lo, hi in ((own, own_lo, own_hi), (out, out_lo, out_hi)):
                for key, p in src.items():
                    lo[key] = min(p, lo.get(key, math.inf))
                    hi[key] = max(p, hi.get(key, -math.inf))
        return own_lo, own_hi, out_lo, out_hi

    def step(self) -> float:
        updates = {o: self.update_region(o) for o in self.owners}
        res = 0.0
        for o, (own_lo, own_hi, out_lo, out_hi) in updates.items():
            for view, own, out in ((self.lo, own_lo, out_lo), (self.hi, own_hi, out_hi)):
                for f, p in own.items():
                    res = max(res, abs(p - view.m_own[o].get(f, 0.5)))
                    view.m_own[o][f] = p
                for key, p in out.items():
                    res = max(res, abs(p - view.m_out[o][key]))
                    view.m_out[o][key] = p
        return res

    def belief(self, o: str, node) -> tuple[float, float]:
        vals = [run.belief(o, node) for run in self._vertices(o)]
        return min(vals), max(vals)


def _cluster_interval(g: CompactFactorGraph, n: int, spec: CredalSpec, q: Query, s: Schedule):
    engine = _IntervalCluster(g, n, spec)
    engine.initialize()
    node, ind = _target_of(q)
    converged, res, it = False, math.inf, 0
    for it in range(1, min(s.max_iter, 100) + 1):
        res = engine.step()
        if res < s.tol:
            converged = True
            break
    return engine.belief(ind, node), converged, it, res


# ---------------------------------------------------------------------------
# loopy 2U on the parameterized factor graph


class _IntervalLBP:
    def __init__(self, graphs):
        self.graphs = graphs
        self.lo = CountedLBP(graphs[0])
        self.hi = CountedLBP(graphs[0])
        self.variants = []
        for fi in range(len(graphs[0].factors)):
            seen = {}
            for gr in graphs:
                f = gr.factors[fi]
                key = f.table.tobytes() if f.table is not None else "restriction"
                seen.setdefault(key, f)
            self.variants.append(list(seen.values()))

    def _factor_bounds(self, fi: int):
        inc_lo, inc_hi = self.lo.n[fi], self.hi.n[fi]
        knobs = [s for s in range(len(inc_lo)) if inc_hi[s] > inc_lo[s]]
        _check_vertices(len(self.variants[fi]) << len(knobs))
        k = len(inc_lo)
        out_lo, out_hi = [math.inf] * k, [-math.inf] * k
        for f in self.variants[fi]:
            for bits in product((0, 1), repeat=len(knobs)):
                inc = list(inc_lo)
                for s, b in zip(knobs, bits):
                    if b:
                        inc[s] = inc_hi[s]
                for s, p in enumerate(factor_messages(f, inc)):
                    out_lo[s] = min(out_lo[s], p)
                    out_hi[s] = max(out_hi[s], p)
        return out_lo, out_hi

    def step(self) -> float:
        bounds = [self._factor_bounds(fi) for fi in range(len(self.variants))]
        res = 0.0
        for fi, (blo, bhi) in enumerate(bounds):
            for view, vals in ((self.lo, blo), (self.hi, bhi)):
                row = view.m[fi]
                for s, p in enumerate(vals):
                    p = _clip(p)
                    res = max(res, abs(p - row[s]))
                    row[s] = p
        for view in (self.lo, self.hi):
            for key in view.g.edges:
                view._refresh_var(key)
        return res


def _reshatter(g: CompactFactorGraph, n: int):
    sn = g.sn
    return prune(shatter(sn.tbox, Query(sn.target, sn.evidence, Exact(n)), n=n))


def _l2u_interval(g: CompactFactorGraph, n: int, spec: CredalSpec, q: Query, s: Schedule):
    sn = _reshatter(g, n)
    verts = spec.vertices()
    _check_vertices(len(verts))
    engine = _IntervalLBP([lifted_graph(sn, models) for _, models in verts])
    converged, res, it = False, math.inf, 0
    for it in range(1, s.max_iter + 1):
        res = engine.step()
        if res < s.tol:
            converged = True
            break
    target = GroundedVariable(ConceptName(sn.target.concept), (sn.target.individual,))
    return (engine.lo.belief(target), engine.hi.belief(target)), converged, it, res


# ---------------------------------------------------------------------------


def interval_query(
    g: CompactFactorGraph,
    spec: CredalSpec | None,
    q: Query,
    s: Schedule | None = None,
    *,
    scheme: str = "cluster",
) -> InferenceResult:
    """Bounds [lo, hi] on P(target | evidence) over the credal set and the admissible N."""
    if scheme not in ("cluster", "l2u"):
        raise ValueError(f"unknown propagation scheme {scheme!r}")
    s = s or Schedule()
    spec = spec or CredalSpec(g.models)
    sizes, exhaustive = domain_sizes(q.domain, g.m)
    run = _cluster_interval if scheme == "cluster" else _l2u_interval
    lo, hi = math.inf, -math.inf
    converged, iterations, residual = True, 0, 0.0
    for n in sizes:
        (a, b), conv, it, res = run(g, n, spec, q, s)
        lo, hi = min(lo, a), max(hi, b)
        converged &= conv
        iterations = max(iterations, it)
        residual = max(residual, res)
    out = InferenceResult(
        interval=(lo, hi), iterations=iterations, converged=converged, residual=residual,
        engine="credal" if scheme == "cluster" else "credal-l2u", n=str(q.domain),
    )
    if not exhaustive:
        out.warnings.append(f"domain sizes sampled ({len(sizes)} values) over {q.domain}")
    if not converged:
        out.warnings.append("interval propagation did not converge; bounds are the last iterate")
    return out
