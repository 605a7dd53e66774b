"""Command-line front end: ``crdl infer | validate | bench | gen``."""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from dataclasses import dataclass, field
from importlib import resources

from . import cluster, credal, exact, lbp
from .generate import generate_text
from .grounding import ground, prune, shatter
from .logic import (
    ConceptAssertion,
    CrdlError,
    Exact,
    Infinite,
    Query,
    Range,
    ResourceLimit,
    Unconstrained,
    UnsupportedConstruct,
    load_terminology,
    parse_assertion,
    parse_evidence,
    parse_terminology,
    validate,
)
from .results import Schedule

EXIT_OK, EXIT_INPUT, EXIT_UNSUPPORTED, EXIT_RESOURCE = 0, 1, 2, 3
ENGINES = ("exact", "lbp", "plbp", "cluster", "credal", "auto")
BENCH_EXACT_MAX = 9
SUITES = {"tu": ("tu.crl", "C"), "kangaroo": ("kangaroo.crl", "Parent")}


@dataclass
class RunRecord:
    query: str
    engine: str
    n: str
    probability: float | None = None
    interval: tuple[float, float] | None = None
    iterations: int = 0
    converged: bool = True
    runtime_ms: float = 0.0
    warnings: list[str] = field(default_factory=list)
    saturation_n: int | None = None

    def to_dict(self) -> dict:
        out = {"query": self.query, "engine": self.engine, "n": self.n}
        if self.interval is not None:
            out["interval"] = [self.interval[0], self.interval[1]]
        else:
            out["probability"] = self.probability
        out.update(
            iterations=self.iterations, converged=self.converged,
            runtime_ms=self.runtime_ms, warnings=list(self.warnings),
        )
        if self.saturation_n is not None:
            out["saturation_n"] = self.saturation_n
        return out

    def table(self) -> str:
        rows = [("query", self.query), ("engine", self.engine), ("n", self.n)]
        if self.interval is not None:
            rows.append(("interval", f"[{self.interval[0]:.4f}, {self.interval[1]:.4f}]"))
        else:
            rows.append(("probability", f"{self.probability:.4f}"))
        rows += [
            ("iterations", str(self.iterations)),
            ("converged", "yes" if self.converged else "no"),
            ("runtime_ms", f"{self.runtime_ms:.1f}"),
        ]
        if self.saturation_n is not None:
            rows.append(("saturation_n", str(self.saturation_n)))
        rows += [("warning", w) for w in self.warnings]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def parse_domain(text: str):
    """``5`` | ``inf`` | ``a..b`` | ``le:max``."""
    text = text.strip()
    try:
        if text in ("inf", "infinity", "∞"):
            return Infinite()
        if text.startswith("le:"):
            return Unconstrained(int(text[3:]))
        m = re.fullmatch(r"(\d+)\.\.(\d+)", text)
        if m:
            return Range(int(m.group(1)), int(m.group(2)))
        return Exact(int(text))
    except ValueError as exc:
        raise CrdlError(f"bad domain size {text!r}: {exc}") from None


def _query_from_args(args, tbox) -> Query:
    target = parse_assertion(args.query)
    if not isinstance(target, ConceptAssertion) or not target.positive:
        raise CrdlError("the query must be a positive concept assertion such as C(a0)")
    evidence = parse_evidence(args.evidence) if args.evidence else ()
    return Query(target, evidence, parse_domain(args.n))


def _schedule(args) -> Schedule:
    return Schedule(mode=args.mode, damping=args.damping, max_iter=args.max_iter, tol=args.tol)


def _pick_engine(tbox, q: Query, report) -> str:
    if not report.profile.uniqueness or isinstance(q.domain, (Range, Unconstrained)):
        return "credal"
    if isinstance(q.domain, Exact):
        net = prune(ground(tbox, q), q)
        if len(net) <= exact.enumeration_guard():
            return "exact"
    if tbox.has_inverse_roles():
        return "lbp" if isinstance(q.domain, Exact) else "cluster"
    return "cluster"


def run_query(tbox, q: Query, engine: str, s: Schedule, scheme: str = "cluster") -> RunRecord:
    report = validate(tbox, q)
    if not report.passed:
        from .logic import ValidationError

        raise ValidationError(list(report.violations))
    if engine == "auto":
        engine = _pick_engine(tbox, q, report)
    point_engine = engine in ("exact", "lbp", "plbp", "cluster")
    if point_engine and not report.profile.uniqueness:
        raise UnsupportedConstruct(
            f"the terminology has interval-valued or missing probabilities; engine {engine} "
            "needs point values, use --engine credal"
        )
    if point_engine and isinstance(q.domain, (Range, Unconstrained)):
        raise UnsupportedConstruct(f"engine {engine} needs an exact domain size; use --engine credal")
    if isinstance(q.domain, Infinite) and engine != "cluster":
        raise UnsupportedConstruct("N = inf is only supported by the cluster engine")
    rec = RunRecord(str(q), engine, str(q.domain))
    t0 = time.perf_counter()
    if engine == "exact":
        rec.probability = exact.ve_query(ground(tbox, q), q)
    elif engine == "lbp":
        res = lbp.grounded_lbp(ground(tbox, q), q, s)
        rec.probability, rec.iterations, rec.converged = res.probability, res.iterations, res.converged
        rec.warnings += res.warnings
    elif engine == "plbp":
        res = lbp.plbp(shatter(tbox, q), q, s)
        rec.probability, rec.iterations, rec.converged = res.probability, res.iterations, res.converged
        rec.warnings += res.warnings
    elif engine == "cluster":
        g = cluster.compact_graph(tbox, q)
        if isinstance(q.domain, Infinite):
            res = cluster.limit_query(g, q, s)
            rec.saturation_n = res.extra.get("saturation_n")
        else:
            res = cluster.cluster_query(g, q, s)
        rec.probability, rec.iterations, rec.converged = res.probability, res.iterations, res.converged
        rec.warnings += res.warnings
    else:
        g = cluster.compact_graph(tbox, q)
        res = credal.interval_query(g, None, q, s, scheme=scheme)
        rec.interval, rec.iterations, rec.converged = res.interval, res.iterations, res.converged
        rec.warnings += res.warnings
    rec.runtime_ms = (time.perf_counter() - t0) * 1000.0
    return rec


# ---------------------------------------------------------------------------
# subcommands


def cmd_infer(args) -> int:
    tbox = load_terminology(args.tbox)
    q = _query_from_args(args, tbox)
    rec = run_query(tbox, q, args.engine, _schedule(args), args.scheme)
    print(json.dumps(rec.to_dict(), indent=2) if args.out == "json" else rec.table())
    return EXIT_OK


def cmd_validate(args) -> int:
    tbox = load_terminology(args.tbox)
    report = validate(tbox)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.passed else EXIT_INPUT


def _suite_tbox(name: str):
    fname, target = SUITES[name]
    text = (resources.files("crdl") / "data" / fname).read_text(encoding="utf-8")
    return parse_terminology(text), target


def bench_suite(name: str, ns: list[int]) -> dict:
    """Exact, LBP and cluster rows for one built-in suite."""
    tbox, target = _suite_tbox(name)
    rows: dict[str, list] = {"Exact": [], "LBP": [], "Proposed": [], "Runtime(ms)": []}
    for n in ns:
        q = Query(ConceptAssertion(target, "a0"), (), Exact(n))
        try:
            rows["Exact"].append(exact.ve_query(ground(tbox, q), q) if n <= BENCH_EXACT_MAX else None)
        except CrdlError:
            rows["Exact"].append(None)
        try:
            res = lbp.plbp(shatter(tbox, q), q)
            rows["LBP"].append(res.probability if res.converged else None)
        except CrdlError:
            rows["LBP"].append(None)
        t0 = time.perf_counter()
        try:
            rows["Proposed"].append(cluster.cluster_query(cluster.compact_graph(tbox, q), q).probability)
        except CrdlError:
            rows["Proposed"].append(None)
        rows["Runtime(ms)"].append(round((time.perf_counter() - t0) * 1000.0, 1))
    return {"suite": name, "query": f"P({target}(a0))", "n": ns, "rows": rows}


def format_bench(result: dict) -> str:
    head = ["N"] + [str(n) for n in result["n"]]
    lines = [[k + ":"] + [
        "—" if v is None else (f"{v:.1f}" if k.startswith("Runtime") else f"{v:.4f}") for v in vals
    ] for k, vals in result["rows"].items()]
    table = [head] + lines
    widths = [max(len(r[i]) for r in table) for i in range(len(head))]
    out = [f"{result['suite']}: {result['query']}"]
    for r in table:
        out.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(out)


def cmd_bench(args) -> int:
    try:
        ns = [int(x) for x in args.n_list.split(",") if x.strip()]
    except ValueError:
        raise CrdlError(f"bad --n-list {args.n_list!r}") from None
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    results = [bench_suite(name, ns) for name in suites]
    print("\n\n".join(format_bench(r) for r in results))
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        text = generate_text(args.seed, args.nodes, args.det, args.restr, roles=args.roles)
    except ValueError as exc:
        raise CrdlError(str(exc)) from None
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crdl", description="Inference in probabilistic description logic terminologies.")
    sub = p.add_subparsers(dest="command", required=True)

    inf = sub.add_parser("infer", help="compute P(query | evidence)")
    inf.add_argument("--tbox", required=True, help="terminology file (.crl)")
    inf.add_argument("--query", required=True, help='target assertion, e.g. "C(a0)"')
    inf.add_argument("--evidence", default="", help='comma-separated assertions, e.g. "not C(a1), B(a2)"')
    inf.add_argument("--n", required=True, help="domain size: int, inf, a..b or le:max")
    inf.add_argument("--engine", choices=ENGINES, default="auto")
    inf.add_argument("--scheme", choices=("cluster", "l2u"), default="cluster",
                     help="interval propagation scheme for the credal engine")
    inf.add_argument("--out", choices=("json", "table"), default="json")
    inf.add_argument("--tol", type=float, default=1e-8)
    inf.add_argument("--max-iter", type=int, default=10000)
    inf.add_argument("--damping", type=float, default=0.0)
    inf.add_argument("--mode", choices=("synchronous", "sequential"), default="synchronous")
    inf.set_defaults(func=cmd_infer)

    val = sub.add_parser("validate", help="check a terminology and report its assumption profile")
    val.add_argument("--tbox", required=True)
    val.set_defaults(func=cmd_validate)

    bench = sub.add_parser("bench", help="reproduce the Exact / LBP / Proposed tables")
    bench.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    bench.add_argument("--n-list", default="1,5,9")
    bench.add_argument("--json-out", default=None, help="also write the results as JSON")
    bench.set_defaults(func=cmd_bench)

    gen = sub.add_parser("gen", help="write a random terminology")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--nodes", type=int, required=True)
    gen.add_argument("--det", type=int, default=0)
    gen.add_argument("--restr", type=int, default=0)
    gen.add_argument("--roles", type=int, default=1)
    gen.add_argument("--output", "-o", default=None)
    gen.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedConstruct as exc:
        print(f"crdl: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except ResourceLimit as exc:
        print(f"crdl: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (CrdlError, OSError, ValueError) as exc:
        print(f"crdl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
