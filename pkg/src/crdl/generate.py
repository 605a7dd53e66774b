"""Seeded random terminologies for property tests and benchmarks."""

from __future__ import annotations

import random

from .logic import Terminology, parse_terminology


def generate_text(
    seed: int,
    nodes: int,
    deterministic: int = 0,
    restrictions: int = 0,
    *,
    roles: int = 1,
    counting: bool = False,
) -> str:
    """A .crl terminology whose t-network has ``nodes`` concept and restriction nodes.

    ``deterministic`` of them are defined concepts and ``restrictions`` are
    restriction nodes; the rest carry priors or conditional assessments on a
    single earlier concept, so the result always satisfies the Bayesian
    assumption.  Restrictions only occur inside definitions.
    """
    free = nodes - deterministic - restrictions
    if nodes < 1 or deterministic < 0 or restrictions < 0:
        raise ValueError("node counts must be non-negative and nodes >= 1")
    if free < 1:
        raise ValueError("at least one node must be probabilistic")
    if restrictions and not deterministic:
        raise ValueError("restrictions need at least one definition to occur in")
    if restrictions and roles < 1:
        raise ValueError("restrictions need at least one role")
    rng = random.Random(seed)

    def prob() -> str:
        return f"{rng.randint(5, 95) / 100:.2f}"

    # interleave probabilistic and defined concepts; the first is probabilistic
    kinds = ["p"] + rng.sample(["p"] * (free - 1) + ["d"] * deterministic, free - 1 + deterministic)
    names = [f"C{i}" for i in range(len(kinds))]
    role_names = [f"r{i}" for i in range(roles)] if restrictions else []
    lines = [f"# generated: seed={seed} nodes={nodes} det={deterministic} restr={restrictions}"]
    for r in role_names:
        lines.append(f"P({r}) = {prob()}")

    def_positions = [i for i, k in enumerate(kinds) if k == "d"]
    # each restriction lives in one definition; every definition after some probabilistic concept
    slots: dict[int, list[str]] = {i: [] for i in def_positions}
    used_keys: set = set()
    for j in range(restrictions):
        for _ in range(100):
            pos = rng.choice(def_positions)
            filler = rng.choice(names[:pos])
            role = rng.choice(role_names)
            kind = rng.choice(["exists", "forall", "atleast"] if counting else ["exists", "forall"])
            text = f"{kind} {role}.{filler}" if kind != "atleast" else f"atleast 2 {role}.{filler}"
            if text not in used_keys:
                break
        else:
            raise ValueError("could not place distinct restrictions; use more nodes")
        used_keys.add(text)
        slots[pos].append(text)

    for i, (name, kind) in enumerate(zip(names, kinds)):
        earlier = names[:i]
        if kind == "p":
            if not earlier or rng.random() < 0.4:
                lines.append(f"P({name}) = {prob()}")
            else:
                cond = rng.choice(earlier)
                lines.append(f"P({name} | {cond}) = {prob()}")
                lines.append(f"P({name} | not {cond}) = {prob()}")
            continue
        operands = [f"({s})" for s in slots[i]]
        candidates = list(earlier)
        rng.shuffle(candidates)
        while len(operands) < 2 and candidates:
            c = candidates.pop()
            operands.append(f"not {c}" if rng.random() < 0.3 else c)
        op = " and " if rng.random() < 0.5 else " or "
        lines.append(f"{name} = {op.join(operands)}")
    return "\n".join(lines) + "\n"


def generate(seed: int, nodes: int, deterministic: int = 0, restrictions: int = 0, **kw) -> Terminology:
    return parse_terminology(generate_text(seed, nodes, deterministic, restrictions, **kw))
