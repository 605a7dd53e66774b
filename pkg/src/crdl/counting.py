"""Capped witness-count distributions for restriction nodes.

A restriction at ``x`` counts witnesses ``y`` (role holds and filler holds,
or fails for value restrictions).  Everything downstream only needs the
count up to the threshold ``cap``, so distributions are arrays of length
``cap + 1`` whose last entry is P(count >= cap).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import betainc, gammaln


def binomial_capped(n: int, p: float, cap: int) -> np.ndarray:
    """Distribution of min(cap, Binomial(n, p)); ``n`` may be astronomically large."""
    out = np.zeros(cap + 1)
    if n <= 0 or p <= 0.0:
        out[0] = 1.0
        return out
    if p >= 1.0:
        out[min(cap, n)] = 1.0
        return out
    if cap == 0:
        out[0] = 1.0
        return out
    log_q = math.log1p(-p)
    if cap == 1:
        out[0] = math.exp(n * log_q)
        out[1] = -math.expm1(n * log_q)
        return out
    log_p = math.log(p)
    for j in range(min(cap, n + 1)):
        if j > n:
            break
        log_pmf = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1) + j * log_p + (n - j) * log_q
        out[j] = math.exp(log_pmf)
    if n >= cap:
        out[cap] = float(betainc(cap, n - cap + 1, p))
    return out


def convolve_capped(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cap = len(a) - 1
    full = np.convolve(a, b)
    out = full[: cap + 1].copy()
    out[cap] = full[cap:].sum()
    return out


def unit(cap: int) -> np.ndarray:
    out = np.zeros(cap + 1)
    out[0] = 1.0
    return out


def count_distribution(groups: Sequence[tuple[float, int]], cap: int) -> np.ndarray:
    """Capped distribution of a sum of Binomial(n_i, p_i) for ``groups = [(p_i, n_i)]``."""
    dist = unit(cap)
    for p, n in groups:
        dist = convolve_capped(dist, binomial_capped(n, p, cap))
    return dist


def leave_one_out(groups: Sequence[tuple[float, int]], cap: int) -> list[np.ndarray]:
    """For each group, the count distribution with one of its members removed."""
    parts = [binomial_capped(n, p, cap) for p, n in groups]
    prefix = [unit(cap)]
    for d in parts:
        prefix.append(convolve_capped(prefix[-1], d))
    suffix = [unit(cap)] * (len(parts) + 1)
    for i in range(len(parts) - 1, -1, -1):
        suffix[i] = convolve_capped(suffix[i + 1], parts[i])
    out = []
    for i, (p, n) in enumerate(groups):
        rest = convolve_capped(prefix[i], suffix[i + 1])
        out.append(convolve_capped(rest, binomial_capped(n - 1, p, cap)) if n > 0 else rest)
    return out


def reach_probability(dist: np.ndarray, extra: float) -> float:
    """P(count + W >= cap) for an extra Bernoulli(extra) witness W."""
    cap = len(dist) - 1
    if cap == 0:
        return 1.0
    return float(dist[cap] + dist[cap - 1] * extra)


def restriction_factor_messages(
    cap: int,
    negated: bool,
    child: float,
    groups: Sequence[tuple[float, float | bool, int]],
) -> tuple[float, list[tuple[float, float | None]]]:
    """Sum-product messages of a restriction factor.

    ``groups`` lists ``(role_msg, filler_msg_or_constant, size)``, where the
    messages are P(value = 1) of the incoming variable-to-factor messages and
    a group of ``size`` members all carry the same pair of messages.  Returns
    the message to the child and, per group, the messages to one member's
    role and filler variables (``None`` for constant fillers).
    """

    def filler_witness(f: float) -> float:
        return 1.0 - f if negated else f

    counted = []
    for role, filler, size in groups:
        w = filler_witness(float(filler))
        counted.append((role * w, size))
    total = count_distribution(counted, cap)
    reached = float(total[cap])
    to_child = 1.0 - reached if negated else reached

    def combine(p_reached_given: tuple[float, float]) -> float:
        outs = []
        for pr in p_reached_given:
            p_true = 1.0 - pr if negated else pr
            outs.append((1.0 - child) * (1.0 - p_true) + child * p_true)
        z = outs[0] + outs[1]
        return 0.5 if z <= 0.0 else outs[1] / z

    result = []
    loo = leave_one_out(counted, cap)
    for (role, filler, size), rest in zip(groups, loo):
        if size <= 0:
            result.append((0.5, None if isinstance(filler, bool) else 0.5))
            continue
        w = filler_witness(float(filler))
        to_role = combine((reach_probability(rest, 0.0), reach_probability(rest, w)))
        if isinstance(filler, bool):
            to_filler = None
        else:
            wit0 = role * filler_witness(0.0)
            wit1 = role * filler_witness(1.0)
            to_filler = combine((reach_probability(rest, wit0), reach_probability(rest, wit1)))
        result.append((to_role, to_filler))
    return to_child, result
