"""Independent reference values, written without the engine's code paths."""

import itertools
import math


def kangaroo_parent(n: int) -> float:
    """P(Parent(a0)) in closed form.

    Human(a0) must hold, and then some child y (a0 itself included) is Human.
    The self-pair r(a0,a0) witnesses with prob 0.3 since Human(a0) is given.
    """
    human = 0.9 * 0.6
    return human * (1.0 - 0.7 * (1.0 - 0.3 * human) ** (n - 1))


def tu_c(n: int) -> float:
    """P(C(a0)) in the Tu terminology by summing over the A configuration.

    Given A, D(y) is 0.7^k for k non-A individuals when y != a0.  D(a0) shares
    the row r(a0,.) with exists r.D at a0, so that row is enumerated.
    """
    total = 0.0
    for a in itertools.product((0, 1), repeat=n):
        p_a = math.prod(0.9 if x else 0.1 for x in a)
        bad = [i for i in range(n) if not a[i]]
        p_d = 0.7 ** len(bad)
        p_not = 0.0
        for row in itertools.product((0, 1), repeat=n):
            p_row = math.prod(0.3 if v else 0.7 for v in row)
            d0 = all(row[z] == 0 for z in bad)
            q = 0.0 if (row[0] and d0) else 1.0
            for y in range(1, n):
                if row[y]:
                    q *= 1.0 - p_d
            p_not += p_row * q
        p_b0 = 0.55 if a[0] else 1.0
        total += p_a * p_b0 * p_not
    return 1.0 - total


def atleast_bruteforce(k: int, probs) -> float:
    """P(at least k successes) over independent Bernoullis by outcome enumeration."""
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(probs)):
        if sum(bits) >= k:
            total += math.prod(p if b else 1.0 - p for p, b in zip(probs, bits))
    return total
