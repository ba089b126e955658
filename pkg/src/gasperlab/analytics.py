"""Probability bounds for justification and finalization liveness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

TABLE1_N = (2, 5, 7, 10, 20)
TABLE1_P = (0.5, 0.66)
LOG_SPACE_N = 500


@dataclass(frozen=True)
class LivenessParams:
    C: int = 64
    S: int = 900
    eps: float = 30.0
    p: float = 0.5
    r: float = 1.0
    n: int = 10

    def __post_init__(self):
        if not (0 <= self.p <= 1 and 0 <= self.r <= 1):
            raise ValueError("p and r must lie in [0, 1]")
        if self.C < 1 or self.S < 1 or self.n < 1:
            raise ValueError("C, S and n must be positive")

    @property
    def L(self) -> int:
        return log2_exact(self.C)


def log2_exact(c: int) -> int:
    if c < 1 or c & (c - 1):
        raise ValueError(f"C={c} is not a power of two")
    return c.bit_length() - 1


def serfling_tail(n: int, N_pop: int, delta: float, lo: float, hi: float) -> float:
    """Tail bound on the sample mean exceeding its expectation by delta.

    Valid for n draws without replacement from a population of N_pop values
    in [lo, hi].
    """
    if hi == lo:
        raise ValueError("degenerate range: hi == lo")
    if hi < lo or not 1 <= n <= N_pop or delta < 0:
        raise ValueError("need lo < hi, 1 <= n <= N_pop and delta >= 0")
    correction = 1 - (n - 1) / N_pop
    return min(1.0, math.exp(-2 * n * delta**2 / (correction * (hi - lo) ** 2)))


def justification_event_bound(C: int, S: int, eps: float, form: str = "weak") -> float:
    """Lower bound on the probability that every dyadic slot prefix stays balanced."""
    L = log2_exact(C)
    total = 0.0
    for i in range(1, L + 1):
        if form == "tight":
            correction = 1 - (2 ** (i - 1) * S - 1) / (2**L * S)
            total += math.exp(-(2**i) * eps**2 / (correction * S))
        elif form == "weak":
            total += math.exp(-(2**i) * eps**2 / S)
        else:
            raise ValueError(f"unknown form {form!r}")
    return 1 - total


def justification_liveness_bound(r: float, C: int, S: int, eps: float) -> float:
    """Probability of justifying a new descendant in the next epoch, floored at 0."""
    slack = 1 - justification_event_bound(C, S, eps, "weak")
    return max(0.0, r - slack - 3.0 ** (-(C - 1)))


def fail_pattern_count(n: int, i: int) -> int:
    """Arrangements of i failing epochs among n with no two adjacent successes."""
    if not 0 <= i <= n:
        raise ValueError("need 0 <= i <= n")
    return math.comb(i + 1, n - i) if n - i <= i + 1 else 0


def no_finalization_prob(n: int, p: float) -> float:
    """Probability that n i.i.d. epochs never contain two consecutive justifications."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    q = 1 - p
    terms = range(n // 2, n + 1)  # i with n - i <= i + 1
    if n <= LOG_SPACE_N:
        return sum(fail_pattern_count(n, i) * q**i * p ** (n - i) for i in terms)
    if p == 0 or q == 0:
        return 1.0 if p == 0 else float(n == 1)
    logs = [
        math.lgamma(i + 2) - math.lgamma(n - i + 1) - math.lgamma(2 * i - n + 2)
        + i * math.log(q) + (n - i) * math.log(p)
        for i in terms
    ]
    top = max(logs)
    return math.exp(top) * math.fsum(math.exp(x - top) for x in logs)


def no_finalization_prob_dp(n: int, p: float) -> float:
    """Same quantity by a two-state recursion on the last epoch's outcome."""
    if n < 1:
        raise ValueError("n must be at least 1")
    ends_fail, ends_success = 1 - p, p
    for _ in range(n - 1):
        ends_fail, ends_success = (ends_fail + ends_success) * (1 - p), ends_fail * p
    return ends_fail + ends_success


def no_finalization_prob_enum(n: int, p: float) -> float:
    """Same quantity by listing all 2^n outcome sequences."""
    total = 0.0
    for seq in product((0, 1), repeat=n):
        if any(a and b for a, b in zip(seq, seq[1:])):
            continue
        k = sum(seq)
        total += p**k * (1 - p) ** (n - k)
    return total


GOLDEN_DECAY = (1 + math.sqrt(5)) / 4


def finalization_failure_upper(n: int, p: float) -> float:
    """Asymptotic bound for p >= 1/2; it drops a constant factor, so it can undershoot."""
    if p < 0.5 or p > 1:
        raise ValueError("the bound needs 1/2 <= p <= 1")
    return GOLDEN_DECAY**n / math.sqrt(5)


def table1() -> list[tuple[int, float, float]]:
    return [(n, p, no_finalization_prob(n, p)) for p in TABLE1_P for n in TABLE1_N]
