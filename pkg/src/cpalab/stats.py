"""Exact two-sided binomial test of classifier accuracy against chance.

The p-value sums the probabilities of every outcome no more likely than the
observed one. Everything runs in log space through log-gamma, so trial
counts in the hundreds of thousands stay exact to double precision; the
probability-ordering comparison uses a relative tolerance on the log scale
to absorb rounding in ties. p-values far below the float range are carried
as log2 and rendered as powers of two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln, logsumexp

#: relative tolerance on log-probabilities for the tie comparison
LOG_TIE_RTOL = 1e-12

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class BinomialTestResult:
    n: int
    k: int
    accuracy: float
    p_value: float
    log2_p_value: float
    alpha: float
    reject: bool

    def p_value_str(self) -> str:
        return format_p_value(self.p_value, self.log2_p_value)


def format_p_value(p: float, log2_p: float) -> str:
    """Two decimals normally; powers of two once p drops below 1e-6."""
    if p >= 1e-6:
        return f"{p:.2f}"
    if abs(log2_p - round(log2_p)) < 1e-6:
        return f"2^{round(log2_p)}"
    return f"2^{log2_p:.1f}"


def binomial_log_pmf(n: int, p0: float) -> np.ndarray:
    """log Pr[K = i] for i = 0..n under Bin(n, p0)."""
    i = np.arange(n + 1, dtype=np.float64)
    return (
        gammaln(n + 1.0)
        - gammaln(i + 1.0)
        - gammaln(n - i + 1.0)
        + i * math.log(p0)
        + (n - i) * math.log1p(-p0)
    )


def binomial_two_sided(k: int, n: int, p0: float = 0.5, alpha: float = 0.01) -> BinomialTestResult:
    """Exact two-sided test of H0: accuracy = p0 given k successes in n trials."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must lie strictly between 0 and 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")

    if p0 == 0.5 and k in (0, n):
        # only the two extreme outcomes are this unlikely: p = 2 * 2^-n,
        # computed analytically so the power-of-two form is exact
        log2_p = float(1 - n)
        p = 2.0 ** log2_p if log2_p > -1074 else 0.0
    else:
        log_pmf = binomial_log_pmf(n, p0)
        threshold = log_pmf[k]
        mask = log_pmf <= threshold + LOG_TIE_RTOL * abs(threshold)
        if mask.all():
            log_p = 0.0  # the ordering set covers every outcome: p is 1 by definition
        else:
            log_p = min(float(logsumexp(log_pmf[mask])), 0.0)
        p = math.exp(log_p)
        log2_p = log_p / _LN2
    return BinomialTestResult(
        n=n,
        k=k,
        accuracy=k / n,
        p_value=p,
        log2_p_value=log2_p,
        alpha=alpha,
        reject=p < alpha,
    )


def summarize(results: Iterable[tuple[str, BinomialTestResult]]) -> list[dict]:
    """Report rows: experiment id, accuracy %, formatted p-value, reject flag."""
    rows = []
    for experiment_id, r in results:
        rows.append(
            {
                "experiment": experiment_id,
                "accuracy": f"{100.0 * r.accuracy:.2f}%",
                "p_value": r.p_value_str(),
                "reject": r.reject,
            }
        )
    return rows
