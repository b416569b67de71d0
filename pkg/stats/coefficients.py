"""
Learning-coefficient bound for naive Bayesian networks with latent nodes.

For a learner with hidden state counts T (K nodes) and observables Y, and a
truth with hidden state counts S (H nodes), the stochastic complexity grows at
most like mu * log n with

    mu = 1/2 Mb prod(S) - 1/2 sum(S) + H/2 + sum(T) - K,    Mb = sum_j (Y[j] - 1)

which splits into a regular part (lemma2) and a redundancy part (lemma3).
Everything is computed with exact fractions; it depends only on shapes.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

from stats.errors import ModelError
from stats.model_core import NetworkSpec, TrueModel, check_compatible, dimension

Criterion = Literal['bic', 'singular']


@dataclass(frozen=True)
class CoefficientReport:
    """Bound mu, its two parts, and the regular-model coefficient d/2."""

    mu: Fraction
    lemma2: Fraction
    lemma3: Fraction
    half_d: Fraction
    d: int

    def as_line(self) -> str:
        return (
            f"d={self.d} half_d={float(self.half_d)} lemma2={float(self.lemma2)} "
            f"lemma3={float(self.lemma3)} mu={float(self.mu)}"
        )


def _observable_dim(spec: NetworkSpec) -> int:
    return sum(y - 1 for y in spec.Y)


def lemma2_coeff(truth: TrueModel, spec: NetworkSpec) -> Fraction:
    """Regular part: 1/2 { Mb prod(S) + sum(S - 1) }."""
    check_compatible(truth, spec)
    S = truth.S
    return Fraction(_observable_dim(spec) * math.prod(S) + sum(s - 1 for s in S), 2)


def lemma3_coeff(truth: TrueModel, spec: NetworkSpec) -> Fraction:
    """Redundancy part: sum_{k<=H} (T[k] - S[k]) + sum_{k>H} (T[k] - 1)."""
    check_compatible(truth, spec)
    H = truth.H
    redundant = sum(t - s for t, s in zip(spec.T[:H], truth.S)) + sum(t - 1 for t in spec.T[H:])
    return Fraction(redundant)


def theorem1_mu(truth: TrueModel, spec: NetworkSpec) -> CoefficientReport:
    """
    Compute the bound mu for a learner/truth pair.

    Args:
        truth: True model (only its shape is used)
        spec: Learner shape

    Returns:
        CoefficientReport: mu, lemma2, lemma3, d and d/2
    """
    check_compatible(truth, spec)
    S, H = truth.S, truth.H
    mu = (
        Fraction(_observable_dim(spec) * math.prod(S), 2)
        - Fraction(sum(S), 2)
        + Fraction(H, 2)
        + sum(spec.T)
        - spec.K
    )
    d = dimension(spec)
    return CoefficientReport(
        mu=mu,
        lemma2=lemma2_coeff(truth, spec),
        lemma3=lemma3_coeff(truth, spec),
        half_d=Fraction(d, 2),
        d=d,
    )


def penalty(report: CoefficientReport, criterion: Criterion, n: int) -> float:
    """
    Complexity penalty coefficient times log n.

    Args:
        report: Coefficients of the candidate
        criterion: 'bic' uses d/2, 'singular' uses mu
        n: Sample count (at least 2)
    """
    if n < 2:
        raise ModelError(f"Penalty needs n >= 2, got {n}")
    if criterion == 'bic':
        return float(report.half_d) * math.log(n)
    if criterion == 'singular':
        return float(report.mu) * math.log(n)
    raise ModelError(f"Unknown criterion {criterion!r}")
