"""
Self-checks of the bounds and identities the toolkit relies on.

Each check produces a PropCheck with a measured margin; a failed check is a
report entry, not an exception.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from app.experiments import curve_points
from stats.coefficients import theorem1_mu
from stats.divergence import kl_tables
from stats.em import random_params
from stats.evidence import Prior
from stats.laplace import laplace_functional
from stats.model_core import NetworkSpec, ParamSet, TrueModel

logger = logging.getLogger(__name__)

JENSEN_NS = (4, 8, 16)
JENSEN_REPLICATES = 200
JENSEN_GRID = 40
# P(x = 1) under the one-observable truth of the Jensen check
JENSEN_TRUE_P = 0.3
MONOTONE_NS = (10, 100, 1000)
MONOTONE_GRID = 2001
ADDITIVE_GRID = 400
RANDOM_SHAPES = 500


@dataclass(frozen=True)
class PropCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ''

    def as_line(self) -> str:
        line = f"check={self.name} passed={str(self.passed).lower()} margin={self.margin}"
        return f"{line} {self.detail}" if self.detail else line


def random_shape_pair(rng: np.random.Generator) -> tuple[TrueModel, NetworkSpec]:
    """A random truth and a learner able to realize it."""
    M = int(rng.integers(1, 4))
    Y = tuple(int(y) for y in rng.integers(2, 5, size=M))
    H = int(rng.integers(1, 4))
    S = tuple(int(s) for s in rng.integers(1, 4, size=H))
    extra = int(rng.integers(0, 3))
    T = tuple(max(2, s + int(rng.integers(0, 3))) for s in S) + tuple(int(t) for t in rng.integers(2, 4, size=extra))
    true_spec = NetworkSpec(T=S, Y=Y)
    truth = TrueModel(true_spec=true_spec, true_params=random_params(true_spec, rng))
    return truth, NetworkSpec(T=T, Y=Y)


def check_jensen(seed: int, replicates: int = JENSEN_REPLICATES, ns=JENSEN_NS, grid: int = JENSEN_GRID) -> PropCheck:
    """
    Mean F(n) stays below -log integral exp(-n H(w)) dw plus three standard errors.

    Uses the learner with one binary hidden node and one binary observable over
    a truth without latent structure; its three free coordinates (a, b1, b2)
    fill the unit cube with prior density 1. This is the full learner rather than a
    two-coordinate slice of it.
    """
    q = np.array([JENSEN_TRUE_P, 1.0 - JENSEN_TRUE_P])
    truth = TrueModel(
        true_spec=NetworkSpec(T=(1,), Y=(2,)),
        true_params=ParamSet(a=(np.array([1.0]),), b=(q[None, :],)),
    )
    spec = NetworkSpec(T=(2,), Y=(2,))
    points = curve_points(truth, spec, Prior.uniform(spec), ns, replicates, seed)

    def kullback(w):
        p1 = w[:, 0] * w[:, 1] + (1.0 - w[:, 0]) * w[:, 2]
        return kl_tables(q, np.stack([p1, 1.0 - p1], axis=-1))

    margins = []
    for point in points:
        bound = laplace_functional(kullback, lambda w: np.ones(len(w)), [(0.0, 1.0)] * 3, point.n, grid)
        margins.append(bound + 3 * point.stderr_F - point.mean_F)
        logger.debug("jensen n=%d mean_F=%.6f bound=%.6f", point.n, point.mean_F, bound)
    margin = float(min(margins))
    return PropCheck('prop1_jensen', margin >= 0, margin, f"ns={','.join(map(str, ns))} replicates={replicates}")


def check_monotone(ns=MONOTONE_NS, grid: int = MONOTONE_GRID) -> PropCheck:
    """A pointwise larger S with a pointwise smaller weight cannot lower the functional."""
    box = [(0.0, 1.0)]
    margins = []
    for n in ns:
        smaller = laplace_functional(lambda w: w[:, 0] ** 2, lambda w: 1.0 + w[:, 0], box, n, grid)
        larger = laplace_functional(lambda w: w[:, 0] ** 2 + 0.1 * w[:, 0], lambda w: np.ones(len(w)), box, n, grid)
        margins.append(larger - smaller)
    margin = float(min(margins))
    return PropCheck('prop2_monotone', margin >= -1e-10, margin)


def check_additive(ns=MONOTONE_NS, grid: int = ADDITIVE_GRID) -> PropCheck:
    """The functional of a separable problem is the sum of its parts."""
    box1, box2 = (-1.0, 1.0), (0.0, 1.0)

    def S1(w):
        return w[:, 0] ** 2

    def S2(w):
        return np.abs(w[:, 0] - 0.5)

    def psi2(w):
        return 2.0 * w[:, 0]

    margins = []
    for n in ns:
        part1 = laplace_functional(S1, lambda w: np.ones(len(w)), [box1], n, grid)
        part2 = laplace_functional(S2, psi2, [box2], n, grid)
        joint = laplace_functional(
            lambda w: S1(w[:, :1]) + S2(w[:, 1:]),
            lambda w: psi2(w[:, 1:]),
            [box1, box2], n, grid,
        )
        margins.append(abs(joint - part1 - part2))
    margin = float(max(margins))
    return PropCheck('prop3_additive', margin <= 1e-8, margin)


def check_coefficients(seed: int, shapes: int = RANDOM_SHAPES) -> list[PropCheck]:
    """mu splits exactly into its two parts and never exceeds d/2."""
    rng = np.random.default_rng(seed)
    split_gap, headroom = Fraction(0), None
    for _ in range(shapes):
        truth, spec = random_shape_pair(rng)
        report = theorem1_mu(truth, spec)
        split_gap = max(split_gap, abs(report.mu - report.lemma2 - report.lemma3))
        gap = report.half_d - report.mu
        headroom = gap if headroom is None else min(headroom, gap)
    return [
        PropCheck('decomposition', split_gap == 0, float(split_gap), f"shapes={shapes}"),
        PropCheck('mu_below_half_d', headroom >= 0, float(headroom), f"shapes={shapes}"),
    ]


def run_props(seed: int, replicates: int = JENSEN_REPLICATES) -> list[PropCheck]:
    """Run every check and log failures."""
    checks = [check_jensen(seed, replicates), check_monotone(), check_additive(), *check_coefficients(seed)]
    for check in checks:
        if not check.passed:
            logger.warning("check %s failed with margin %s", check.name, check.margin)
    return checks
