"""
Experiment orchestration: learning curves, generalization-error routes and
model selection.

Replicate r at every sample size uses child seed r of the master seed, and
datasets are prefix-consistent, so all curve points of one run share a single
common-random-number ensemble.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
import statsmodels.api as sm

from app.mlflow_utils.mlflow_utils import log_artifact, log_metrics, log_params, tracked_run
from config import settings
from data_ingestion.reader import read_spec, read_truth
from data_ingestion.writer import write_table
from stats.coefficients import CoefficientReport, penalty, theorem1_mu
from stats.em import fit_em
from stats.errors import InfeasibleError, ModelError
from stats.evidence import (
    Estimate,
    Prior,
    allocation_count,
    gen_error_direct,
    log_evidence,
    stochastic_complexity,
    summarize,
)
from stats.model_core import Dataset, NetworkSpec, TrueModel, check_compatible, dimension, is_compatible, sample_dataset
from stats.replicates import parallel_map, spawn_seeds

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ['n', 'replicates', 'mean_F', 'stderr_F']
SELECT_COLUMNS = ['replicate', 'candidate', 'neg_log_Z0', 'bic_score', 'singular_score']
CRITERIA = ('gold', 'bic', 'singular')
# Score differences below this count as ties
TIE_TOL = 1e-9

ComplexityFn = Callable[[Dataset], float]


@dataclass(frozen=True)
class CurveConfig:
    """One learning-curve experiment."""

    truth_path: Path
    spec_path: Path
    prior_alpha: float = settings.DEFAULT_PRIOR_ALPHA
    ns: tuple[int, ...] = tuple(settings.DEFAULT_NS)
    replicates: int = settings.DEFAULT_REPLICATES
    method: str = settings.DEFAULT_METHOD
    mc_draws: int = settings.DEFAULT_MC_DRAWS
    seed: int = settings.DEFAULT_SEED
    out_path: Path | None = None

    def __post_init__(self):
        ns = tuple(int(n) for n in self.ns)
        object.__setattr__(self, 'ns', ns)
        if not ns:
            raise ModelError("The n-grid is empty")
        if any(n < 2 for n in ns):
            raise ModelError(f"Every sample size must be at least 2, got {list(ns)}")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ModelError(f"The n-grid must be strictly increasing, got {list(ns)}")
        if self.replicates < 2:
            raise ModelError(f"Need at least 2 replicates, got {self.replicates}")
        if self.method not in ('exact', 'mc'):
            raise ModelError(f"Unknown evidence method {self.method!r}")


@dataclass(frozen=True)
class CurvePoint:
    """Mean stochastic complexity over the replicates at one sample size."""

    n: int
    replicates: int
    mean_F: float
    stderr_F: float
    values: tuple[float, ...] = ()
    # Master seed of the replicate ensemble; None when unknown
    seed: int | None = None

    def as_row(self) -> dict:
        return {'n': self.n, 'replicates': self.replicates, 'mean_F': self.mean_F, 'stderr_F': self.stderr_F}


@dataclass(frozen=True)
class LearningCurve:
    points: tuple[CurvePoint, ...]
    lambda_hat: float | None = None
    intercept: float | None = None
    slope_stderr: float | None = None
    fit_ns: tuple[int, ...] = ()


@dataclass(frozen=True)
class GenErrorReport:
    """Generalization error at n from the direct predictive route and from F(n+1) - F(n)."""

    n: int
    direct: Estimate
    from_F: Estimate

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.direct.stderr, self.from_F.stderr)

    @property
    def z(self) -> float:
        diff = self.direct.mean - self.from_F.mean
        if self.combined_stderr == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.combined_stderr

    def as_line(self) -> str:
        return (
            f"n={self.n} G_direct={self.direct.mean} stderr_direct={self.direct.stderr} "
            f"G_from_F={self.from_F.mean} stderr_from_F={self.from_F.stderr} z={self.z}"
        )


@dataclass(frozen=True)
class SelectionResult:
    rows: list[dict]
    # criterion -> chosen candidate per replicate
    choices: dict[str, list[str]] = field(default_factory=dict)

    @property
    def agreement(self) -> dict[str, float]:
        """Share of replicates on which each criterion picks the gold-standard choice."""
        gold = self.choices['gold']
        return {
            criterion: float(np.mean([a == b for a, b in zip(chosen, gold)]))
            for criterion, chosen in self.choices.items()
        }

    def summary_lines(self) -> list[str]:
        rates = self.agreement
        lines = []
        for criterion in CRITERIA:
            counts = Counter(self.choices[criterion])
            chosen = ','.join(f"{name}:{count}" for name, count in sorted(counts.items()))
            lines.append(f"criterion={criterion} agreement={rates[criterion]} chosen={chosen}")
        return lines


def _replicate_complexity(task) -> float:
    """F for one replicate dataset; module-level so worker processes can run it."""
    truth, spec, prior, n, method, draws, child = task
    data = sample_dataset(truth, n, child)
    mc_seed = spawn_seeds(child, 1)[0]
    evidence = log_evidence(spec, prior, data, method=method, draws=draws, seed=mc_seed)
    return stochastic_complexity(evidence, truth, data).F


def _check_exact_cost(truth: TrueModel, spec: NetworkSpec, n: int, seeds) -> None:
    """Fail before any work when some replicate at the largest n exceeds the exact cost bound."""
    worst = max(allocation_count(spec, sample_dataset(truth, n, child)) for child in seeds)
    if worst > settings.EXACT_COST_LIMIT:
        raise InfeasibleError(
            f"Exact evidence at n={n} needs up to {worst} allocations "
            f"(limit {settings.EXACT_COST_LIMIT}); rerun with --method mc"
        )


def curve_points(truth: TrueModel, spec: NetworkSpec, prior: Prior, ns, replicates: int, seed: int,
                 method: str = 'exact', draws: int = settings.DEFAULT_MC_DRAWS, workers: int = 1,
                 complexity_fn: ComplexityFn | None = None) -> list[CurvePoint]:
    """
    Mean F at each sample size over one replicate ensemble.

    Args:
        complexity_fn: Replaces the evidence computation with fn(dataset) -> F
    """
    seeds = spawn_seeds(seed, replicates)
    if complexity_fn is None and method == 'exact':
        _check_exact_cost(truth, spec, max(ns), seeds)

    points = []
    for n in ns:
        if complexity_fn is None:
            tasks = [(truth, spec, prior, n, method, draws, child) for child in seeds]
            values = parallel_map(_replicate_complexity, tasks, workers)
        else:
            values = [complexity_fn(sample_dataset(truth, n, child)) for child in seeds]
        estimate = summarize(values)
        logger.info("n=%d mean_F=%.6f stderr=%.6f", n, estimate.mean, estimate.stderr)
        points.append(CurvePoint(n=n, replicates=replicates, mean_F=estimate.mean,
                                 stderr_F=estimate.stderr, values=estimate.values, seed=seed))
    return points


def fit_slope(points) -> tuple[float, float, float]:
    """
    Ordinary least squares of mean F against log n.

    Args:
        points: Sequence of (n, mean_F) pairs

    Returns:
        tuple: (slope, intercept, slope standard error)
    """
    points = list(points)
    if len(points) < 3:
        raise ModelError(f"Slope fitting needs at least 3 points, got {len(points)}")
    ns = np.array([p[0] for p in points], dtype=float)
    if len(np.unique(ns)) != len(ns):
        raise ModelError("Slope fitting needs distinct sample sizes")
    if np.any(ns <= 0):
        raise ModelError("Sample sizes must be positive")
    design = sm.add_constant(np.log(ns))
    fit = sm.OLS(np.array([p[1] for p in points], dtype=float), design).fit()
    return float(fit.params[1]), float(fit.params[0]), float(fit.bse[1])


def fit_curve(points: list[CurvePoint]) -> LearningCurve:
    """Fit the slope on the upper half of the grid once it has 5 points or more."""
    if len(points) < 3:
        return LearningCurve(points=tuple(points))
    fitted = points[len(points) // 2:] if len(points) >= 5 else points
    slope, intercept, stderr = fit_slope((p.n, p.mean_F) for p in fitted)
    return LearningCurve(points=tuple(points), lambda_hat=slope, intercept=intercept,
                         slope_stderr=stderr, fit_ns=tuple(p.n for p in fitted))


def run_curve(config: CurveConfig, workers: int = 1,
              complexity_fn: ComplexityFn | None = None) -> LearningCurve:
    """
    Estimate F(n) over the configured grid, write the curve CSV and fit the slope.

    Returns:
        LearningCurve: per-n means and the fitted slope (None below 3 points)
    """
    truth = read_truth(config.truth_path)
    spec = read_spec(config.spec_path)
    check_compatible(truth, spec)
    prior = Prior.uniform(spec, config.prior_alpha)

    with tracked_run(f"curve-{Path(config.spec_path).stem}"):
        log_params({
            'truth': str(config.truth_path), 'spec': str(config.spec_path), 'prior_alpha': config.prior_alpha,
            'ns': config.ns, 'replicates': config.replicates, 'method': config.method, 'seed': config.seed,
        })
        points = curve_points(truth, spec, prior, config.ns, config.replicates, config.seed,
                              config.method, config.mc_draws, workers, complexity_fn)
        curve = fit_curve(points)
        if config.out_path is not None:
            write_table([p.as_row() for p in points], CURVE_COLUMNS, config.out_path)
            log_artifact(config.out_path)
        for point in points:
            log_metrics({'mean_F': point.mean_F, 'stderr_F': point.stderr_F}, step=point.n)
        log_metrics({'lambda_hat': curve.lambda_hat, 'slope_stderr': curve.slope_stderr})
    return curve


def curve_summary(curve: LearningCurve, report: CoefficientReport) -> str:
    """The one-line summary printed next to the curve CSV."""
    def real(value):
        return float('nan') if value is None else value
    return (
        f"lambda_hat={real(curve.lambda_hat)} stderr={real(curve.slope_stderr)} "
        f"mu={float(report.mu)} half_d={float(report.half_d)}"
    )


def gen_error_from_F(point_n: CurvePoint, point_next: CurvePoint) -> Estimate:
    """
    G(n) as mean F(n+1) - mean F(n).

    With matching replicate ensembles the error comes from the paired
    differences; otherwise the two standard errors are combined as if
    independent and a warning is logged.
    """
    if point_next.n != point_n.n + 1:
        raise ModelError(f"Need curve points at n and n+1, got {point_n.n} and {point_next.n}")
    paired = (
        point_n.seed is not None
        and point_n.seed == point_next.seed
        and point_n.replicates == point_next.replicates
        and len(point_n.values) == len(point_next.values) == point_n.replicates
    )
    if paired:
        return summarize(np.subtract(point_next.values, point_n.values))
    logger.warning(
        "Curve points at n=%d and n=%d do not share a replicate ensemble; using independent error propagation",
        point_n.n, point_next.n,
    )
    return Estimate(
        mean=point_next.mean_F - point_n.mean_F,
        stderr=math.hypot(point_n.stderr_F, point_next.stderr_F),
        values=(),
    )


def run_gen_error(truth: TrueModel, spec: NetworkSpec, prior: Prior, n: int, replicates: int, seed: int,
                  workers: int = 1) -> GenErrorReport:
    """Both generalization-error routes on one common-random-number ensemble (exact evidence)."""
    check_compatible(truth, spec)
    with tracked_run(f"gen-error-n{n}"):
        log_params({'n': n, 'replicates': replicates, 'seed': seed, 'T': spec.T, 'Y': spec.Y, 'S': truth.S})
        point_n, point_next = curve_points(truth, spec, prior, [n, n + 1], replicates, seed, workers=workers)
        report = GenErrorReport(
            n=n,
            direct=gen_error_direct(truth, spec, prior, n, replicates, seed),
            from_F=gen_error_from_F(point_n, point_next),
        )
        log_metrics({'G_direct': report.direct.mean, 'G_from_F': report.from_F.mean, 'z': report.z})
    return report


def candidate_report(truth: TrueModel, spec: NetworkSpec) -> CoefficientReport:
    """Coefficients of a candidate; a candidate that cannot realize the truth gets mu = d/2."""
    if is_compatible(truth, spec):
        return theorem1_mu(truth, spec)
    d = dimension(spec)
    return CoefficientReport(mu=Fraction(d, 2), lemma2=Fraction(d, 2), lemma3=Fraction(0), half_d=Fraction(d, 2), d=d)


def choose(scores, dims) -> int:
    """Index of the lowest score; near-ties go to the lowest dimension, then the earlier candidate."""
    best = min(scores)
    tied = [i for i, score in enumerate(scores) if score - best <= TIE_TOL]
    return min(tied, key=lambda i: (dims[i], i))


def _select_replicate(task) -> list[dict]:
    replicate, child, truth, candidates, n, method, draws, prior_alpha, em_restarts = task
    data = sample_dataset(truth, n, child)
    mc_seed, em_seed = spawn_seeds(child, 2)
    rows = []
    for name, spec, report in candidates:
        prior = Prior.uniform(spec, prior_alpha)
        evidence = log_evidence(spec, prior, data, method=method, draws=draws, seed=mc_seed)
        _, loglik = fit_em(spec, data, em_restarts, settings.EM_TOL, settings.EM_MAX_ITER, em_seed)
        rows.append({
            'replicate': replicate,
            'candidate': name,
            'neg_log_Z0': -evidence.log_Z0,
            'bic_score': -loglik + penalty(report, 'bic', n),
            'singular_score': -loglik + penalty(report, 'singular', n),
        })
    return rows


def run_select(truth_path, candidate_paths, n: int, replicates: int, seed: int,
               method: str = 'exact', draws: int = settings.DEFAULT_MC_DRAWS, prior_alpha: float = 1.0,
               em_restarts: int = settings.EM_RESTARTS, out_path=None, workers: int = 1) -> SelectionResult:
    """
    Compare the gold-standard evidence with BIC and the singular criterion.

    Per replicate and candidate the scores are the exact (or Monte-Carlo)
    -log Z0, -max log-likelihood + (d/2) log n, and -max log-likelihood +
    mu log n with mu taken against the declared truth.
    """
    truth = read_truth(truth_path)
    names = [Path(path).stem for path in candidate_paths]
    if not names:
        raise ModelError("At least one candidate is required")
    if len(set(names)) != len(names):
        raise ModelError(f"Candidate file names must be distinct, got {names}")
    if replicates < 1:
        raise ModelError(f"Need at least one replicate, got {replicates}")
    candidates = []
    for name, path in zip(names, candidate_paths):
        spec = read_spec(path)
        if spec.Y != truth.true_spec.Y:
            raise ModelError(f"Candidate {name} observes Y={spec.Y}, truth has Y={truth.true_spec.Y}")
        if not is_compatible(truth, spec):
            logger.warning("Candidate %s cannot realize the truth; its singular score uses d/2", name)
        candidates.append((name, spec, candidate_report(truth, spec)))
    seeds = spawn_seeds(seed, replicates)
    if method == 'exact':
        for name, spec, _ in candidates:
            _check_exact_cost(truth, spec, n, seeds)

    with tracked_run(f"select-n{n}"):
        log_params({'candidates': names, 'n': n, 'replicates': replicates, 'method': method, 'seed': seed})
        tasks = [(r, child, truth, candidates, n, method, draws, prior_alpha, em_restarts) for r, child in enumerate(seeds)]
        rows = [row for batch in parallel_map(_select_replicate, tasks, workers) for row in batch]

        dims = [report.d for _, _, report in candidates]
        columns = {'gold': 'neg_log_Z0', 'bic': 'bic_score', 'singular': 'singular_score'}
        choices = {criterion: [] for criterion in CRITERIA}
        for r in range(replicates):
            batch = rows[r * len(candidates):(r + 1) * len(candidates)]
            for criterion, column in columns.items():
                choices[criterion].append(names[choose([row[column] for row in batch], dims)])
        result = SelectionResult(rows=rows, choices=choices)

        if out_path is not None:
            write_table(rows, SELECT_COLUMNS, out_path)
            log_artifact(out_path)
        log_metrics({f"agreement_{criterion}": rate for criterion, rate in result.agreement.items()})
    return result
