import logging
import math
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from app.experiments import (
    CURVE_COLUMNS,
    SELECT_COLUMNS,
    CurveConfig,
    CurvePoint,
    LearningCurve,
    candidate_report,
    choose,
    curve_points,
    curve_summary,
    fit_slope,
    gen_error_from_F,
    run_curve,
    run_gen_error,
    run_select,
)
from conftest import COIN_TRUTH_TEXT, MIXTURE_SPEC_TEXT, bernoulli_truth
from stats.coefficients import theorem1_mu
from stats.errors import InfeasibleError, ModelError
from stats.evidence import Prior
from stats.model_core import NetworkSpec

TWO_COIN_TRUTH_TEXT = """\
H = 1
S = 1
M = 2
Y = 2,2
a.1 = 1.0
b.1.1 = 0.5,0.5
b.1.2 = 0.5,0.5
"""

MIXED_COIN_TRUTH_TEXT = """\
H = 1
S = 2
M = 1
Y = 2
a.1 = 0.4,0.6
b.1.1 = 0.9,0.1
b.2.1 = 0.2,0.8
"""

TWO_OBSERVABLE_SPEC_TEXT = """\
K = 1
T = 2
M = 2
Y = 2,2
"""


@pytest.fixture
def coin_files(model_files):
    return model_files('truth.txt', COIN_TRUTH_TEXT), model_files('learner.txt', MIXTURE_SPEC_TEXT)


def log_line(data):
    """Synthetic complexity that depends only on the sample size."""
    return 2.5 * math.log(data.n) + 1.0


class TestCurveConfig:

    def test_grid_must_increase(self, coin_files):
        with pytest.raises(ModelError):
            CurveConfig(*coin_files, ns=(8, 8, 16))

    def test_sizes_at_least_two(self, coin_files):
        with pytest.raises(ModelError):
            CurveConfig(*coin_files, ns=(1, 4))

    def test_replicates_at_least_two(self, coin_files):
        with pytest.raises(ModelError):
            CurveConfig(*coin_files, ns=(4, 8), replicates=1)

    def test_method(self, coin_files):
        with pytest.raises(ModelError):
            CurveConfig(*coin_files, ns=(4, 8), method='laplace')


class TestFitSlope:

    def test_exact_line(self):
        points = [(n, 1.5 * math.log(n) + 0.7) for n in (8, 16, 32, 64)]
        slope, intercept, _ = fit_slope(points)
        assert slope == pytest.approx(1.5, abs=1e-9)
        assert intercept == pytest.approx(0.7, abs=1e-9)

    def test_flat_line(self):
        slope, _, _ = fit_slope([(n, 4.0) for n in (8, 16, 32)])
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_noisy_line(self):
        rng = np.random.default_rng(17)
        ns = [8, 16, 32, 64, 128, 256]
        points = [(n, 3.0 * math.log(n) + 2.0 + rng.normal(0, 0.01)) for n in ns]
        slope, _, stderr = fit_slope(points)
        assert stderr > 0
        assert abs(slope - 3.0) <= 5 * stderr

    def test_needs_three_distinct_points(self):
        with pytest.raises(ModelError):
            fit_slope([(8, 1.0), (16, 2.0)])
        with pytest.raises(ModelError):
            fit_slope([(8, 1.0), (8, 2.0), (8, 3.0)])


class TestRunCurve:

    def test_recovers_injected_slope(self, coin_files, tmp_path):
        out = tmp_path / 'curve.csv'
        config = CurveConfig(*coin_files, ns=(8, 16, 32, 64, 128), replicates=3, seed=1, out_path=out)
        curve = run_curve(config, complexity_fn=log_line)
        assert curve.lambda_hat == pytest.approx(2.5, abs=1e-9)
        assert curve.intercept == pytest.approx(1.0, abs=1e-9)
        assert curve.fit_ns == (32, 64, 128)

        frame = pd.read_csv(out)
        assert list(frame.columns) == CURVE_COLUMNS
        assert frame['n'].tolist() == [8, 16, 32, 64, 128]
        assert frame['replicates'].tolist() == [3] * 5
        np.testing.assert_allclose(frame['stderr_F'], 0.0)

    def test_short_grid_has_no_slope(self, coin_files):
        curve = run_curve(CurveConfig(*coin_files, ns=(4, 8), replicates=2), complexity_fn=log_line)
        assert curve.lambda_hat is None
        assert len(curve.points) == 2

    def test_exact_curve_is_reproducible(self, coin_files, tmp_path):
        outputs = []
        for name, workers in (('a.csv', 1), ('b.csv', 1), ('c.csv', 2)):
            config = CurveConfig(*coin_files, ns=(2, 3, 4), replicates=4, seed=9, out_path=tmp_path / name)
            run_curve(config, workers=workers)
            outputs.append((tmp_path / name).read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_infeasible_before_any_work(self, coin_files, monkeypatch):
        monkeypatch.setattr('config.settings.EXACT_COST_LIMIT', 2)
        with pytest.raises(InfeasibleError):
            run_curve(CurveConfig(*coin_files, ns=(4, 8), replicates=2))

    def test_summary_line(self):
        report = theorem1_mu(bernoulli_truth(0.5), NetworkSpec(T=(2,), Y=(2,)))
        curve = LearningCurve(points=(), lambda_hat=1.25, intercept=0.1, slope_stderr=0.05)
        assert curve_summary(curve, report) == "lambda_hat=1.25 stderr=0.05 mu=1.5 half_d=1.5"


class TestGenErrorFromF:

    def test_shared_ensemble_with_no_information_gain(self, coin_truth, mixture_spec):
        points = curve_points(coin_truth, mixture_spec, Prior.uniform(mixture_spec), [10, 11], 5, seed=2,
                              complexity_fn=lambda data: 0.75)
        estimate = gen_error_from_F(*points)
        assert estimate.mean == 0.0
        assert estimate.stderr == 0.0

    def test_paired_differences(self):
        a = CurvePoint(n=4, replicates=3, mean_F=2.0, stderr_F=0.5, values=(1.0, 2.0, 3.0), seed=7)
        b = CurvePoint(n=5, replicates=3, mean_F=2.5, stderr_F=0.5, values=(1.5, 2.5, 3.5), seed=7)
        estimate = gen_error_from_F(a, b)
        assert estimate.mean == pytest.approx(0.5)
        assert estimate.stderr == pytest.approx(0.0, abs=1e-15)

    def test_mismatched_ensembles_warn(self, caplog):
        a = CurvePoint(n=4, replicates=3, mean_F=2.0, stderr_F=0.3, values=(1.0, 2.0, 3.0), seed=7)
        b = CurvePoint(n=5, replicates=3, mean_F=2.5, stderr_F=0.4, values=(1.5, 2.5, 3.5), seed=8)
        with caplog.at_level(logging.WARNING, logger='app.experiments'):
            estimate = gen_error_from_F(a, b)
        assert "replicate ensemble" in caplog.text
        assert estimate.mean == pytest.approx(0.5)
        assert estimate.stderr == pytest.approx(0.5)

    def test_needs_consecutive_sizes(self):
        a = CurvePoint(n=4, replicates=2, mean_F=1.0, stderr_F=0.1)
        with pytest.raises(ModelError):
            gen_error_from_F(a, a)

    def test_direct_route_agrees_at_small_n(self, coin_truth, mixture_spec):
        report = run_gen_error(coin_truth, mixture_spec, Prior.uniform(mixture_spec), 4, 60, seed=3)
        assert report.direct.mean >= 0
        assert abs(report.z) <= 4

    @pytest.mark.slow
    def test_direct_route_agrees_at_sixteen(self, coin_truth, mixture_spec):
        report = run_gen_error(coin_truth, mixture_spec, Prior.uniform(mixture_spec), 16, 400, seed=0)
        assert abs(report.direct.mean - report.from_F.mean) <= 4 * report.combined_stderr

    @pytest.mark.slow
    def test_scaled_error_stays_below_the_bound(self, coin_truth, mixture_spec):
        report = run_gen_error(coin_truth, mixture_spec, Prior.uniform(mixture_spec), 64, 200, seed=0)
        assert 64 * report.direct.mean <= 1.5 + 0.5


class TestSelection:

    def test_choose_prefers_lower_dimension_on_ties(self):
        assert choose([1.0, 1.0 + 1e-12, 3.0], [5, 3, 1]) == 1
        assert choose([2.0, 1.0], [1, 5]) == 1
        assert choose([1.0, 1.0], [3, 3]) == 0

    def test_incompatible_candidate_uses_half_d(self):
        truth = bernoulli_truth(0.5)
        report = candidate_report(truth, NetworkSpec(T=(2,), Y=(3,)))
        assert report.mu == report.half_d == Fraction(5, 2)

    def test_single_candidate_always_wins(self, coin_files, tmp_path):
        truth_path, spec_path = coin_files
        out = tmp_path / 'select.csv'
        result = run_select(truth_path, [spec_path], n=12, replicates=3, seed=4, em_restarts=2, out_path=out)
        assert result.agreement == {'gold': 1.0, 'bic': 1.0, 'singular': 1.0}
        assert all(chosen == ['learner'] * 3 for chosen in result.choices.values())
        frame = pd.read_csv(out)
        assert list(frame.columns) == SELECT_COLUMNS
        assert len(frame) == 3

    def test_scores_relate_through_penalties(self, model_files):
        truth_path = model_files('truth.txt', TWO_COIN_TRUTH_TEXT)
        small = model_files('small.txt', TWO_OBSERVABLE_SPEC_TEXT)
        large = model_files('large.txt', TWO_OBSERVABLE_SPEC_TEXT.replace('T = 2', 'T = 3'))
        result = run_select(truth_path, [small, large], n=16, replicates=2, seed=0, em_restarts=2)
        assert [row['candidate'] for row in result.rows] == ['small', 'large', 'small', 'large']
        for row in result.rows:
            assert row['singular_score'] <= row['bic_score']
        assert len(result.summary_lines()) == 3
        assert result.summary_lines()[0].startswith('criterion=gold agreement=1.0')

    def test_candidate_names_must_differ(self, coin_files):
        truth_path, spec_path = coin_files
        with pytest.raises(ModelError):
            run_select(truth_path, [spec_path, spec_path], n=8, replicates=2, seed=0)

    @pytest.mark.slow
    def test_matched_candidate_at_large_n(self, model_files):
        truth_text = TWO_COIN_TRUTH_TEXT.replace('S = 1', 'S = 2').replace('a.1 = 1.0', 'a.1 = 0.4,0.6')
        truth_text = truth_text.replace('b.1.1 = 0.5,0.5\nb.1.2 = 0.5,0.5\n', (
            'b.1.1 = 0.9,0.1\nb.1.2 = 0.8,0.2\nb.2.1 = 0.15,0.85\nb.2.2 = 0.2,0.8\n'))
        truth_path = model_files('truth.txt', truth_text)
        matched = model_files('matched.txt', TWO_OBSERVABLE_SPEC_TEXT)
        result = run_select(truth_path, [matched], n=1024, replicates=20, seed=1, method='mc', draws=20_000,
                            em_restarts=3)
        assert min(result.agreement.values()) >= 0.95


    @pytest.mark.slow
    def test_singular_criterion_tracks_the_evidence_at_least_as_well_as_bic(self, model_files):
        truth_path = model_files('truth.txt', MIXED_COIN_TRUTH_TEXT)
        matched = model_files('matched.txt', MIXTURE_SPEC_TEXT)
        larger = model_files('larger.txt', MIXTURE_SPEC_TEXT.replace('T = 2', 'T = 3'))
        result = run_select(truth_path, [matched, larger], n=128, replicates=200, seed=0, em_restarts=5)
        gold = np.array(result.choices['gold'])
        singular_hits = np.array(result.choices['singular']) == gold
        bic_hits = np.array(result.choices['bic']) == gold
        diff = singular_hits.astype(float) - bic_hits.astype(float)
        stderr = np.std(diff, ddof=1) / math.sqrt(len(diff))
        assert diff.mean() >= -3 * stderr


@pytest.mark.slow
class TestLearningCurveBounds:

    def test_single_mixture_over_coin(self, coin_files):
        config = CurveConfig(*coin_files, ns=(8, 16, 32, 64, 128), replicates=100, seed=0)
        curve = run_curve(config)
        assert curve.lambda_hat <= 1.5 + 0.3

    def test_two_observables_stay_below_half_d(self, model_files):
        truth_path = model_files('truth.txt', TWO_COIN_TRUTH_TEXT)
        spec_path = model_files('learner.txt', TWO_OBSERVABLE_SPEC_TEXT)
        config = CurveConfig(truth_path, spec_path, ns=(16, 32, 64, 128, 256), replicates=100, seed=0)
        curve = run_curve(config, workers=4)
        assert curve.lambda_hat <= 2.0 + 0.3
        assert curve.lambda_hat + 3 * curve.slope_stderr < 2.5
        means = [p.mean_F for p in curve.points]
        errors = [p.stderr_F for p in curve.points]
        for (m0, e0), (m1, e1) in zip(zip(means, errors), zip(means[1:], errors[1:])):
            assert m1 >= m0 - 4 * math.hypot(e0, e1)
