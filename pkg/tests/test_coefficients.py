import math
from fractions import Fraction

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from stats.coefficients import lemma2_coeff, lemma3_coeff, penalty, theorem1_mu
from stats.errors import ModelError
from stats.model_core import NetworkSpec, ParamSet, TrueModel


def uniform_truth(S, Y) -> TrueModel:
    spec = NetworkSpec(T=tuple(S), Y=tuple(Y))
    return TrueModel(
        true_spec=spec,
        true_params=ParamSet(
            a=tuple(np.full(s, 1.0 / s) for s in S),
            b=tuple(np.full((spec.n_cells, y), 1.0 / y) for y in Y),
        ),
    )


@st.composite
def compatible_shapes(draw):
    """Truth and learner with H <= K <= 4, state counts <= 5 and M <= 4."""
    M = draw(st.integers(1, 4))
    Y = tuple(draw(st.integers(2, 5)) for _ in range(M))
    K = draw(st.integers(1, 4))
    H = draw(st.integers(1, K))
    S = tuple(draw(st.integers(1, 5)) for _ in range(H))
    T = tuple(draw(st.integers(max(2, s), 5)) for s in S) + tuple(draw(st.integers(2, 5)) for _ in range(K - H))
    return uniform_truth(S, Y), NetworkSpec(T=T, Y=Y)


class TestLemma2:

    @pytest.mark.parametrize("S, Y, T, expected", [
        ((1,), (2, 2, 2), (2,), Fraction(3, 2)),
        ((2,), (2,), (2,), Fraction(3, 2)),
        ((2, 2), (2, 2), (2, 2), Fraction(5)),
    ])
    def test_examples(self, S, Y, T, expected):
        assert lemma2_coeff(uniform_truth(S, Y), NetworkSpec(T=T, Y=Y)) == expected


class TestLemma3:

    @pytest.mark.parametrize("S, T, expected", [
        ((1,), (2,), 1),
        ((2,), (2,), 0),
        ((1,), (2, 3), 3),
    ])
    def test_examples(self, S, T, expected):
        assert lemma3_coeff(uniform_truth(S, (2,)), NetworkSpec(T=T, Y=(2,))) == expected

    def test_incompatible(self):
        with pytest.raises(ModelError):
            lemma3_coeff(uniform_truth((3,), (2,)), NetworkSpec(T=(2,), Y=(2,)))


class TestTheorem1:

    @pytest.mark.parametrize("Y, mu, half_d", [
        ((2,), Fraction(3, 2), Fraction(3, 2)),
        ((2, 2), Fraction(2), Fraction(5, 2)),
        ((2, 2, 2), Fraction(5, 2), Fraction(7, 2)),
    ])
    def test_single_mixture_over_coin_truths(self, Y, mu, half_d):
        report = theorem1_mu(uniform_truth((1,), Y), NetworkSpec(T=(2,), Y=Y))
        assert report.mu == mu
        assert report.half_d == half_d
        assert report.d == 2 * half_d

    def test_line_format(self):
        report = theorem1_mu(uniform_truth((1,), (2,)), NetworkSpec(T=(2,), Y=(2,)))
        assert report.as_line() == "d=3 half_d=1.5 lemma2=0.5 lemma3=1.0 mu=1.5"

    @settings(max_examples=500, deadline=None)
    @given(compatible_shapes())
    def test_splits_into_regular_and_redundant_parts(self, shapes):
        truth, spec = shapes
        report = theorem1_mu(truth, spec)
        assert report.mu == report.lemma2 + report.lemma3
        assert report.mu <= report.half_d

    @settings(max_examples=100, deadline=None)
    @given(compatible_shapes())
    def test_matched_shapes_are_regular(self, shapes):
        truth, _ = shapes
        if min(truth.S) < 2:
            return
        report = theorem1_mu(truth, truth.true_spec)
        assert report.mu == report.half_d


class TestPenalty:

    def test_bic(self):
        report = theorem1_mu(uniform_truth((1,), (2,)), NetworkSpec(T=(2,), Y=(2,)))
        assert penalty(report, 'bic', math.e ** 2) == pytest.approx(3.0)

    def test_singular(self):
        report = theorem1_mu(uniform_truth((1,), (2, 2)), NetworkSpec(T=(2,), Y=(2, 2)))
        assert penalty(report, 'singular', math.e) == pytest.approx(2.0)

    @settings(max_examples=100, deadline=None)
    @given(compatible_shapes(), st.integers(2, 10**6))
    def test_singular_never_exceeds_bic(self, shapes, n):
        report = theorem1_mu(*shapes)
        assert penalty(report, 'singular', n) <= penalty(report, 'bic', n)

    def test_rejects_small_n_and_unknown_criterion(self):
        report = theorem1_mu(uniform_truth((1,), (2,)), NetworkSpec(T=(2,), Y=(2,)))
        with pytest.raises(ModelError):
            penalty(report, 'bic', 1)
        with pytest.raises(ModelError):
            penalty(report, 'aic', 10)
