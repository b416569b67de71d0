import numpy as np
import pytest

from app.props import (
    PropCheck,
    check_additive,
    check_coefficients,
    check_jensen,
    check_monotone,
    random_shape_pair,
    run_props,
)
from stats.model_core import is_compatible


def test_random_shapes_are_compatible():
    rng = np.random.default_rng(0)
    for _ in range(100):
        truth, spec = random_shape_pair(rng)
        assert is_compatible(truth, spec)


def test_monotone():
    check = check_monotone()
    assert check.passed
    assert check.margin >= -1e-10


def test_additive():
    check = check_additive()
    assert check.passed
    assert check.margin <= 1e-8


def test_coefficient_identities():
    split, headroom = check_coefficients(seed=3)
    assert split.name == 'decomposition'
    assert split.passed and split.margin == 0.0
    assert headroom.passed and headroom.margin >= 0


def test_jensen_bound_on_small_ensemble():
    check = check_jensen(seed=1, replicates=60, ns=(4, 8), grid=24)
    assert check.passed, check.as_line()


def test_line_format():
    line = PropCheck('prop2_monotone', True, 0.25).as_line()
    assert line == "check=prop2_monotone passed=true margin=0.25"


@pytest.mark.slow
def test_full_suite_passes():
    checks = run_props(seed=0)
    assert [check.name for check in checks] == [
        'prop1_jensen', 'prop2_monotone', 'prop3_additive', 'decomposition', 'mu_below_half_d',
    ]
    assert all(check.passed for check in checks), [check.as_line() for check in checks]
