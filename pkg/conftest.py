import hypothesis.strategies as st
import numpy as np
import pytest

from stats.model_core import NetworkSpec, ParamSet, TrueModel


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long acceptance reproductions")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running reproduction, only run with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def bernoulli_truth(*p_first) -> TrueModel:
    """Truth without latent structure: observable j is in state 1 with probability p_first[j]."""
    return TrueModel(
        true_spec=NetworkSpec(T=(1,), Y=(2,) * len(p_first)),
        true_params=ParamSet(a=(np.array([1.0]),), b=tuple(np.array([[p, 1.0 - p]]) for p in p_first)),
    )


@st.composite
def truths_with_learners(draw, max_hidden=2, max_states=3, max_observables=3):
    """A truth with random tables and a learner shape able to realize it."""
    M = draw(st.integers(1, max_observables))
    Y = tuple(draw(st.integers(2, max_states)) for _ in range(M))
    H = draw(st.integers(1, max_hidden))
    S = tuple(draw(st.integers(1, max_states)) for _ in range(H))
    extra = draw(st.integers(0, 1))
    T = tuple(draw(st.integers(max(2, s), max_states + 1)) for s in S) + (2,) * extra
    true_spec = NetworkSpec(T=S, Y=Y)
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    truth = TrueModel(
        true_spec=true_spec,
        true_params=ParamSet(
            a=tuple(rng.dirichlet(np.ones(s)) for s in S),
            b=tuple(rng.dirichlet(np.ones(y), size=true_spec.n_cells) for y in Y),
        ),
    )
    return truth, NetworkSpec(T=T, Y=Y)


@pytest.fixture
def coin_truth() -> TrueModel:
    return bernoulli_truth(0.5)


@pytest.fixture
def mixture_spec() -> NetworkSpec:
    """One binary hidden node over one binary observable."""
    return NetworkSpec(T=(2,), Y=(2,))


@pytest.fixture
def model_files(tmp_path):
    """Write key=value model files into tmp_path and return their paths."""
    def write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text)
        return path
    return write


COIN_TRUTH_TEXT = """\
# fair coin, no latent structure
H = 1
S = 1
M = 1
Y = 2
a.1 = 1.0
b.1.1 = 0.5,0.5
"""

MIXTURE_SPEC_TEXT = """\
K = 1
T = 2
M = 1
Y = 2
"""
