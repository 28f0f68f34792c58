import numpy as np
import pytest

from smap.filters import DataWindow, FilterState


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def make_instance():
    """Factory for random instances on which the gate is guaranteed to fire."""

    def _make(rng, num_taps=10, reuse=2, noise_std=0.1):
        X = rng.standard_normal((num_taps, reuse + 1))
        w_prev = rng.standard_normal(num_taps)
        w0 = rng.standard_normal(num_taps)
        noise = rng.normal(0.0, noise_std, reuse + 1)
        d = X.T @ w0 + noise
        e0 = float(d[0] - X[:, 0] @ w_prev)
        assert e0 != 0.0
        gamma_bar = 0.5 * abs(e0)
        cv = rng.uniform(-gamma_bar, gamma_bar, reuse + 1)
        return {
            "w0": w0,
            "state": FilterState(w_prev),
            "window": DataWindow(X, d, noise),
            "cv": cv,
            "gamma_bar": gamma_bar,
        }

    return _make
