"""Reference models: low-dimensional synthetic, high-dimensional synthetic, Bitcoin-estimated.

The same models ship as JSON files under ``multistop/data`` (see
:func:`fixture_path`); the builders here are the source they were written from.
"""
from __future__ import annotations

from importlib import resources

import numpy as np
from scipy.stats import poisson

from .model import PomdpModel, load_model

# Stored with states as columns; each state column is renormalized to a pmf.
_B_RAW_T = np.array([
    [0.2384, 0.1686, 0.0221],
    [0.3129, 0.2580, 0.0955],
    [0.3951, 0.3258, 0.1207],
    [0.0629, 0.3000, 0.4546],
    [0.0044, 0.0669, 0.1741],
])

SPSA_GAINS_SYNTHETIC = (0.7, 0.1, 0.6, 0.6, 0.1)
SPSA_GAINS_BITCOIN = (0.5, 0.1, 0.6, 0.6, 0.1)


def raw_observation_matrix() -> np.ndarray:
    """Observation matrix before renormalization (3 x 5); rows do not sum to one."""
    return _B_RAW_T.T.copy()


def _normalized_observation() -> np.ndarray:
    B = raw_observation_matrix()
    return B / B.sum(axis=1, keepdims=True)


def synthetic_low() -> PomdpModel:
    """Three-state synthetic model used for the low-dimensional experiments."""
    return PomdpModel(
        transition=[[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]],
        observation=_normalized_observation(),
        reward_mine=[0.1, 0.01, 0.001],
        discount=0.9,
        num_stops=3,
        initial_belief=[0.0, 0.0, 1.0],
        name="synthetic-low",
    )


def synthetic_high(num_states: int = 10, num_obs: int = 12) -> PomdpModel:
    """Ten-state model with truncated-Poisson observations of rate ``10 i``."""
    n = num_states
    P = np.zeros((n, n))
    for i in range(n):
        P[i, i] = 0.5
        if i == 0:
            P[0, 1] = 0.5
        elif i == n - 1:
            P[i, i - 1] = 0.5
        else:
            P[i, i - 1] = P[i, i + 1] = 0.25
    y = np.arange(1, num_obs + 1)
    logp = poisson.logpmf(y[None, :], 10.0 * np.arange(1, n + 1)[:, None])
    B = np.exp(logp - logp.max(axis=1, keepdims=True))
    B /= B.sum(axis=1, keepdims=True)
    x = np.arange(1, n + 1, dtype=float)
    pi0 = np.zeros(n)
    pi0[-1] = 1.0
    return PomdpModel(P, B, 1.0 / x**3, 0.9, 3, pi0, name="synthetic-high")


def bitcoin() -> PomdpModel:
    """Model estimated from daily Bitcoin hash rate and difficulty, Apr-Aug 2022."""
    return PomdpModel(
        transition=[[0.8, 0.2, 0.0], [0.038, 0.8861, 0.0759], [0.0, 0.1111, 0.8889]],
        observation=_normalized_observation(),
        reward_mine=[1.0, 0.125, 0.037],
        discount=0.9,
        num_stops=3,
        initial_belief=[0.0, 0.0, 1.0],
        name="bitcoin",
    )


FIXTURES = {
    "synthetic-low": ("table1.json", synthetic_low),
    "synthetic-high": ("table3.json", synthetic_high),
    "bitcoin": ("table4.json", bitcoin),
}


def fixture_path(name: str):
    fname, _ = FIXTURES[name]
    return resources.files("multistop") / "data" / fname


def load_fixture(name: str) -> PomdpModel:
    with resources.as_file(fixture_path(name)) as p:
        return load_model(p)
