"""Simultaneous-perturbation policy gradient for linear threshold policies."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linear import LinearThresholdPolicy, from_spherical
from .model import PomdpModel
from .simulate import DEFAULT_HORIZON, simulate_rewards

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpsaConfig:
    epsilon: float = 0.7
    varsigma: float = 0.1
    kappa: float = 0.6
    nu: float = 0.6
    psi: float = 0.1
    num_iterations: int = 200
    rollouts_per_eval: int = 500
    horizon: int = DEFAULT_HORIZON
    seed: int = 0
    common_random_numbers: bool = True

    def __post_init__(self):
        if not 0.5 < self.kappa <= 1 or not 0.5 < self.nu <= 1:
            raise ValueError("kappa and nu must lie in (0.5, 1]")
        if self.epsilon <= 0 or self.varsigma <= 0 or self.psi <= 0:
            raise ValueError("epsilon, varsigma and psi must be positive")
        if self.num_iterations < 0 or self.rollouts_per_eval < 1:
            raise ValueError("num_iterations >= 0 and rollouts_per_eval >= 1 required")

    @classmethod
    def from_gains(cls, gains, **kw) -> "SpsaConfig":
        eps, vs, kappa, nu, psi = gains
        return cls(epsilon=eps, varsigma=vs, kappa=kappa, nu=nu, psi=psi, **kw)


def gain_schedule(config: SpsaConfig, n: int) -> tuple[float, float]:
    """Step size ``a_n`` and perturbation size ``c_n`` at iteration ``n >= 0``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    a = config.epsilon * (n + 1 + config.varsigma) ** (-config.kappa)
    c = config.psi * (n + 1) ** (-config.nu)
    return a, c


@dataclass
class TrainingTrace:
    iteration: list = field(default_factory=list)
    a: list = field(default_factory=list)
    c: list = field(default_factory=list)
    J: list = field(default_factory=list)
    params: list = field(default_factory=list)

    def __len__(self):
        return len(self.iteration)

    def append(self, n, a, c, J, x):
        self.iteration.append(n)
        self.a.append(a)
        self.c.append(c)
        self.J.append(J)
        self.params.append(np.array(x, copy=True))

    def smoothed(self, window: int = 10) -> np.ndarray:
        """Trailing moving average of the objective (shorter at the start)."""
        J = np.asarray(self.J, dtype=float)
        cs = np.concatenate([[0.0], np.cumsum(J)])
        i = np.arange(1, len(J) + 1)
        lo = np.maximum(0, i - window)
        return (cs[i] - cs[lo]) / (i - lo)

    def to_text(self) -> str:
        lines = ["iteration,a_n,c_n,J"]
        lines += [f"{n},{a:.17g},{c:.17g},{J:.17g}" for n, a, c, J in zip(self.iteration, self.a, self.c, self.J)]
        return "\n".join(lines) + "\n"


class TrainingError(RuntimeError):
    def __init__(self, msg, trace: TrainingTrace):
        super().__init__(msg)
        self.trace = trace


# evaluate_pair(x_plus, x_minus, seed) -> (J_plus, J_minus)
PairEvaluator = Callable[[np.ndarray, np.ndarray, int], tuple[float, float]]


def spsa_step_gradient(evaluate_pair: PairEvaluator, x, c: float, rng: np.random.Generator):
    """Two-sided simultaneous-perturbation gradient estimate at ``x``.

    Returns ``(gradient, J_plus, J_minus)``.
    """
    if c <= 0:
        raise ValueError("perturbation size must be positive")
    x = np.asarray(x, dtype=float)
    omega = rng.choice([-1.0, 1.0], size=x.shape)
    seed = int(rng.integers(2**63 - 1))
    jp, jm = evaluate_pair(x + c * omega, x - c * omega, seed)
    # Rademacher perturbations are their own inverses
    return (jp - jm) / (2.0 * c) * omega, jp, jm


def spsa_maximize(evaluate_pair: PairEvaluator, x0, config: SpsaConfig,
                  callback: Callable[[int, np.ndarray], None] | None = None):
    """Gradient ascent with SPSA gradient estimates; returns ``(x_N, trace)``."""
    rng = np.random.default_rng(config.seed)
    x = np.array(x0, dtype=float)
    trace = TrainingTrace()
    for n in range(config.num_iterations):
        a, c = gain_schedule(config, n)
        g, jp, jm = spsa_step_gradient(evaluate_pair, x, c, rng)
        trace.append(n, a, c, 0.5 * (jp + jm), x)
        if not (np.isfinite(jp) and np.isfinite(jm) and np.all(np.isfinite(g))):
            raise TrainingError(f"non-finite objective at iteration {n}", trace)
        x = x + a * g
        if not np.all(np.isfinite(x)):
            raise TrainingError(f"non-finite parameters after iteration {n}", trace)
        if callback is not None:
            callback(n, x)
        logger.debug("iter %d  J=%.6f  a=%.4f  c=%.4f", n, trace.J[-1], a, c)
    return x, trace


def policy_pair_evaluator(model: PomdpModel, make_policy, config: SpsaConfig) -> PairEvaluator:
    """Score two parameter vectors by simulation, sharing sample paths if configured."""

    def evaluate(xp, xm, seed):
        pp, pm = make_policy(xp), make_policy(xm)
        if config.common_random_numbers:
            J = simulate_rewards(model, [pp, pm], config.rollouts_per_eval, config.horizon, seed)
            return float(J[0].mean()), float(J[1].mean())
        rng = np.random.default_rng(seed)
        s1, s2 = rng.integers(2**63 - 1, size=2)
        jp = simulate_rewards(model, [pp], config.rollouts_per_eval, config.horizon, int(s1))[0].mean()
        jm = simulate_rewards(model, [pm], config.rollouts_per_eval, config.horizon, int(s2))[0].mean()
        return float(jp), float(jm)

    return evaluate


def default_phi_init(num_stops: int, num_states: int, seed: int = 0, spread: float = 0.2) -> np.ndarray:
    """Angles near pi/4 and magnitudes near 1, each jittered by U(-spread, spread).

    ``sin^2`` is flat at 0 and pi/2 and ``phi^2`` is flat at 0, so starting
    there leaves the simultaneous-perturbation gradient close to zero.
    """
    rng = np.random.default_rng(seed)
    phi = np.pi / 4 + rng.uniform(-spread, spread, size=(num_stops, num_states - 1))
    k = min(2, num_states - 1)
    phi[0, :k] = 1.0 + rng.uniform(-spread, spread, size=k)
    return phi


def estimate_gradient(model: PomdpModel, phi, c_n: float, rollouts: int, rng: np.random.Generator,
                      horizon: int = DEFAULT_HORIZON, common_random_numbers: bool = True) -> np.ndarray:
    """SPSA estimate of the gradient of the expected reward with respect to ``phi``."""
    cfg = SpsaConfig(rollouts_per_eval=rollouts, horizon=horizon, common_random_numbers=common_random_numbers)
    ev = policy_pair_evaluator(model, from_spherical, cfg)
    g, _, _ = spsa_step_gradient(ev, np.asarray(phi, dtype=float), c_n, rng)
    return g


def train(model: PomdpModel, config: SpsaConfig, phi_init=None) -> tuple[LinearThresholdPolicy, TrainingTrace]:
    """Optimize a linear threshold policy in spherical coordinates."""
    if phi_init is None:
        phi_init = default_phi_init(model.num_stops, model.num_states, config.seed)
    phi0 = np.asarray(phi_init, dtype=float)
    shape = phi0.shape
    ev = policy_pair_evaluator(model, lambda x: from_spherical(x.reshape(shape)), config)
    phi, trace = spsa_maximize(ev, phi0, config)
    policy = from_spherical(phi.reshape(shape))
    return LinearThresholdPolicy(policy.theta, name="linear threshold (SPSA)"), trace
