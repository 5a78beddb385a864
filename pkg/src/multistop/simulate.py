"""Monte Carlo rollouts, heuristic baselines and stop-budget optimization.

Every policy exposes ``act(beliefs, levels, history, uniforms) -> bool``
over a batch of rollouts: ``beliefs`` is ``(n, |X|)``, ``levels`` the 1-based
stop level, ``history`` the most recent observations (newest first, 0 where
no observation exists yet) and ``uniforms`` one U(0,1) draw per rollout for
randomized policies.  Because the hidden chain ignores the miner's action,
one batch of sampled paths can score several policies at once with common
random numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .model import CONTINUE, MINE, PomdpModel

DEFAULT_HORIZON = 200
BLOCK_SIZE = 4096


class Policy(Protocol):
    name: str

    def act(self, beliefs, levels, history, uniforms) -> np.ndarray: ...


@dataclass
class RolloutRecord:
    """One sampled trajectory.  ``beliefs[t]`` is the belief acted on at time ``t``."""

    states: np.ndarray
    observations: np.ndarray  # observations[t] produced beliefs[t + 1]; 1-based
    beliefs: np.ndarray
    actions: np.ndarray
    stop_times: np.ndarray
    stop_rewards: np.ndarray  # r' pi at each stop time
    realized_rewards: np.ndarray  # r(X_tau, 2) at each stop time
    J: float
    discount: float

    def recompute_J(self) -> float:
        return float(np.sum(self.discount ** self.stop_times * self.stop_rewards))


# -- baselines -----------------------------------------------------------------

class FirstLPolicy:
    """Mine at every step until the budget is spent."""

    name = "first L"

    def decide(self, belief, level: int) -> int:
        return MINE

    def act(self, beliefs, levels, history, uniforms):
        return np.ones(len(levels), dtype=bool)


class RandomPolicy:
    """Mine with fixed probability at each step (a coin toss)."""

    def __init__(self, p_mine: float = 0.5):
        if not 0.0 <= p_mine <= 1.0:
            raise ValueError("p_mine must be a probability")
        self.p_mine = p_mine
        self.name = "random" if p_mine == 0.5 else f"random(p={p_mine:g})"

    def act(self, beliefs, levels, history, uniforms):
        return uniforms < self.p_mine


class SoftmaxWindowPolicy:
    """Softmax over {don't mine, mine} driven by the last ``window`` observations.

    ``params`` has shape ``(L, 2, window)``; ``params[l-1, u-1]`` scores action
    ``u`` at level ``l``.
    """

    name = "softmax (RL)"

    def __init__(self, params, window: int = 2):
        params = np.asarray(params, dtype=float)
        if params.ndim == 1:
            params = params.reshape(-1, 2, window)
        if params.shape[1:] != (2, window):
            raise ValueError(f"params must be (L, 2, {window}), got {params.shape}")
        self.params = params
        self.window = window

    @classmethod
    def zeros(cls, num_stops: int, window: int = 2) -> "SoftmaxWindowPolicy":
        return cls(np.zeros((num_stops, 2, window)), window)

    def probabilities(self, history, levels) -> np.ndarray:
        """``(n, 2)`` action probabilities; column 0 is don't mine, column 1 mine."""
        W = np.atleast_2d(history)[:, : self.window].astype(float)
        th = self.params[np.minimum(np.asarray(levels), len(self.params)) - 1]
        scores = np.einsum("nuk,nk->nu", th, W)
        scores -= scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        return e / e.sum(axis=1, keepdims=True)

    def act(self, beliefs, levels, history, uniforms):
        return uniforms < self.probabilities(history, levels)[:, 1]


def baseline_first_l(num_stops: int | None = None) -> FirstLPolicy:
    return FirstLPolicy()


def baseline_random(p_mine: float = 0.5) -> RandomPolicy:
    return RandomPolicy(p_mine)


def baseline_softmax(num_stops: int, window: int = 2, params=None) -> SoftmaxWindowPolicy:
    if params is None:
        return SoftmaxWindowPolicy.zeros(num_stops, window)
    return SoftmaxWindowPolicy(params, window)


# Good softmax scores sit at |params| of order 10-100, so the unit-scale gains
# used for the spherical parameters barely move it from the uniform start.
SOFTMAX_GAINS = (20.0, 0.1, 0.6, 0.6, 1.0)


def train_softmax_baseline(model: PomdpModel, config=None, window: int = 2, params_init=None):
    """Fit the softmax observation-window baseline with the same SPSA loop.

    Starts from all-zero parameters (uniform action probabilities) unless
    ``params_init`` is given.  ``config`` defaults to :data:`SOFTMAX_GAINS`.
    Returns ``(policy, trace)``.
    """
    from .spsa import SpsaConfig, policy_pair_evaluator, spsa_maximize

    config = SpsaConfig.from_gains(SOFTMAX_GAINS) if config is None else config
    shape = (model.num_stops, 2, window)
    x0 = np.zeros(shape) if params_init is None else np.asarray(params_init, dtype=float).reshape(shape)
    make = lambda x: SoftmaxWindowPolicy(x.reshape(shape), window)
    x, trace = spsa_maximize(policy_pair_evaluator(model, make, config), x0, config)
    return SoftmaxWindowPolicy(x.reshape(shape), window), trace


# -- simulation ----------------------------------------------------------------

def _sample_rows(cum: np.ndarray, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum((u[:, None] > cum[rows]).sum(axis=1), cum.shape[1] - 1)


def simulate_batch(
    model: PomdpModel,
    policies: Sequence[Policy],
    num_rollouts: int,
    horizon: int,
    rng: np.random.Generator,
    window: int = 2,
    record: bool = False,
):
    """Run ``num_rollouts`` paths, scoring every policy on the same draws.

    Returns an ``(len(policies), num_rollouts)`` array of discounted rewards,
    plus a per-step trace when ``record`` is set.
    """
    n, X = num_rollouts, model.num_states
    P, B, r, rho, L = model.transition, model.observation, model.reward_mine, model.discount, model.num_stops
    cumP = np.cumsum(P, axis=1)
    cumB = np.cumsum(B, axis=1)
    cum0 = np.cumsum(model.initial_belief)[None, :]

    state = _sample_rows(cum0, np.zeros(n, dtype=np.int64), rng.random(n))
    beliefs = np.tile(model.initial_belief, (n, 1))
    history = np.zeros((n, window), dtype=np.int64)
    k = len(policies)
    levels = np.ones((k, n), dtype=np.int64)
    J = np.zeros((k, n))
    trace = [] if record else None

    for t in range(horizon):
        active = levels <= L
        if not active.any():
            break
        u = rng.random(n)
        gain = beliefs @ r
        mines = np.zeros((k, n), dtype=bool)
        for p, pol in enumerate(policies):
            if active[p].any():
                mines[p] = active[p] & np.asarray(pol.act(beliefs, np.minimum(levels[p], max(L, 1)), history, u))
        J += mines * (rho**t) * gain
        levels += mines
        if record:
            trace.append(dict(t=t, state=state.copy(), belief=beliefs.copy(), mine=mines.copy(),
                              active=active.copy(), realized=r[state].copy()))
        state = _sample_rows(cumP, state, rng.random(n))
        y = _sample_rows(cumB, state, rng.random(n))
        unnorm = (beliefs @ P) * B[:, y].T
        beliefs = unnorm / unnorm.sum(axis=1, keepdims=True)
        history = np.concatenate([(y + 1)[:, None], history[:, :-1]], axis=1)
        if record:
            trace[-1]["obs"] = y + 1
    return (J, trace) if record else J


def rollout(model: PomdpModel, policy: Policy, horizon: int = DEFAULT_HORIZON,
            rng: np.random.Generator | None = None, window: int = 2) -> RolloutRecord:
    """Simulate one trajectory and keep everything that happened along it."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    J, trace = simulate_batch(model, [policy], 1, horizon, rng, window=window, record=True)
    steps = [s for s in trace if s["active"][0, 0]]
    actions = np.array([MINE if s["mine"][0, 0] else CONTINUE for s in steps], dtype=np.int8)
    stops = np.array([s["t"] for s in steps if s["mine"][0, 0]], dtype=np.int64)
    mined = [s for s in steps if s["mine"][0, 0]]
    return RolloutRecord(
        states=np.array([s["state"][0] + 1 for s in steps], dtype=np.int64),
        observations=np.array([s["obs"][0] for s in steps if "obs" in s], dtype=np.int64),
        beliefs=np.array([s["belief"][0] for s in steps]).reshape(-1, model.num_states),
        actions=actions,
        stop_times=stops,
        stop_rewards=np.array([s["belief"][0] @ model.reward_mine for s in mined]),
        realized_rewards=np.array([s["realized"][0] for s in mined]),
        J=float(J[0, 0]),
        discount=model.discount,
    )


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent stream for rollout block ``block`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))


def simulate_rewards(model: PomdpModel, policies: Sequence[Policy], num_rollouts: int,
                     horizon: int = DEFAULT_HORIZON, seed: int = 0, window: int = 2,
                     block_size: int = BLOCK_SIZE) -> np.ndarray:
    """Per-rollout discounted rewards, ``(len(policies), num_rollouts)``.

    Rollouts are cut into fixed blocks, each with its own seed-derived stream,
    so results depend only on ``seed`` and ``block_size``.
    """
    if num_rollouts < 1:
        raise ValueError("num_rollouts must be >= 1")
    out = []
    for b, start in enumerate(range(0, num_rollouts, block_size)):
        m = min(block_size, num_rollouts - start)
        out.append(simulate_batch(model, policies, m, horizon, block_rng(seed, b), window))
    return np.concatenate(out, axis=1)


def estimate_J(model: PomdpModel, policy: Policy, num_rollouts: int = 10_000,
               horizon: int = DEFAULT_HORIZON, seed: int = 0):
    """Sample mean and standard error of the discounted reward."""
    J = simulate_rewards(model, [policy], num_rollouts, horizon, seed)[0]
    se = J.std(ddof=1) / np.sqrt(len(J)) if len(J) > 1 else 0.0
    return float(J.mean()), float(se)


@dataclass
class ComparisonRow:
    policy: str
    mean: float
    stderr: float
    rollouts: int
    seed: int


def compare_policies(model: PomdpModel, policies: Sequence[Policy], num_rollouts: int = 100_000,
                     horizon: int = DEFAULT_HORIZON, seed: int = 0) -> list[ComparisonRow]:
    """Score all policies on identical sampled paths."""
    J = simulate_rewards(model, policies, num_rollouts, horizon, seed)
    se = J.std(axis=1, ddof=1) / np.sqrt(num_rollouts) if num_rollouts > 1 else np.zeros(len(policies))
    return [ComparisonRow(p.name, float(m), float(s), num_rollouts, seed)
            for p, m, s in zip(policies, J.mean(axis=1), se)]


def format_comparison(rows: Sequence[ComparisonRow]) -> str:
    width = max([len("policy")] + [len(r.policy) for r in rows])
    lines = [f"{'policy':<{width}}  {'mean_J':>10}  {'std_err':>10}  {'rollouts':>9}  {'seed':>6}"]
    for r in rows:
        lines.append(f"{r.policy:<{width}}  {r.mean:10.6f}  {r.stderr:10.6f}  {r.rollouts:9d}  {r.seed:6d}")
    return "\n".join(lines) + "\n"


# -- choosing the stop budget --------------------------------------------------

class InvalidCostError(ValueError):
    pass


def quadratic_cost(c: float) -> Callable[[int], float]:
    return lambda L: c * L * L


@dataclass
class StopBudgetResult:
    best: int
    net: dict[int, float]
    value: dict[int, float]
    cost: dict[int, float]
    value_concave: bool = field(default=False)


def optimize_num_stops(model_for: Callable[[int], PomdpModel], cost: Callable[[int], float],
                       max_stops: int, resolution: int = 30, tol: float = 1e-8) -> StopBudgetResult:
    """Pick ``L`` maximizing the optimal value at the initial belief minus ``cost(L)``.

    ``cost`` must be non-decreasing and convex on ``1..max_stops``.
    """
    from .grid import SimplexGrid
    from .vi import solve_value_iteration

    if max_stops < 1:
        raise ValueError("max_stops must be >= 1")
    Ls = list(range(1, max_stops + 1))
    c = np.array([float(cost(L)) for L in Ls])
    if np.any(np.diff(c) < -1e-12):
        raise InvalidCostError("cost is not increasing in L")
    if np.any(np.diff(c, 2) < -1e-12):
        raise InvalidCostError("cost is not convex in L")
    value = {}
    grid = None
    for L in Ls:
        m = model_for(L)
        if grid is None:
            grid = SimplexGrid(m.num_states, resolution)
        table = solve_value_iteration(m, grid, tol=tol)
        value[L] = table.value(m.initial_belief, 1)
    net = {L: value[L] - ci for L, ci in zip(Ls, c)}
    best = max(Ls, key=lambda L: (net[L], -L))
    v = np.array([value[L] for L in Ls])
    concave = bool(np.all(np.diff(v, 2) <= 1e-9)) if len(v) >= 3 else True
    return StopBudgetResult(best, net, value, dict(zip(Ls, c.tolist())), concave)
