"""Slow, obviously-correct reference implementations used only by the tests."""
from itertools import product

import numpy as np

from multistop.model import PomdpModel


def tp2_kernel(rng, rows, cols, strength=1.5):
    """Row-stochastic TP2 matrix: ``exp(c s_i t_j)`` with sorted ``s``, ``t``, rows normalized.

    ``exp(c s t)`` is TP2 for increasing ``s`` and ``t``; scaling rows keeps it TP2.
    """
    s = np.sort(rng.normal(size=rows))
    t = np.sort(rng.normal(size=cols))
    c = rng.uniform(0.1, strength)
    K = np.exp(c * np.outer(s, t)) * rng.uniform(0.5, 1.5, size=cols)  # column scaling is TP2-safe too
    return K / K.sum(axis=1, keepdims=True)


def random_tp2_model(rng, num_states=3, num_obs=4, num_stops=2, discount=0.9):
    pi0 = rng.dirichlet(np.ones(num_states))
    r = np.sort(rng.uniform(0, 1, num_states))[::-1]
    return PomdpModel(tp2_kernel(rng, num_states, num_states), tp2_kernel(rng, num_states, num_obs),
                      r, discount, num_stops, pi0)


def random_model(rng, num_states=3, num_obs=4):
    """Any row-stochastic model, no structural assumptions."""
    P = rng.dirichlet(np.ones(num_states), size=num_states)
    B = rng.dirichlet(np.ones(num_obs), size=num_states)
    return PomdpModel(P, B, rng.uniform(size=num_states), 0.9, 1, rng.dirichlet(np.ones(num_states)))


def enumerate_posterior(P, B, pi0, observations):
    """Posterior of the last state by summing over every hidden path (0-based observations)."""
    X = len(pi0)
    k = len(observations)
    post = np.zeros(X)
    for path in product(range(X), repeat=k + 1):
        w = pi0[path[0]]
        for t in range(1, k + 1):
            w *= P[path[t - 1], path[t]] * B[path[t], observations[t - 1]]
        post[path[-1]] += w
    return post / post.sum()


def brute_minors(A):
    A = np.asarray(A)
    m, n = A.shape
    return [A[i1, j1] * A[i2, j2] - A[i1, j2] * A[i2, j1]
            for i1 in range(m) for i2 in range(i1 + 1, m)
            for j1 in range(n) for j2 in range(j1 + 1, n)]


def brute_nearest(points, belief):
    return int(np.argmin(np.linalg.norm(points - belief, axis=1)))


def expectimax_value(model: PomdpModel, belief, horizon: int) -> float:
    """Exact finite-horizon optimum over every policy tree (value 0 after ``horizon`` steps)."""
    P, B, r, rho, L = model.transition, model.observation, model.reward_mine, model.discount, model.num_stops

    def V(pi, level, steps):
        if steps == 0 or level > L:
            return 0.0
        pred = P.T @ pi
        future = {}
        for nxt in (level, level + 1):
            tot = 0.0
            for y in range(B.shape[1]):
                un = B[:, y] * pred
                s = un.sum()
                if s > 0:
                    tot += s * V(un / s, nxt, steps - 1)
            future[nxt] = tot
        return max(rho * future[level], r @ pi + rho * future[level + 1])

    return V(np.asarray(belief, dtype=float), 1, horizon)
