"""Linear threshold mining policies and their spherical-coordinate parametrization.

A policy is an ``L x (|X| - 1)`` array ``theta``.  At stop level ``l`` it mines
iff ``[theta_l, 1, 0] . [-1; pi] >= 0``, i.e.::

    theta_l[1] * pi[0] + ... + theta_l[X-2] * pi[X-3] + pi[X-2] >= theta_l[0]

so ``theta_l[0]`` is the threshold offset and the remaining entries weight the
leading (high-reward) belief coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import SimplexGrid
from .model import CONTINUE, MINE

FEAS_TOL = 1e-12


def decision_vector(theta_l: np.ndarray) -> tuple[float, np.ndarray]:
    """Offset and belief weights ``(theta_l[0], [theta_l[1:], 1, 0])``."""
    return float(theta_l[0]), np.concatenate([theta_l[1:], [1.0, 0.0]])


@dataclass(frozen=True)
class LinearThresholdPolicy:
    theta: np.ndarray
    name: str = field(default="linear threshold", compare=False)

    def __post_init__(self):
        th = np.array(self.theta, dtype=float)
        if th.ndim != 2 or th.shape[1] < 1:
            raise ValueError(f"theta must be L x (|X|-1), got shape {th.shape}")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @property
    def num_stops(self) -> int:
        return self.theta.shape[0]

    @property
    def num_states(self) -> int:
        return self.theta.shape[1] + 1

    def decision_values(self, beliefs, levels) -> np.ndarray:
        """``[theta_l, 1, 0] . [-1; pi]`` for each belief row and its level."""
        beliefs = np.atleast_2d(beliefs)
        th = self.theta[np.asarray(levels) - 1]
        X = self.num_states
        weights = np.concatenate([th[:, 1:], np.ones((len(th), 1))], axis=1)
        return np.einsum("nk,nk->n", weights, beliefs[:, : X - 1]) - th[:, 0]

    def decide(self, belief, level: int) -> int:
        if not 1 <= level <= self.num_stops:
            raise ValueError(f"level {level} outside 1..{self.num_stops}")
        return MINE if self.decision_values(belief, [level])[0] >= 0 else CONTINUE

    def act(self, beliefs, levels, history, uniforms):
        return self.decision_values(beliefs, np.minimum(levels, self.num_stops)) >= 0


@dataclass
class FeasibilityReport:
    """Violations of the three parameter conditions as 1-based ``(l, i)`` pairs."""

    nonnegative: list = field(default_factory=list)
    weight_order: list = field(default_factory=list)
    level_order: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.nonnegative or self.weight_order or self.level_order)

    def __str__(self):
        return (f"condition 1 (theta >= 0): {'pass' if not self.nonnegative else self.nonnegative}\n"
                f"condition 2 (theta_l(2) >= 1, theta_l(i) <= theta_l(2)): "
                f"{'pass' if not self.weight_order else self.weight_order}\n"
                f"condition 3 (monotone in l): {'pass' if not self.level_order else self.level_order}")


def check_feasible(theta, tol: float = FEAS_TOL) -> FeasibilityReport:
    th = np.asarray(theta.theta if isinstance(theta, LinearThresholdPolicy) else theta, dtype=float)
    rep = FeasibilityReport()
    L, K = th.shape
    for l, i in np.argwhere(th < -tol):
        rep.nonnegative.append((l + 1, i + 1))
    if K >= 2:
        for l in np.flatnonzero(th[:, 1] < 1 - tol):
            rep.weight_order.append((l + 1, 2))
        for l, i in np.argwhere(th[:, 2:] > th[:, 1:2] + tol):
            rep.weight_order.append((l + 1, i + 3))
    for l in range(L - 1):
        if th[l, 0] > th[l + 1, 0] + tol:
            rep.level_order.append((l + 1, 1))
        for i in np.flatnonzero(th[l, 1:] < th[l + 1, 1:] - tol):
            rep.level_order.append((l + 1, i + 2))
    return rep


def from_spherical(phi) -> LinearThresholdPolicy:
    """Map unconstrained ``phi`` (shape ``L x (|X|-1)``) to a feasible policy.

    With 1-based indices::

        theta_l(1)   = phi_1(1)^2 * prod_{j=l}^{L-1} sin^2 phi_j(1)
        theta_l(2)   = 1 + phi_1(2)^2 * prod_{j=2}^{l} sin^2 phi_j(2)
        theta_l(i>2) = theta_l(2) * prod_{j=1}^{L} sin^2 phi_j(i)
    """
    phi = np.asarray(phi, dtype=float)
    L, K = phi.shape
    s2 = np.sin(phi) ** 2
    theta = np.empty((L, K))
    for l in range(1, L + 1):
        theta[l - 1, 0] = phi[0, 0] ** 2 * np.prod(s2[l - 1:L - 1, 0])
        if K >= 2:
            theta[l - 1, 1] = 1.0 + phi[0, 1] ** 2 * np.prod(s2[1:l, 1])
        if K >= 3:
            theta[l - 1, 2:] = theta[l - 1, 1] * np.prod(s2[:, 2:], axis=0)
    return LinearThresholdPolicy(theta)


def nestedness_of_policy(policy: LinearThresholdPolicy, resolution: int = 50) -> bool:
    """Mining at level ``l`` implies mining at level ``l - 1`` on every grid belief."""
    L = policy.num_stops
    if L <= 1:
        return True
    pts = SimplexGrid(policy.num_states, resolution).points
    mine = np.stack([policy.decision_values(pts, np.full(len(pts), l)) >= 0 for l in range(1, L + 1)])
    return bool(np.all(mine[:-1] | ~mine[1:]))


def save_policy(policy: LinearThresholdPolicy, path) -> None:
    L, K = policy.theta.shape
    lines = [f"num_stops {L}", f"num_states {K + 1}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in policy.theta]
    Path(path).write_text("\n".join(lines) + "\n")


def load_policy(path) -> LinearThresholdPolicy:
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    header = {k: int(v) for k, v in lines[:2]}
    rows = np.array([[float(v) for v in ln] for ln in lines[2:]])
    if rows.shape != (header["num_stops"], header["num_states"] - 1):
        raise ValueError(f"policy file declares {header}, found theta of shape {rows.shape}")
    return LinearThresholdPolicy(rows)
