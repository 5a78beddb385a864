"""POMDP model, Bayesian filter and stochastic-order utilities.

Observation indices are 1-based at the public surface (``y in 1..|Y|``) and
0-based inside array code.  Actions are coded ``1`` (don't mine) and ``2``
(mine).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

TOL = 1e-12

CONTINUE = 1
MINE = 2


class DimensionError(ValueError):
    """Raised when array shapes in a model do not agree."""


class ImpossibleObservationError(ValueError):
    """Raised when an observation has zero predicted probability."""


class InvalidInputError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PomdpModel:
    """Multiple-stopping POMDP with action-independent hidden dynamics.

    Construction only checks that the shapes agree.  Stochasticity, total
    positivity and reward monotonicity are checked by :func:`validate_model`,
    so malformed files can still be loaded and reported on.
    """

    transition: np.ndarray
    observation: np.ndarray
    reward_mine: np.ndarray
    discount: float
    num_stops: int
    initial_belief: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        P = _frozen(self.transition)
        B = _frozen(self.observation)
        r = _frozen(self.reward_mine)
        pi0 = _frozen(self.initial_belief)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise DimensionError(f"transition must be square, got shape {P.shape}")
        n = P.shape[0]
        if B.ndim != 2 or B.shape[0] != n or B.shape[1] == 0:
            raise DimensionError(f"observation must be {n} x |Y|, got shape {B.shape}")
        if r.shape != (n,):
            raise DimensionError(f"reward_mine must have length {n}, got shape {r.shape}")
        if pi0.shape != (n,):
            raise DimensionError(f"initial_belief must have length {n}, got shape {pi0.shape}")
        if int(self.num_stops) != self.num_stops or self.num_stops < 0:
            raise InvalidInputError(f"num_stops must be a non-negative integer, got {self.num_stops}")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "observation", B)
        object.__setattr__(self, "reward_mine", r)
        object.__setattr__(self, "initial_belief", pi0)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "num_stops", int(self.num_stops))

    def __eq__(self, other):
        if not isinstance(other, PomdpModel):
            return NotImplemented
        return (self.discount == other.discount and self.num_stops == other.num_stops
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("transition", "observation", "reward_mine", "initial_belief")))

    __hash__ = None

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_observations(self) -> int:
        return self.observation.shape[1]

    def replace(self, **changes) -> "PomdpModel":
        fields = dict(
            transition=self.transition,
            observation=self.observation,
            reward_mine=self.reward_mine,
            discount=self.discount,
            num_stops=self.num_stops,
            initial_belief=self.initial_belief,
            name=self.name,
        )
        fields.update(changes)
        return PomdpModel(**fields)


def as_belief(probs, num_states: int | None = None) -> np.ndarray:
    """Validate ``probs`` as a point of the probability simplex."""
    pi = np.asarray(probs, dtype=float)
    if pi.ndim != 1 or pi.size == 0:
        raise DimensionError(f"belief must be a non-empty vector, got shape {pi.shape}")
    if num_states is not None and pi.size != num_states:
        raise DimensionError(f"belief has {pi.size} entries, model has {num_states} states")
    if np.any(pi < -TOL) or abs(pi.sum() - 1.0) > 1e-9:
        raise InvalidInputError(f"not a probability vector: {pi}")
    return pi


# -- stochastic orders ---------------------------------------------------------

def tp2_minors(matrix) -> np.ndarray:
    """All 2x2 minors ``A[i1,j1]A[i2,j2] - A[i1,j2]A[i2,j1]`` with i1<i2, j1<j2.

    Returned with shape ``(m, m, n, n)``; entries outside the strict upper
    triangles are zero.
    """
    A = np.asarray(matrix, dtype=float)
    m, n = A.shape
    minors = (A[:, None, :, None] * A[None, :, None, :]
              - A[:, None, None, :] * A[None, :, :, None])
    rows = np.triu(np.ones((m, m), dtype=bool), 1)
    cols = np.triu(np.ones((n, n), dtype=bool), 1)
    return np.where(rows[:, :, None, None] & cols[None, None, :, :], minors, 0.0)


def tp2_violations(matrix, tol: float = TOL) -> list[tuple[int, int, int, int]]:
    """1-based ``(i1, i2, j1, j2)`` indices of minors below ``-tol``."""
    minors = tp2_minors(matrix)
    return [tuple(int(k) + 1 for k in idx) for idx in np.argwhere(minors < -tol)]


def is_tp2(matrix, tol: float = TOL) -> bool:
    """True iff every second-order minor of ``matrix`` is >= ``-tol``."""
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise InvalidInputError("is_tp2 needs a non-empty 2-d matrix")
    if A.shape[0] < 2 or A.shape[1] < 2:
        return True
    return bool(tp2_minors(A).min() >= -tol)


class MLR(Enum):
    GREATER = "a>=b"
    LESS = "b>=a"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def mlr_geq(a, b, tol: float = TOL) -> bool:
    """``a >=_r b``: a(j) b(i) >= b(j) a(i) for all i < j."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    cross = np.outer(b, a) - np.outer(a, b)  # [i, j] = a(j)b(i) - b(j)a(i)
    return bool(np.all(np.triu(cross, 1) >= -tol))


def mlr_compare(a, b, tol: float = TOL) -> MLR:
    ge = mlr_geq(a, b, tol)
    le = mlr_geq(b, a, tol)
    if ge and le:
        return MLR.EQUAL
    if ge:
        return MLR.GREATER
    if le:
        return MLR.LESS
    return MLR.INCOMPARABLE


# -- filtering -----------------------------------------------------------------

def filter_step(transition, observation, belief, y: int):
    """One HMM filter step on raw arrays, ``y`` 0-based.

    Returns the unnormalized vector ``B_y P' pi`` and its mass ``sigma``.
    """
    unnorm = np.asarray(observation)[:, y] * (np.asarray(transition).T @ belief)
    return unnorm, unnorm.sum()


def belief_update(model: PomdpModel, belief, y: int):
    """Bayes update ``T(pi, y)`` with 1-based observation ``y``.

    Returns ``(posterior, sigma)`` where ``sigma`` is the predictive
    probability of ``y``.
    """
    if not 1 <= y <= model.num_observations:
        raise InvalidInputError(f"observation {y} outside 1..{model.num_observations}")
    pi = as_belief(belief, model.num_states)
    unnorm, sigma = filter_step(model.transition, model.observation, pi, y - 1)
    if sigma <= 0.0:
        raise ImpossibleObservationError(f"observation {y} has zero probability under belief {pi}")
    post = np.clip(unnorm / sigma, 0.0, None)
    return post / post.sum(), float(sigma)


def filter_sequence(model: PomdpModel, observations, belief=None) -> np.ndarray:
    """Posterior after each observation of a 1-based sequence; row 0 is the prior."""
    pi = model.initial_belief if belief is None else as_belief(belief, model.num_states)
    out = [np.asarray(pi, dtype=float)]
    for y in observations:
        pi, _ = belief_update(model, pi, int(y))
        out.append(pi)
    return np.array(out)


def predictive_update(model: PomdpModel, beliefs: np.ndarray):
    """All-observation Bayes update for a batch of beliefs.

    ``beliefs`` has shape ``(n, |X|)``; returns ``(posteriors, sigma)`` of
    shapes ``(n, |Y|, |X|)`` and ``(n, |Y|)``.  Rows with ``sigma == 0`` are
    left as zeros.
    """
    pred = beliefs @ model.transition  # (n, X), equals (P' pi)'
    unnorm = pred[:, None, :] * model.observation.T[None, :, :]
    sigma = unnorm.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.where(sigma[..., None] > 0, unnorm / sigma[..., None], 0.0)
    return post, sigma


def reward_of_belief(model: PomdpModel, belief, action: int) -> float:
    if action == CONTINUE:
        return 0.0
    if action == MINE:
        return float(model.reward_mine @ np.asarray(belief, dtype=float))
    raise InvalidInputError(f"action must be 1 or 2, got {action}")


# -- absorbing-state augmentation ----------------------------------------------

@dataclass(frozen=True)
class AugmentedModel:
    """Stop-counting chain over states ``(1,1)..(L,|X|)`` plus one absorbing state."""

    transition_continue: np.ndarray
    transition_mine: np.ndarray
    num_states: int
    num_stops: int

    def index(self, level: int, state: int) -> int:
        """0-based row of augmented state ``(level, state)`` (both 1-based)."""
        return (level - 1) * self.num_states + (state - 1)

    @property
    def absorbing(self) -> int:
        return self.num_stops * self.num_states


def build_augmented_model(model: PomdpModel) -> AugmentedModel:
    n, L = model.num_states, model.num_stops
    size = L * n + 1
    P = model.transition
    cont = np.zeros((size, size))
    mine = np.zeros((size, size))
    for l in range(L):
        blk = slice(l * n, (l + 1) * n)
        cont[blk, blk] = P
        if l + 1 < L:
            mine[blk, (l + 1) * n:(l + 2) * n] = P
        else:
            mine[blk, -1] = 1.0
    cont[-1, -1] = 1.0
    mine[-1, -1] = 1.0
    return AugmentedModel(_frozen(cont), _frozen(mine), n, L)


# -- validation ----------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: dict[str, bool]
    details: dict[str, str]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def lines(self) -> list[str]:
        out = []
        for name, passed in self.checks.items():
            line = f"{'PASS' if passed else 'FAIL'}  {name}"
            if not passed and self.details.get(name):
                line += f"  ({self.details[name]})"
            out.append(line)
        return out

    def __str__(self):
        return "\n".join(self.lines())


def _stochastic_problems(M, tol=TOL) -> str:
    probs = []
    neg = np.argwhere(M < 0)
    if len(neg):
        probs.append("negative entries at " + ", ".join(f"({i+1},{j+1})" for i, j in neg))
    bad = np.flatnonzero(np.abs(M.sum(axis=1) - 1.0) > tol)
    if len(bad):
        probs.append("rows not summing to 1: " + ", ".join(str(i + 1) for i in bad))
    return "; ".join(probs)


def is_tridiagonal_dominant(P, tol: float = TOL) -> bool:
    P = np.asarray(P)
    n = P.shape[0]
    i, j = np.indices(P.shape)
    if np.any(np.abs(P[np.abs(i - j) > 1]) > tol):
        return False
    return all(P[k, k] >= P[k].max() - tol for k in range(n))


def validate_model(model: PomdpModel) -> ValidationReport:
    """Check a model against the structural assumptions; never raises on bad values."""
    P, B, r = model.transition, model.observation, model.reward_mine
    checks, details = {}, {}

    msg = _stochastic_problems(P)
    checks["transition row-stochastic"] = not msg
    details["transition row-stochastic"] = msg
    msg = _stochastic_problems(B)
    checks["observation row-stochastic"] = not msg
    details["observation row-stochastic"] = msg

    pi0 = model.initial_belief
    checks["initial belief on simplex"] = bool(np.all(pi0 >= 0) and abs(pi0.sum() - 1) <= 1e-9)

    viol = tp2_violations(P)
    checks["transition TP2"] = not viol
    details["transition TP2"] = "negative minors (i1,i2,j1,j2): " + ", ".join(map(str, viol[:10]))
    viol = tp2_violations(B)
    checks["observation TP2"] = not viol
    details["observation TP2"] = "negative minors (i1,i2,j1,j2): " + ", ".join(map(str, viol[:10]))

    checks["transition tri-diagonal, dominant diagonal"] = is_tridiagonal_dominant(P)
    checks["reward non-increasing in state"] = bool(np.all(np.diff(r) <= TOL))
    checks["reward in [0, 1]"] = bool(np.all((r >= 0) & (r <= 1)))
    checks["discount in (0, 1)"] = 0.0 < model.discount < 1.0
    checks["num_stops >= 1"] = model.num_stops >= 1
    return ValidationReport(checks, details)


# -- file format ---------------------------------------------------------------

def model_to_dict(model: PomdpModel) -> dict:
    return {
        "name": model.name,
        "num_states": model.num_states,
        "num_observations": model.num_observations,
        "transition": model.transition.tolist(),
        "observation": model.observation.tolist(),
        "reward_mine": model.reward_mine.tolist(),
        "discount": model.discount,
        "num_stops": model.num_stops,
        "initial_belief": model.initial_belief.tolist(),
    }


def model_from_dict(d: dict) -> PomdpModel:
    n, m = int(d["num_states"]), int(d["num_observations"])
    P = np.asarray(d["transition"], dtype=float)
    B = np.asarray(d["observation"], dtype=float)
    # row-major flat lists are accepted as well as nested rows
    if P.ndim == 1:
        if P.size != n * n:
            raise DimensionError(f"transition has {P.size} entries, expected {n * n}")
        P = P.reshape(n, n)
    if B.ndim == 1:
        if B.size != n * m:
            raise DimensionError(f"observation has {B.size} entries, expected {n * m}")
        B = B.reshape(n, m)
    if P.shape != (n, n) or B.shape != (n, m):
        raise DimensionError(f"declared sizes ({n}, {m}) do not match matrices {P.shape}, {B.shape}")
    return PomdpModel(
        transition=P,
        observation=B,
        reward_mine=d["reward_mine"],
        discount=d["discount"],
        num_stops=d["num_stops"],
        initial_belief=d["initial_belief"],
        name=d.get("name", ""),
    )


def save_model(model: PomdpModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path) -> PomdpModel:
    return model_from_dict(json.loads(Path(path).read_text()))

