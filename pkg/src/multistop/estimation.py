"""Estimate a mining POMDP from a hash-rate / difficulty time series.

Hash rate is binned into hidden states, difficulty into observations, both
with uniform-width bins.  The transition matrix is the count MLE; the
observation matrix is the empirical conditional frequency table, projected
onto the TP2 row-stochastic matrices when it is not TP2 already.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .model import PomdpModel, is_tp2, tp2_minors

logger = logging.getLogger(__name__)

COLUMNS = ("timestamp", "hash_rate", "difficulty")


class IngestError(ValueError):
    pass


class DegenerateRangeError(ValueError):
    pass


@dataclass
class TimeSeriesDataset:
    timestamps: list[datetime]
    hash_rate: np.ndarray
    difficulty: np.ndarray
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.timestamps)


def ingest(path, columns=COLUMNS) -> TimeSeriesDataset:
    """Read a ``timestamp,hash_rate,difficulty`` CSV.

    Unparseable or negative rows are skipped and listed in ``rejected`` as
    ``(line_number, reason)``.  Rows are sorted by time; duplicate
    timestamps are an error.
    """
    ts_col, hr_col, df_col = columns
    rows, rejected = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        missing = [c for c in columns if c not in [f.strip() for f in reader.fieldnames]]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}")
        for rec in reader:
            line = reader.line_num
            rec = {k.strip(): (v or "").strip() for k, v in rec.items() if k is not None}
            try:
                ts = datetime.fromisoformat(rec[ts_col])
                hr = float(rec[hr_col])
                df = float(rec[df_col])
            except (ValueError, TypeError, KeyError) as exc:
                rejected.append((line, str(exc)))
                continue
            if not (np.isfinite(hr) and np.isfinite(df)) or hr < 0 or df < 0:
                rejected.append((line, "hash_rate and difficulty must be finite and non-negative"))
                continue
            rows.append((ts, hr, df))
    if not rows:
        raise IngestError(f"{path}: no valid records")
    for line, why in rejected:
        logger.warning("%s:%d rejected: %s", path, line, why)
    rows.sort(key=lambda r: r[0])
    ts = [r[0] for r in rows]
    dups = [a for a, b in zip(ts, ts[1:]) if a == b]
    if dups:
        raise IngestError(f"{path}: duplicate timestamps, first at {dups[0].isoformat()}")
    return TimeSeriesDataset(ts, np.array([r[1] for r in rows]), np.array([r[2] for r in rows]), rejected)


@dataclass
class BinnedSeries:
    state_ids: np.ndarray  # 1-based
    obs_ids: np.ndarray  # 1-based
    state_edges: np.ndarray
    obs_edges: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.state_edges) - 1

    @property
    def num_obs(self) -> int:
        return len(self.obs_edges) - 1


def uniform_bins(values, num_bins: int):
    """1-based bin ids and the ``num_bins + 1`` edges of uniform bins over [min, max]."""
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    if not hi > lo:
        raise DegenerateRangeError(f"series is constant ({lo}); cannot bin")
    edges = np.linspace(lo, hi, num_bins + 1)
    ids = np.searchsorted(edges[1:-1], v, side="right") + 1
    return ids, edges


def bin_series(dataset: TimeSeriesDataset, num_states: int = 3, num_obs: int = 5) -> BinnedSeries:
    if num_states < 2 or num_obs < 2:
        raise ValueError("need at least two bins on each axis")
    s, se = uniform_bins(dataset.hash_rate, num_states)
    o, oe = uniform_bins(dataset.difficulty, num_obs)
    return BinnedSeries(s, o, se, oe)


def estimate_transition_mle(state_ids, num_states: int | None = None):
    """Count-based MLE of the transition matrix from a 1-based state sequence.

    Returns ``(P_hat, unvisited)`` where ``unvisited`` lists the 1-based
    states with no outgoing transitions; their rows are set uniform.
    """
    s = np.asarray(state_ids, dtype=np.int64) - 1
    if len(s) < 2:
        raise ValueError("need at least two states")
    n = int(s.max()) + 1 if num_states is None else num_states
    counts = np.zeros((n, n))
    np.add.at(counts, (s[:-1], s[1:]), 1.0)
    tot = counts.sum(axis=1)
    P = np.full((n, n), 1.0 / n)
    seen = tot > 0
    P[seen] = counts[seen] / tot[seen, None]
    return P, [int(i) + 1 for i in np.flatnonzero(~seen)]


def empirical_observation(state_ids, obs_ids, num_states: int, num_obs: int) -> np.ndarray:
    counts = np.zeros((num_states, num_obs))
    np.add.at(counts, (np.asarray(state_ids) - 1, np.asarray(obs_ids) - 1), 1.0)
    tot = counts.sum(axis=1, keepdims=True)
    return np.where(tot > 0, counts / np.where(tot > 0, tot, 1.0), 1.0 / num_obs)


@dataclass
class Tp2Projection:
    matrix: np.ndarray
    empirical: np.ndarray
    distance: float
    is_tp2: bool
    message: str = ""


def project_tp2(B, margin: float = 1e-9, maxiter: int = 500) -> Tp2Projection:
    """Nearest (Frobenius) row-stochastic TP2 matrix to ``B``.

    Solved as a small non-linear program: entries in [0, 1], unit row sums and
    every 2x2 minor at least ``margin``.  A matrix that is already TP2 is
    returned unchanged.
    """
    E = np.asarray(B, dtype=float)
    if is_tp2(E):
        return Tp2Projection(E.copy(), E, 0.0, True, "already TP2")
    m, n = E.shape
    iu = np.triu_indices(m, 1)
    ju = np.triu_indices(n, 1)

    def minors(x):
        M = tp2_minors(x.reshape(m, n))
        return M[iu[0], iu[1]][:, ju[0], ju[1]].ravel()

    cons = [
        {"type": "eq", "fun": lambda x: x.reshape(m, n).sum(axis=1) - 1.0},
        {"type": "ineq", "fun": lambda x: minors(x) - margin},
    ]
    # rows equal to the column means are TP2 (all minors zero), a feasible start
    x0 = np.tile(E.mean(axis=0), (m, 1)).ravel()
    x0 = 0.5 * x0 + 0.5 * E.ravel()
    res = minimize(lambda x: np.sum((x - E.ravel()) ** 2), x0,
                   jac=lambda x: 2 * (x - E.ravel()),
                   bounds=[(0.0, 1.0)] * (m * n), constraints=cons, method="SLSQP",
                   options={"maxiter": maxiter, "ftol": 1e-14})
    X = np.clip(res.x.reshape(m, n), 0.0, None)
    X /= X.sum(axis=1, keepdims=True)
    # SLSQP sometimes flags a line-search stall at an already-optimal feasible
    # point, so feasibility of the returned point is what decides
    ok = is_tp2(X) and bool(np.all(np.isfinite(X)))
    if not ok:
        logger.warning("TP2 projection failed (%s); returning empirical matrix", res.message)
        return Tp2Projection(E.copy(), E, 0.0, False, str(res.message))
    return Tp2Projection(X, E, float(np.linalg.norm(X - E)), True, str(res.message))


def estimate_observation_tp2(state_ids, obs_ids, num_states: int, num_obs: int) -> Tp2Projection:
    return project_tp2(empirical_observation(state_ids, obs_ids, num_states, num_obs))


def reward_from_bins(state_edges) -> np.ndarray:
    """Mining reward inversely proportional to each state's bin-center hash rate, scaled so r(1) = 1."""
    centers = 0.5 * (state_edges[:-1] + state_edges[1:])
    if np.any(centers <= 0):
        raise ValueError("bin centers must be positive to invert")
    r = 1.0 / centers
    return r / r[0]


@dataclass
class EstimationReport:
    num_records: int
    rejected: list
    state_edges: np.ndarray
    obs_edges: np.ndarray
    transition_counts: np.ndarray
    unvisited_states: list
    empirical_observation: np.ndarray
    tp2_distance: float
    observation_is_tp2: bool

    def to_dict(self) -> dict:
        return {
            "num_records": self.num_records,
            "rejected": [list(r) for r in self.rejected],
            "state_edges": self.state_edges.tolist(),
            "obs_edges": self.obs_edges.tolist(),
            "transition_counts": self.transition_counts.tolist(),
            "unvisited_states": self.unvisited_states,
            "empirical_observation": self.empirical_observation.tolist(),
            "tp2_projection_distance": self.tp2_distance,
            "observation_is_tp2": self.observation_is_tp2,
        }


def estimate_model(dataset: TimeSeriesDataset, num_states: int = 3, num_obs: int = 5,
                   discount: float = 0.9, num_stops: int = 3, name: str = "estimated"):
    """Full pipeline; the initial belief is the unit vector of the last observed state."""
    binned = bin_series(dataset, num_states, num_obs)
    P, unvisited = estimate_transition_mle(binned.state_ids, num_states)
    proj = estimate_observation_tp2(binned.state_ids, binned.obs_ids, num_states, num_obs)
    pi0 = np.zeros(num_states)
    pi0[binned.state_ids[-1] - 1] = 1.0
    model = PomdpModel(P, proj.matrix, reward_from_bins(binned.state_edges), discount, num_stops, pi0, name=name)
    counts = np.zeros((num_states, num_states))
    np.add.at(counts, (binned.state_ids[:-1] - 1, binned.state_ids[1:] - 1), 1)
    report = EstimationReport(len(dataset), dataset.rejected, binned.state_edges, binned.obs_edges,
                              counts, unvisited, proj.empirical, proj.distance, proj.is_tp2)
    return model, report


def write_dataset(path, timestamps, hash_rate, difficulty) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for t, h, d in zip(timestamps, hash_rate, difficulty):
            w.writerow([t.date().isoformat() if isinstance(t, datetime) else t, f"{h:.6e}", f"{d:.6e}"])
