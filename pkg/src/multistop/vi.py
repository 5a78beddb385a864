"""Grid value iteration for the multiple-stopping POMDP.

Stop levels are 1-based: level ``l`` means ``l - 1`` stops have been used.
Values for the fictitious level ``L + 1`` are identically zero.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .grid import SimplexGrid
from .model import CONTINUE, MINE, PomdpModel, predictive_update

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ValueTable:
    """Converged (or truncated) value function and greedy actions on a grid.

    ``values[g, l - 1]`` and ``actions[g, l - 1]`` hold level ``l`` at grid
    point ``g``.
    """

    model: PomdpModel
    grid: SimplexGrid
    values: np.ndarray
    actions: np.ndarray
    converged: bool
    residual: float
    iterations: int
    residuals: np.ndarray = field(repr=False)

    @property
    def num_stops(self) -> int:
        return self.values.shape[1]

    def value(self, belief, level: int = 1) -> float:
        """Value at the grid point nearest to ``belief``."""
        return float(self.values[self.grid.nearest(belief)[0], level - 1])

    def as_policy(self) -> "GridPolicy":
        return GridPolicy(self)


def _transition_tables(model: PomdpModel, grid: SimplexGrid):
    post, sigma = predictive_update(model, grid.points)
    G, Y, X = post.shape
    flat = post.reshape(-1, X)
    ok = sigma.reshape(-1) > 0
    idx = np.zeros(G * Y, dtype=np.int64)
    idx[ok] = grid.nearest(flat[ok])
    return idx.reshape(G, Y), sigma


def _backup(V, idx, sigma, immediate, rho, rows):
    # V has L + 1 columns, the last one being the zero boundary level
    ev = np.einsum("gy,gyl->gl", sigma[rows], V[idx[rows]])
    q_mine = immediate[rows, None] + rho * ev[:, 1:]
    q_cont = rho * ev[:, :-1]
    # ties go to "don't mine"
    return np.maximum(q_mine, q_cont), np.where(q_mine > q_cont, MINE, CONTINUE)


def solve_value_iteration(
    model: PomdpModel,
    grid: SimplexGrid | None = None,
    max_iters: int = 2000,
    tol: float = 1e-8,
    workers: int = 1,
) -> ValueTable:
    """Value iteration with nearest-grid-point evaluation of ``V(T(pi, y), .)``.

    Starts from ``V = 0`` and stops once the sup-norm change falls below
    ``tol``.  With ``workers > 1`` each sweep is split across threads by
    grid-point chunks and joined before the next sweep.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if grid is None:
        grid = SimplexGrid(model.num_states, 30)
    L = model.num_stops
    idx, sigma = _transition_tables(model, grid)
    immediate = grid.points @ model.reward_mine
    rho = model.discount
    G = len(grid)

    V = np.zeros((G, L + 1))
    actions = np.full((G, L), CONTINUE, dtype=np.int8)
    residuals = []
    chunks = np.array_split(np.arange(G), max(1, workers))
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    converged = False
    try:
        for it in range(1, max_iters + 1):
            if pool is None:
                newV, actions = _backup(V, idx, sigma, immediate, rho, slice(None))
            else:
                parts = list(pool.map(lambda rows: _backup(V, idx, sigma, immediate, rho, rows), chunks))
                newV = np.concatenate([p[0] for p in parts])
                actions = np.concatenate([p[1] for p in parts])
            res = float(np.max(np.abs(newV - V[:, :L]))) if L else 0.0
            V[:, :L] = newV
            residuals.append(res)
            if res < tol:
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    if not converged:
        logger.warning("value iteration stopped after %d sweeps, residual %.3g", max_iters, residuals[-1])
    return ValueTable(
        model=model,
        grid=grid,
        values=V[:, :L].copy(),
        actions=actions.astype(np.int8),
        converged=converged,
        residual=residuals[-1] if residuals else 0.0,
        iterations=len(residuals),
        residuals=np.array(residuals),
    )


def extract_sets(table: ValueTable, level: int):
    """Grid indices of the mine set and the don't-mine set at ``level``."""
    a = table.actions[:, level - 1]
    return np.flatnonzero(a == MINE), np.flatnonzero(a == CONTINUE)


def policy_action(table: ValueTable, belief, level: int) -> int:
    return int(table.actions[table.grid.nearest(belief)[0], level - 1])


class GridPolicy:
    """Nearest-grid-point lookup of a solved action table."""

    name = "optimal (grid VI)"

    def __init__(self, table: ValueTable):
        self.table = table

    def decide(self, belief, level: int) -> int:
        return policy_action(self.table, belief, level)

    def act(self, beliefs, levels, history, uniforms):
        g = self.table.grid.nearest(beliefs)
        return self.table.actions[g, levels - 1] == MINE


# -- structure checks ----------------------------------------------------------

@dataclass
class StructureReport:
    monotone: dict[int, bool]
    connected: dict[int, bool]
    nested: dict[int, bool]

    @property
    def ok(self) -> bool:
        return all(self.monotone.values()) and all(self.connected.values()) and all(self.nested.values())

    def lines(self) -> list[str]:
        return [
            f"level {l}: monotone={self.monotone[l]} connected={self.connected[l]} nested={self.nested[l]}"
            for l in sorted(self.monotone)
        ]

    def __str__(self):
        return "\n".join(self.lines())


def _is_connected(grid: SimplexGrid, members: np.ndarray) -> bool:
    if len(members) <= 1:
        return True
    inside = np.zeros(len(grid), dtype=bool)
    inside[members] = True
    e = grid.edges
    e = e[inside[e[:, 0]] & inside[e[:, 1]]]
    local = np.full(len(grid), -1)
    local[members] = np.arange(len(members))
    m = len(members)
    adj = coo_matrix((np.ones(len(e)), (local[e[:, 0]], local[e[:, 1]])), shape=(m, m))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


def is_monotone_on_lines(grid: SimplexGrid, actions: np.ndarray) -> bool:
    """Action non-increasing in MLR order along lines through ``e_1`` and ``e_|X|``.

    Moving away from ``e_1`` increases a belief in MLR order; moving away from
    ``e_|X|`` decreases it.
    """
    for line in grid.lines_from_vertex(1):
        if np.any(np.diff(actions[line]) > 0):
            return False
    for line in grid.lines_from_vertex(grid.num_states):
        if np.any(np.diff(actions[line]) < 0):
            return False
    return True


def verify_structure(table: ValueTable, actions: np.ndarray | None = None) -> StructureReport:
    """Check monotonicity, connectedness of both sets and nesting for every level.

    ``actions`` may be supplied to check an arbitrary table on the same grid.
    """
    acts = table.actions if actions is None else np.asarray(actions)
    grid = table.grid
    mono, conn, nest = {}, {}, {}
    for l in range(1, acts.shape[1] + 1):
        a = acts[:, l - 1]
        mono[l] = is_monotone_on_lines(grid, a)
        conn[l] = (_is_connected(grid, np.flatnonzero(a == MINE))
                   and _is_connected(grid, np.flatnonzero(a == CONTINUE)))
        if l == 1:
            nest[l] = True
        else:
            prev = acts[:, l - 2]
            nest[l] = bool(np.all(prev[a == MINE] == MINE))
    return StructureReport(mono, conn, nest)


def export_table(table: ValueTable, path) -> None:
    """Write one row per grid point per level: coordinates, level, value, action."""
    X = table.grid.num_states
    header = ",".join([f"pi{i + 1}" for i in range(X)] + ["level", "value", "action"])
    lines = [header]
    for l in range(1, table.num_stops + 1):
        for g, pt in enumerate(table.grid.points):
            coords = ",".join(f"{c:.10g}" for c in pt)
            lines.append(f"{coords},{l},{table.values[g, l - 1]:.17g},{table.actions[g, l - 1]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
