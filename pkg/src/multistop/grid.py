"""Regular lattice on the probability simplex with nearest-point lookup."""
from __future__ import annotations

from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np


def lattice_points(num_states: int, resolution: int) -> np.ndarray:
    """Integer compositions of ``resolution`` into ``num_states`` parts.

    Rows are in lexicographically decreasing order, so ``e_1`` comes first.
    """
    n, d = num_states, resolution
    # stars and bars: choose n-1 bar positions among d+n-1 slots
    rows = []
    for bars in combinations(range(d + n - 1), n - 1):
        edges = (-1,) + bars + (d + n - 1,)
        rows.append([edges[k + 1] - edges[k] - 1 for k in range(n)])
    return np.array(rows[::-1], dtype=np.int64).reshape(-1, n)


def round_to_lattice(beliefs, resolution: int) -> np.ndarray:
    """Closest lattice point (in counts) to each belief, Euclidean metric.

    Rounds ``d * pi`` coordinatewise and repairs the total by moving the
    coordinates with the largest rounding error, which is the exact
    closest-point rule for the root lattice the grid is a coset of.
    """
    x = np.atleast_2d(np.asarray(beliefs, dtype=float)) * resolution
    k = np.rint(x)
    excess = (k.sum(axis=1) - resolution).astype(np.int64)
    err = x - k  # in [-0.5, 0.5]
    if np.any(excess != 0):
        # excess > 0: lower the coordinates that were rounded up the most
        order_down = np.argsort(err, axis=1, kind="stable")
        order_up = np.argsort(-err, axis=1, kind="stable")
        rank_down = np.empty_like(order_down)
        rank_up = np.empty_like(order_up)
        rows = np.arange(x.shape[0])[:, None]
        rank_down[rows, order_down] = np.arange(x.shape[1])
        rank_up[rows, order_up] = np.arange(x.shape[1])
        k -= (rank_down < np.maximum(excess, 0)[:, None])
        k += (rank_up < np.maximum(-excess, 0)[:, None])
    return k.astype(np.int64)


class SimplexGrid:
    """Points ``k / d`` of the simplex with integer ``k`` summing to ``d``."""

    def __init__(self, num_states: int, resolution: int = 30):
        if num_states < 1 or resolution < 1:
            raise ValueError("num_states and resolution must be positive")
        self.num_states = num_states
        self.resolution = resolution
        self.counts = lattice_points(num_states, resolution)
        self.points = self.counts / resolution
        self._keys = self._encode(self.counts)
        self._order = np.argsort(self._keys)
        self._sorted_keys = self._keys[self._order]

    def __len__(self):
        return len(self.counts)

    @staticmethod
    def expected_size(num_states: int, resolution: int) -> int:
        return comb(resolution + num_states - 1, num_states - 1)

    def _encode(self, counts) -> np.ndarray:
        base = self.resolution + 1
        weights = base ** np.arange(self.num_states, dtype=np.int64)
        return counts @ weights

    def index_of_counts(self, counts) -> np.ndarray:
        keys = self._encode(np.atleast_2d(counts))
        pos = np.searchsorted(self._sorted_keys, keys)
        if np.any(pos >= len(self)) or np.any(self._sorted_keys[np.minimum(pos, len(self) - 1)] != keys):
            raise ValueError("counts are not lattice points of this grid")
        return self._order[pos]

    def nearest(self, beliefs) -> np.ndarray:
        """Index of the nearest grid point for each row of ``beliefs``."""
        return self.index_of_counts(round_to_lattice(beliefs, self.resolution))

    def vertex(self, i: int) -> int:
        """Grid index of the unit vector ``e_i`` (1-based ``i``)."""
        k = np.zeros(self.num_states, dtype=np.int64)
        k[i - 1] = self.resolution
        return int(self.index_of_counts(k)[0])

    @cached_property
    def edges(self) -> np.ndarray:
        """Adjacent index pairs: one unit of mass moved between two coordinates."""
        n = self.num_states
        out = []
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                step = np.zeros(n, dtype=np.int64)
                step[a], step[b] = -1, 1
                src = np.flatnonzero(self.counts[:, a] > 0)
                dst = self.index_of_counts(self.counts[src] + step)
                keep = src < dst
                out.append(np.stack([src[keep], dst[keep]], axis=1))
        return np.concatenate(out) if out else np.empty((0, 2), dtype=np.int64)

    def lines_from_vertex(self, i: int) -> list[np.ndarray]:
        """Grid points grouped into segments ``L(e_i, pi_bar)``.

        Each array lists indices along one segment starting at ``e_i`` and
        moving away from it; segments with a single off-vertex point are kept.
        """
        d = self.resolution
        v = self.counts.copy()
        v[:, i - 1] -= d
        off = np.flatnonzero(np.any(v != 0, axis=1))
        g = np.gcd.reduce(np.abs(v[off]), axis=1)
        dirs = v[off] // g[:, None]
        groups: dict[bytes, list[tuple[int, int]]] = {}
        for idx, step, key in zip(off, g, map(bytes, dirs.astype(np.int64))):
            groups.setdefault(key, []).append((int(step), int(idx)))
        origin = self.vertex(i)
        lines = []
        for members in groups.values():
            members.sort()
            lines.append(np.array([origin] + [idx for _, idx in members]))
        return lines
