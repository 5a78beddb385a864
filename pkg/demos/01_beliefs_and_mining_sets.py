"""
Beliefs, value iteration and the shape of the mining set
========================================================

A miner cannot see the network hash rate, only a noisy difficulty reading.
It keeps a belief over three hash-rate levels and has three mining slots to
spend.  This walks through the filter, solves for the optimal policy on a
simplex grid, and draws where on the simplex it pays to mine.

    python3 demos/01_beliefs_and_mining_sets.py
"""
import numpy as np

from multistop import filter_sequence, solve_value_iteration, validate_model, verify_structure
from multistop.fixtures import synthetic_low
from multistop.model import MINE

model = synthetic_low()
print(validate_model(model))

# start certain the hash rate is high (state 3), then watch low readings come in
beliefs = filter_sequence(model, [1, 1, 2, 1])
for t, b in enumerate(beliefs):
    print(f"t={t}  belief={np.round(b, 3)}  expected reward={b @ model.reward_mine:.4f}")

# value iteration on the 30-step grid
table = solve_value_iteration(model)
print(f"\n{len(table.grid)} grid points, converged in {table.iterations} sweeps")
print(f"V(pi0, l=1) = {table.value(model.initial_belief, 1):.4f}")
print(verify_structure(table))

# Text picture of each mining set.  Rows run from pi(1)=1 (top) down to
# pi(1)=0; within a row pi(2) grows to the right.  '#' mine, '.' wait.
d = table.grid.resolution
for level in (1, 2, 3):
    print(f"\nlevel {level}")
    for k1 in range(d, -1, -3):
        row = []
        for k2 in range(0, d - k1 + 1, 3):
            g = table.grid.index_of_counts([k1, k2, d - k1 - k2])[0]
            row.append("#" if table.actions[g, level - 1] == MINE else ".")
        print(" " * (k1 // 3) + " ".join(row))
