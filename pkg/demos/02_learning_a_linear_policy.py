"""
Learning a linear threshold policy with SPSA
============================================

The grid solution needs the whole simplex.  A linear threshold policy needs
L * (|X| - 1) numbers, kept feasible by a spherical reparametrization, and is
tuned from simulated rollouts alone.

    python3 demos/02_learning_a_linear_policy.py
"""
import numpy as np

from multistop import SpsaConfig, check_feasible, compare_policies, solve_value_iteration, train
from multistop.fixtures import SPSA_GAINS_SYNTHETIC, synthetic_low
from multistop.linear import nestedness_of_policy
from multistop.simulate import baseline_first_l, baseline_random, format_comparison, train_softmax_baseline

model = synthetic_low()
config = SpsaConfig.from_gains(SPSA_GAINS_SYNTHETIC, num_iterations=200, seed=1)
policy, trace = train(model, config)

sm = trace.smoothed()
for n in range(0, len(sm), 25):
    print(f"iter {n:4d}  a_n={trace.a[n]:.3f}  c_n={trace.c[n]:.4f}  smoothed J={sm[n]:.4f}")

print("\ntheta (one row per stop level):")
print(np.round(policy.theta, 4))
print(check_feasible(policy))
print("nested mining sets:", nestedness_of_policy(policy))

# score everything on the same 20000 sample paths
vi = solve_value_iteration(model).as_policy()
rl, _ = train_softmax_baseline(model)
rows = compare_policies(model, [vi, policy, rl, baseline_random(), baseline_first_l()], 20_000, seed=7)
print()
print(format_comparison(rows))
