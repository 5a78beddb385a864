"""
From a hash-rate series to a mining policy
==========================================

Bin daily hash rate into three levels and difficulty into five readings,
estimate the chain and the observation matrix (forcing the latter to be TP2),
then solve the resulting model.

The series shipped with the package is a synthetic stand-in shaped like
Apr-Aug 2022, not market data.

    python3 demos/03_from_data_to_policy.py
"""
from importlib import resources

import numpy as np

from multistop import estimate_model, ingest, solve_value_iteration, validate_model, verify_structure
from multistop.fixtures import bitcoin

with resources.as_file(resources.files("multistop") / "data" / "btc_standin_2022.csv") as path:
    data = ingest(path)
print(f"{len(data)} daily records, {data.timestamps[0].date()} .. {data.timestamps[-1].date()}")

model, report = estimate_model(data)
np.set_printoptions(precision=4, suppress=True)
print("\nestimated P:\n", model.transition)
print("reference P:\n", bitcoin().transition)
print("\nempirical B:\n", report.empirical_observation)
print(f"TP2 projection moved B by {report.tp2_distance:.4f} (Frobenius)")
print("reward r(x):", model.reward_mine)
print()
print(validate_model(model))

table = solve_value_iteration(model)
print(f"\nV(pi0) = {table.value(model.initial_belief):.4f}, starting from state "
      f"{int(np.argmax(model.initial_belief)) + 1}")
print(verify_structure(table))
