"""
How many times should we mine?
==============================

Each extra mining slot adds value with diminishing returns, while running the
rig costs c * L^2.  Sweep L and keep the best net value.

    python3 demos/04_how_many_stops.py
"""
from multistop import optimize_num_stops
from multistop.fixtures import bitcoin
from multistop.simulate import quadratic_cost

base = bitcoin()
for c in (0.002, 0.005, 0.02):
    res = optimize_num_stops(lambda L: base.replace(num_stops=L), quadratic_cost(c), 8)
    print(f"c = {c}")
    for L in sorted(res.net):
        mark = "  <- best" if L == res.best else ""
        print(f"  L={L}  V={res.value[L]:.4f}  cost={res.cost[L]:.4f}  net={res.net[L]:.4f}{mark}")
    print(f"  value concave in L: {res.value_concave}\n")
