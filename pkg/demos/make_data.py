"""Regenerate the shipped data files under src/multistop/data.

The three model files are written straight from the builders in
``multistop.fixtures``.  The CSV is a *synthetic stand-in* for daily Bitcoin
hash rate and difficulty over Apr-Aug 2022: a hidden state path is drawn from
the Bitcoin model's transition matrix, hash rate is drawn uniformly inside the
state's band, and difficulty inside the band of an observation drawn from B.
It is not market data; it exists so the estimation pipeline has something
realistic-looking to chew on offline.

    python3 demos/make_data.py
"""
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from multistop.estimation import write_dataset
from multistop.fixtures import FIXTURES, bitcoin
from multistop.model import save_model

DATA = Path(__file__).resolve().parents[1] / "src" / "multistop" / "data"

# EH/s bands for the three hash-rate levels, and difficulty bands (x 1e12)
HASH_BANDS = np.array([180.0, 206.7, 233.3, 260.0])
DIFF_BANDS = np.linspace(27.0, 32.0, 6)


def standin_series(seed=2022, start=date(2022, 4, 1), end=date(2022, 8, 31)):
    model = bitcoin()
    rng = np.random.default_rng(seed)
    days = (end - start).days + 1
    x = np.empty(days, dtype=int)
    x[0] = 1
    for t in range(1, days):
        x[t] = rng.choice(3, p=model.transition[x[t - 1]])
    y = np.array([rng.choice(5, p=model.observation[s]) for s in x])
    hr = rng.uniform(HASH_BANDS[x], HASH_BANDS[x + 1])
    # pin the extremes so uniform binning recovers the bands exactly
    hr[np.argmin(hr)], hr[np.argmax(hr)] = HASH_BANDS[0], HASH_BANDS[-1]
    diff = rng.uniform(DIFF_BANDS[y], DIFF_BANDS[y + 1]) * 1e12
    diff[np.argmin(diff)], diff[np.argmax(diff)] = DIFF_BANDS[0] * 1e12, DIFF_BANDS[-1] * 1e12
    stamps = [start + timedelta(days=i) for i in range(days)]
    return stamps, hr * 1e18, diff


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    for name, (fname, build) in FIXTURES.items():
        save_model(build(), DATA / fname)
        print("wrote", DATA / fname)
    stamps, hr, diff = standin_series()
    write_dataset(DATA / "btc_standin_2022.csv", stamps, hr, diff)
    print("wrote", DATA / "btc_standin_2022.csv", f"({len(stamps)} rows, synthetic)")
