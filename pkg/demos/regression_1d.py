"""Fit NOMU, GP and MC dropout on one 1D function and compare their bounds.

    python3 demos/regression_1d.py [function] [n_train]

Prints AUC and MNLPD per estimator and writes one SVG band plot each into
demos/out/.
"""

import sys
from pathlib import Path

import numpy as np

from nomu.algorithms import Recipe, fit_estimator
from nomu.metrics import evaluate
from nomu.plotting import ub_band_series, ub_band_svg
from nomu.testbed import get, regression_sets


def main(name="Sine3", n_train=8, seed=0):
    f = get(name)
    train, val = regression_sets(f, seed, n_train, 100)
    recipe = Recipe.desk("regression")
    grid = np.linspace(-1, 1, 201)[:, None]
    out = Path(__file__).with_name("out")
    out.mkdir(exist_ok=True)
    for alg in ("NOMU", "GP", "MCDO"):
        est = fit_estimator(alg, train, seed, recipe)
        m = evaluate(est, val)
        print(f"{alg:5s} AUC {m['auc']:.3f}  MNLPD {m['mnlpd']:.3f}  (c at minimum {m['mnlpd_c']:.2f})")
        mean, sigma = est.predict(grid)
        payload = {"grid": grid.tolist(), "mean": mean.tolist(), "sigma": sigma.tolist(),
                   "truth": f(grid).tolist(), "train_x": train.x.tolist(), "train_y": train.y.tolist()}
        path = out / f"{name}-{alg}.svg"
        path.write_text(ub_band_svg(ub_band_series(payload, m["mnlpd_c"]), f"{name}, {alg}"))
    print(f"plots in {out}")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(args[0] if args else "Sine3", int(args[1]) if len(args) > 1 else 8)
