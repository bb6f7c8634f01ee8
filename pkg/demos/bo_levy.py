"""A short BO run on the 2D Levy function: NOMU against random search.

    python3 demos/bo_levy.py [n_steps]
"""

import sys

from nomu.algorithms import Recipe
from nomu.bo import BoConfig, run_bo
from nomu.testbed import bo_function


def main(n_steps=16, seed=0):
    f = bo_function("Levy", 2)
    cfg = BoConfig(n_init=8, n_steps=n_steps, mw_target=0.5)
    for alg in ("RAND", "NOMU"):
        state = run_bo(f, alg, cfg, seed, Recipe.desk("bo"))
        trace = " ".join(f"{r:.3f}" for r in state.regret_trace[::4])
        print(f"{alg:5s} final regret {state.final_regret:.4f}  c0 {state.c0:.3g}  trace {trace}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 16)
