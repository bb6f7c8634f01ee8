"""Computes the output rescale constants frozen in ``constants.json``.

For each function the native minimum and maximum over the domain are estimated
by a dense scan (a 10^4-point grid in 1D, a 1000 x 1000 grid in 2D, 10^6
uniform samples in higher dimensions), polished by bounded local search from
the best scan points, and compared with the library's known minimiser where
one exists.  Run ``python -m nomu.testbed.constants`` to regenerate the file.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.optimize import minimize

from ..rng import stream
from .functions import CONSTANTS_PATH, NATIVE, _native_name, all_keys, from_native, key, native_eval


def _scan_points(dim: int, seed: int = 0) -> np.ndarray:
    if dim == 1:
        return np.linspace(-1.0, 1.0, 10**4)[:, None]
    if dim == 2:
        g = np.linspace(-1.0, 1.0, 1000)
        a, b = np.meshgrid(g, g, indexing="ij")
        return np.column_stack([a.ravel(), b.ravel()])
    pts = stream(seed, "constants-scan", dim).uniform(-1.0, 1.0, (10**6, dim))
    corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * min(dim, 10), indexing="ij")).reshape(min(dim, 10), -1).T
    if dim > 10:
        corners = np.vstack([np.column_stack([corners, np.full((len(corners), dim - 10), v)])
                             for v in (-1.0, 1.0)])
    return np.vstack([pts, corners])


def _polish(name: str, dim: int, starts: np.ndarray, sign: float) -> tuple[float, np.ndarray]:
    """Best of bounded L-BFGS-B runs on ``sign * f`` from the given starts."""
    fn = lambda x: sign * float(native_eval(name, dim, x[None, :])[0])
    best_v, best_x = np.inf, None
    for x0 in starts:
        res = minimize(fn, x0, method="L-BFGS-B", bounds=[(-1.0, 1.0)] * dim)
        cand = [(res.fun, res.x), (fn(x0), x0)]
        for v, x in cand:
            if v < best_v:
                best_v, best_x = v, np.clip(x, -1.0, 1.0)
    return sign * best_v, best_x


def compute(name: str, dim: int, n_starts: int = 8) -> dict:
    pts = _scan_points(dim)
    vals = np.concatenate([native_eval(name, dim, pts[i:i + 50000]) for i in range(0, len(pts), 50000)])
    lo_idx = np.argsort(vals)[:n_starts]
    hi_idx = np.argsort(vals)[-n_starts:]
    vmin, xmin = _polish(name, dim, pts[lo_idx], 1.0)
    vmax, xmax = _polish(name, dim, pts[hi_idx], -1.0)
    argmin = NATIVE[_native_name(name)].argmin
    if argmin is not None:
        x_known = from_native(name, dim, argmin(dim))
        v_known = float(native_eval(name, dim, x_known[None, :])[0])
        if v_known <= vmin:
            vmin, xmin = v_known, x_known
    return {"name": name, "dim": dim, "min": vmin, "max": vmax,
            "mid": 0.5 * (vmax + vmin), "half": 0.5 * (vmax - vmin),
            "argmin": xmin.tolist(), "argmax": xmax.tolist()}


def compute_all() -> dict:
    out = {}
    for name, dim in all_keys():
        out[key(name, dim)] = compute(name, dim)
    return out


if __name__ == "__main__":
    table = compute_all()
    with open(CONSTANTS_PATH, "w") as fh:
        json.dump(table, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(table)} entries to {CONSTANTS_PATH}")
