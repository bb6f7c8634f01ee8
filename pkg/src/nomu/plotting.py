"""SVG figures from experiment directories.

Each kind has a pure ``*_series`` function returning the numbers drawn, and a
renderer that turns them into SVG text.  Output is byte-stable: the SVG hash
salt is fixed and the date metadata is dropped.
"""

from __future__ import annotations

import io
import json
import math
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import coverage_curve  # noqa: E402

KINDS = ("ub-band-1d", "sigma-heatmap-2d", "regret", "mw-cp-curve")
_RC = {"svg.hashsalt": "nomu", "svg.fonttype": "none", "font.size": 9}


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


# ---- series --------------------------------------------------------------

def ub_band_series(payload: dict, c: float) -> dict:
    x = np.asarray(payload["grid"])[:, 0]
    mean = np.asarray(payload["mean"])
    sigma = np.asarray(payload["sigma"])
    return {"x": x, "mean": mean, "lower": mean - c * sigma, "upper": mean + c * sigma,
            "sigma": sigma, "truth": np.asarray(payload["truth"]) if "truth" in payload else None,
            "train_x": np.asarray(payload["train_x"])[:, 0], "train_y": np.asarray(payload["train_y"])}


def regret_series(traces: list) -> dict:
    """Per-step mean and normal 95% CI over runs."""
    a = np.asarray(traces, dtype=np.float64)
    mean = a.mean(axis=0)
    half = 1.96 * a.std(axis=0, ddof=1) / math.sqrt(len(a)) if len(a) > 1 else np.zeros_like(mean)
    return {"step": np.arange(a.shape[1]), "mean": mean, "lo": mean - half, "hi": mean + half}


def mw_cp_series(y, mean, sigma) -> dict:
    """Step curve of MW over CP: MW(c_k) holds on ``(CP_{k-1}, CP_k]``.

    The area under this curve is exactly the AUC.
    """
    c_jump, cp, mw = coverage_curve(y, mean, sigma)
    cp_left = np.concatenate([[0.0], cp[:-1]])
    xs = np.ravel(np.column_stack([cp_left, cp]))
    ys = np.repeat(mw, 2)
    return {"cp": xs, "mw": ys, "area": float(np.sum((cp - cp_left) * mw))}


# ---- renderers -----------------------------------------------------------

def ub_band_svg(series: dict, title: str = "") -> str:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.fill_between(series["x"], series["lower"], series["upper"], color="tab:blue", alpha=0.25,
                        lw=0, label="UB band")
        if series["truth"] is not None:
            ax.plot(series["x"], series["truth"], color="black", lw=1, label="f")
        ax.plot(series["x"], series["mean"], color="tab:blue", lw=1.2, label="prediction")
        ax.plot(series["x"], series["sigma"], color="tab:blue", lw=0.8, ls=":", label="sigma")
        ax.scatter(series["train_x"], series["train_y"], s=12, color="black", zorder=3)
        ax.set_xlim(-1, 1)
        ax.set_title(title)
        ax.legend(loc="best", fontsize=7)
        return _svg(fig)


def sigma_heatmap_svg(payload: dict, title: str = "") -> str:
    grid = np.asarray(payload["grid"])
    n = int(round(math.sqrt(len(grid))))
    sigma = np.asarray(payload["sigma"]).reshape(n, n)
    tx = np.asarray(payload["train_x"])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4, 3.4))
        im = ax.imshow(sigma.T, origin="lower", extent=(-1, 1, -1, 1), cmap="viridis", aspect="equal")
        ax.scatter(tx[:, 0], tx[:, 1], s=10, color="white", edgecolors="black", linewidths=0.5)
        fig.colorbar(im, ax=ax, label="sigma")
        ax.set_title(title)
        return _svg(fig)


def regret_svg(by_alg: dict[str, dict], title: str = "") -> str:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        for alg in sorted(by_alg):
            s = by_alg[alg]
            ax.plot(s["step"], s["mean"], lw=1.2, label=alg)
            ax.fill_between(s["step"], s["lo"], s["hi"], alpha=0.2, lw=0)
        ax.set_xlabel("BO step")
        ax.set_ylabel("regret")
        ax.set_title(title)
        ax.legend(loc="best", fontsize=7)
        return _svg(fig)


def mw_cp_svg(by_alg: dict[str, dict], title: str = "") -> str:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4, 3))
        for alg in sorted(by_alg):
            s = by_alg[alg]
            ax.plot(s["cp"], s["mw"], lw=1.2, label=f"{alg} (AUC {s['area']:.3g})")
        ax.set_xlabel("coverage probability")
        ax.set_ylabel("mean width")
        ax.set_xlim(0, 1)
        ax.set_title(title)
        ax.legend(loc="best", fontsize=7)
        return _svg(fig)


# ---- directory driver ----------------------------------------------------

def _records(out: Path) -> list[tuple[Path, dict]]:
    runs = out / "runs"
    if not runs.is_dir():
        raise FileNotFoundError(f"{runs}: no run files")
    return [(p, json.loads(p.read_text())) for p in sorted(runs.glob("*/*/*.json"))]


def plot_dir(out: str | Path, kind: str, run: int = 0) -> list[Path]:
    """Write the figures of one kind under ``<out>/plots/<kind>/``; returns their paths."""
    from .experiment import atomic_write

    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    out = Path(out)
    dest = out / "plots" / kind
    written = []
    recs = _records(out)
    if kind == "regret":
        groups: dict = {}
        for _, r in recs:
            if "regret" in r:
                groups.setdefault((r["function"], r["mw_target"]), {}).setdefault(r["algorithm"], []).append(
                    r["regret"])
        for (fn, mw), by_alg in sorted(groups.items()):
            svg = regret_svg({a: regret_series(t) for a, t in by_alg.items()}, f"{fn}, MW {mw}")
            written.append(dest / f"{fn}-mw{mw}.svg")
            atomic_write(written[-1], svg)
    elif kind == "mw-cp-curve":
        groups = {}
        for _, r in recs:
            if r.get("run") == run and "validation" in r:
                v = r["validation"]
                groups.setdefault(r["function"], {})[r["algorithm"]] = mw_cp_series(v["y"], v["mean"], v["sigma"])
        for fn, by_alg in sorted(groups.items()):
            written.append(dest / f"{fn}-run{run}.svg")
            atomic_write(written[-1], mw_cp_svg(by_alg, f"{fn}, run {run}"))
    else:
        want = 1 if kind == "ub-band-1d" else 2
        for _, r in recs:
            p = r.get("plot")
            if r.get("run") != run or p is None or len(p["grid"][0]) != want:
                continue
            title = f"{r['function']} {r['algorithm']}, run {run}"
            if want == 1:
                svg = ub_band_svg(ub_band_series(p, r["metrics"]["mnlpd_c"]), title)
            else:
                svg = sigma_heatmap_svg(p, title)
            written.append(dest / f"{r['function']}-{r['algorithm']}-run{run}.svg")
            atomic_write(written[-1], svg)
    if not written:
        raise FileNotFoundError(f"{out}: no records usable for a {kind} plot")
    return written
