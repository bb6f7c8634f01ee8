"""Named estimator recipes shared by the regression runner and the BO loop.

Two size presets exist.  ``full`` uses the published widths (about four
million parameters per method).  ``desk`` divides every width by eight for
NOMU, MC dropout and the ensembles in regression, and by sixteen in BO, so that
the acceptance runs finish on a single CPU core; epochs are unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .baselines.ensemble import de_fit
from .baselines.gp import gp_fit
from .baselines.hde import HdeConfig, hde_build
from .baselines.mcdo import mcdo_fit
from .data import Dataset
from .model import NomuHyperparams, default_specs, fit_nomu
from .rng import derive_seed
from .training import TrainConfig

ALGORITHMS = ("NOMU", "GP", "pGP", "MCDO", "DE", "HDE", "RAND")


@dataclass(frozen=True)
class Recipe:
    epochs: int = 2**10
    nomu_width: int = 2**10
    nomu_hp: dict = field(default_factory=dict)  # overrides on the task preset
    mcdo_widths: tuple[int, ...] = (2**10, 2**11, 2**10)
    mcdo_passes: int = 100
    de_widths: tuple[int, ...] = (2**8, 2**10, 2**9)
    de_members: int = 5
    hde_search: int = 50
    base_lambda: float = 1e-8
    gp_kappa: float = 4.0
    task: str = "regression"  # or "bo"

    @classmethod
    def full(cls, task: str = "regression") -> "Recipe":
        if task == "bo":
            return cls(task="bo", mcdo_passes=10, hde_search=20)
        return cls(task=task)

    @classmethod
    def desk(cls, task: str = "regression") -> "Recipe":
        if task == "bo":
            return cls(task="bo", nomu_width=2**6, mcdo_widths=(2**6, 2**7, 2**6), mcdo_passes=10,
                       de_widths=(2**4, 2**6, 2**5), hde_search=20)
        return cls(task=task, nomu_width=2**7, mcdo_widths=(2**7, 2**8, 2**7),
                   de_widths=(2**5, 2**7, 2**6))

    def with_overrides(self, **kw) -> "Recipe":
        if "mcdo_widths" in kw:
            kw["mcdo_widths"] = tuple(kw["mcdo_widths"])
        if "de_widths" in kw:
            kw["de_widths"] = tuple(kw["de_widths"])
        return replace(self, **kw)

    def nomu_hyperparams(self, dim: int) -> NomuHyperparams:
        if self.task == "bo":
            return NomuHyperparams.bo(**self.nomu_hp)
        if self.task == "irradiance":
            return NomuHyperparams.irradiance(**self.nomu_hp)
        base = NomuHyperparams.regression(dim)
        return replace(base, **self.nomu_hp)


def fit_estimator(algorithm: str, train: Dataset, seed: int, recipe: Recipe):
    """Fit one named estimator; ``RAND`` has no model and returns ``None``."""
    cfg = TrainConfig(epochs=recipe.epochs, seed=derive_seed(seed, algorithm))
    if algorithm == "NOMU":
        hp = recipe.nomu_hyperparams(train.dim)
        return fit_nomu(train, hp, default_specs(train.dim, recipe.nomu_width), cfg)
    if algorithm == "GP":
        return gp_fit(train, kappa=recipe.gp_kappa, seed=cfg.seed)
    if algorithm == "pGP":
        return gp_fit(train, kappa=1.0, kappa_opt=True, seed=cfg.seed)
    if algorithm == "MCDO":
        return mcdo_fit(train, recipe.mcdo_widths, n_passes=recipe.mcdo_passes, config=cfg,
                        base_lambda=recipe.base_lambda)
    if algorithm == "DE":
        return de_fit(train, recipe.de_members, recipe.de_widths, cfg, recipe.base_lambda)
    if algorithm == "HDE":
        hcfg = HdeConfig(size=recipe.de_members, search=recipe.hde_search, widths=recipe.de_widths,
                         l2_base=recipe.base_lambda)
        return hde_build(train, hcfg, cfg.seed, cfg).ensemble
    if algorithm == "RAND":
        return None
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
