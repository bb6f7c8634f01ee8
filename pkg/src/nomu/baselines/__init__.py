"""Benchmark estimators: RBF GP, MC dropout, deep ensembles, hyper deep ensembles."""

from .ensemble import DeepEnsemble, Member, de_fit, de_predict
from .gp import RbfGpModel, gp_fit, gp_predict
from .hde import HdeConfig, ensemble_nlpd, hde_build, hde_greedy_select
from .mcdo import McdoModel, mcdo_fit, mcdo_predict

__all__ = ["DeepEnsemble", "Member", "de_fit", "de_predict", "RbfGpModel", "gp_fit", "gp_predict",
           "HdeConfig", "ensemble_nlpd", "hde_build", "hde_greedy_select", "McdoModel", "mcdo_fit",
           "mcdo_predict"]
