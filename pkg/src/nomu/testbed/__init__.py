"""Test-function battery, seeded sampling and the irradiance loader."""

from ..data import Dataset, TrainingSet
from .functions import (BATTERY_1D, BATTERY_2D, BATTERY_HIGH_D, HIGH_DIMS, TestFunction,
                        bo_function, eval_function, get)
from .irradiance import IrradianceConfigError, load_irradiance
from .sampling import make_dataset, regression_sets, sample_points

__all__ = ["BATTERY_1D", "BATTERY_2D", "BATTERY_HIGH_D", "HIGH_DIMS", "Dataset", "TrainingSet",
           "TestFunction", "bo_function", "eval_function", "get", "IrradianceConfigError",
           "load_irradiance", "make_dataset", "regression_sets", "sample_points"]
