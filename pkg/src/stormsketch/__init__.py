"""Mergeable LSH count sketches for training linear models.

A dataset is compressed into an ``R x B`` array of counters. The mean
counter value at a query's hash locations estimates an empirical risk,
which a derivative-free optimizer then minimises without touching the
raw data again.
"""

from .dataset import Dataset, gen_synthetic_classification, gen_synthetic_regression, load_csv, normalize, save_csv
from .errors import (
    InputError,
    NumericalError,
    StormError,
)
from .lsh import Family, HashFamilyConfig, HashFunction, augment_data, augment_query, srp_hash
from .optimizer import OptimizerConfig, TrainTrace, dfo_train, exact_surrogate_train, ols_solve
from .sketch import Sketch, build_sketch, deserialize, merge, new_sketch, serialize
from .surrogate import SurrogateParams, exact_empirical_risk, prp_loss

__version__ = "0.1.0"
