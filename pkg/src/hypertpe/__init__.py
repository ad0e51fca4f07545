"""Multi-fidelity hyperparameter optimization: random search, TPE, Hyperband and Hyperband+TPE."""

from ._kernels import BACKEND
from .objectives import Benchmark, combine_metrics, evaluate_synthetic, load_benchmark
from .schedulers import (
    BudgetLedger,
    compute_brackets,
    run_bo,
    run_hyperband,
    run_hyperband_tpe,
    run_optimizer,
    run_random,
    top_k,
)
from .space import ParameterSpec, SearchSpace, from_unit, sample_prior, to_unit, validate
from .tpe import Observation, TpeParams, fit_parzen, incumbent, log_density, split_observations, suggest

__version__ = "0.1.0"
