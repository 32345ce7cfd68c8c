"""Bayesian deep noise neural networks with a closed-form Gibbs sampler."""
import os

# thread count for the BLAS backend; must be set before numpy loads it
_threads = os.environ.get("BDEEPNOISE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from .activation import PiecewiseLinearActivation, builtin  # noqa: E402
from .data import gen_synthetic, load_csv, standardize  # noqa: E402
from .distributions import RngStream  # noqa: E402
from .gibbs import GibbsConfig, fit, gibbs_sweep  # noqa: E402
from .metrics import evaluate  # noqa: E402
from .model import (ModelParams, NetworkShape, PosteriorChain, PredictiveEnsemble,  # noqa: E402
                    PriorConfig, forward_deterministic, forward_stochastic, predict)

__all__ = [
    "GibbsConfig", "ModelParams", "NetworkShape", "PiecewiseLinearActivation", "PosteriorChain",
    "PredictiveEnsemble", "PriorConfig", "RngStream", "builtin", "fit", "forward_deterministic",
    "evaluate", "forward_stochastic", "gen_synthetic", "gibbs_sweep", "load_csv", "predict",
    "standardize",
]
__version__ = "0.1.0"
