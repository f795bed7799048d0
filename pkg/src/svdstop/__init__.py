"""Early-stopped truncated-SVD estimation for ill-posed linear problems.

The package works in the sequence-space form of a linear inverse problem:
observed coefficients ``y_i = lam_i * mu_i + delta * eps_i`` for a known
non-increasing singular-value sequence ``lam``, an unknown coefficient
vector ``mu`` and noise level ``delta``. Estimation truncates the
singular-value decomposition at an index chosen by monitoring the data
residual, optionally refined by a model-selection second step, and the
surrounding modules provide oracle quantities, theoretical bound
evaluators, adversarial lower-bound constructions, a Monte Carlo harness
and a lazy partial-SVD solver for matrix data.
"""

from . import estimator, harness, lazysvd, lowerbound, model, oracles, signals, stopping, svgplot

__all__ = [
    "estimator",
    "harness",
    "lazysvd",
    "lowerbound",
    "model",
    "oracles",
    "signals",
    "stopping",
    "svgplot",
]
__version__ = "0.1.0"
