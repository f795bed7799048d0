"""Residual-monitored early stopping, AIC selection and the two-step rule.

The stopping rule consumes coefficients strictly left to right and halts
at the first index ``m >= m0`` whose remaining squared residual
``|Y|**2 - sum_{i<=m} Y_i**2`` drops to the threshold ``kappa``. The
squared norm is a required header value, so the rule needs exactly
``tau`` coefficients and never looks ahead; :func:`early_stop_stream` is
the frugal streaming form and :func:`stop_index` the vectorised
equivalent used by simulation loops. Both accumulate the running sum in
the same order in double precision, so they agree exactly.

The second step re-selects a truncation index by penalised empirical
risk (an AIC criterion) over ``0..m0`` whenever the first step stops
immediately at ``m0``; by construction it never consumes coefficients
beyond the ones the first step already read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from statistics import NormalDist
from typing import Iterable, Iterator

import numpy as np

from .estimator import EstimateVector, _prefix_sums, estimate_at
from .model import NoiseModel, Observation, Spectrum, require_same_dim

__all__ = [
    "StopOutcome",
    "StoppingConfig",
    "TruncatedStreamError",
    "aic_select",
    "conservative_start",
    "default_threshold",
    "early_stop",
    "early_stop_stream",
    "estimate_noise_sq",
    "make_stopping_config",
    "normal_quantile_start",
    "stop_index",
    "stream_observation",
    "two_step",
]

M0_MODES = ("explicit", "zero", "normal_quantile", "conservative")


class TruncatedStreamError(RuntimeError):
    """The coefficient stream ended before the stopping rule could halt."""


@dataclass(frozen=True)
class StoppingConfig:
    """Threshold and starting index of the residual stopping rule."""

    kappa: float
    m0: int = 0
    m0_mode: str = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "m0", int(self.m0))
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("stopping threshold must be finite and non-negative")
        if self.m0 < 0:
            raise ValueError("starting index must be non-negative")
        if self.m0_mode not in M0_MODES:
            raise ValueError(f"unknown m0 mode {self.m0_mode!r}; expected one of {M0_MODES}")


@dataclass(frozen=True)
class StopOutcome:
    """Result of a stopping run.

    ``rho`` is the index selected by the two-step rule when one ran (the
    stopped index if the rule did not stop immediately, the AIC index
    otherwise) and ``None`` for a plain stop. ``coefficients_consumed``
    counts exactly the coefficients read from the stream.
    """

    tau: int
    rho: int | None
    coefficients_consumed: int
    immediate_stop: bool


def normal_quantile_start(dim: int, level: float = 0.99) -> int:
    """Starting index ``floor(q_level * sqrt(2 * dim)) + 1`` from the normal quantile.

    Calibrated so that for pure noise with the default threshold the rule
    runs past the starting index with probability roughly ``1 - level``.
    """
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    if not 0.5 <= level < 1:
        raise ValueError("quantile level must lie in [0.5, 1)")
    q = NormalDist().inv_cdf(level)
    return int(math.floor(q * math.sqrt(2.0 * dim))) + 1


def conservative_start(dim: int) -> int:
    """Large theory-backed starting index ``floor(128 * log(dim) * sqrt(dim)) + 1``."""
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    return int(math.floor(128.0 * math.log(dim) * math.sqrt(dim))) + 1


def default_threshold(dim: int, delta: float, drift: float = 0.0) -> float:
    """Default stopping threshold ``dim * delta**2`` with an optional drift of
    ``drift * sqrt(dim) * delta**2`` to probe sensitivity."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    return (dim + drift * math.sqrt(dim)) * delta**2


def make_stopping_config(
    dim: int,
    delta: float,
    kappa: float | None = None,
    kappa_drift: float = 0.0,
    m0_mode: str = "zero",
    m0: int | None = None,
    level: float = 0.99,
) -> StoppingConfig:
    """Resolve a stopping configuration for a problem of size ``dim``."""
    if kappa is None:
        kappa = default_threshold(dim, delta, kappa_drift)
    if m0_mode == "zero":
        start = 0
    elif m0_mode == "normal_quantile":
        start = normal_quantile_start(dim, level)
    elif m0_mode == "conservative":
        start = conservative_start(dim)
    elif m0_mode == "explicit":
        if m0 is None:
            raise ValueError("explicit m0 mode requires an m0 value")
        start = int(m0)
    else:
        raise ValueError(f"unknown m0 mode {m0_mode!r}; expected one of {M0_MODES}")
    if start > dim:
        raise ValueError(f"starting index {start} exceeds dimension {dim}")
    return StoppingConfig(kappa=float(kappa), m0=start, m0_mode=m0_mode)


def stream_observation(obs: Observation) -> Iterator[tuple[int, float]]:
    """Sequential coefficient reader over an in-memory observation (1-based indices)."""
    return ((i + 1, float(v)) for i, v in enumerate(obs.y))


def early_stop_stream(
    coefficients: Iterable[tuple[int, float]],
    y_norm_sq: float,
    dim: int,
    config: StoppingConfig,
) -> StopOutcome:
    """Run the residual rule over a sequential coefficient stream.

    ``coefficients`` must yield ``(index, value)`` pairs for indices
    ``1..dim`` in order; exactly ``tau`` of them are consumed. Raises
    :class:`TruncatedStreamError` if the stream ends while the residual is
    still above the threshold and coefficients remain to be read.
    """
    if config.m0 > dim:
        raise ValueError(f"starting index {config.m0} exceeds dimension {dim}")
    if config.m0 == 0 and y_norm_sq <= config.kappa:
        return StopOutcome(tau=0, rho=None, coefficients_consumed=0, immediate_stop=True)
    running = 0.0
    reader = iter(coefficients)
    for m in range(1, dim + 1):
        try:
            idx, value = next(reader)
        except StopIteration:
            raise TruncatedStreamError(
                f"stream ended after {m - 1} coefficients; residual still above threshold"
            ) from None
        if int(idx) != m:
            raise ValueError(f"coefficient stream out of order: expected index {m}, got {idx}")
        running += float(value) * float(value)
        if m >= config.m0 and (y_norm_sq - running <= config.kappa or m == dim):
            return StopOutcome(tau=m, rho=None, coefficients_consumed=m, immediate_stop=m == config.m0)
    raise AssertionError("unreachable: residual at full dimension is zero")


def early_stop(obs: Observation, config: StoppingConfig) -> StopOutcome:
    """Residual rule over an in-memory observation."""
    return early_stop_stream(stream_observation(obs), obs.y_norm_sq, obs.dim, config)


def stop_index(y: np.ndarray, y_norm_sq: float, config: StoppingConfig) -> int:
    """Vectorised stopped index, exactly matching :func:`early_stop_stream`."""
    y = np.asarray(y, dtype=float)
    dim = y.size
    if config.m0 > dim:
        raise ValueError(f"starting index {config.m0} exceeds dimension {dim}")
    if config.m0 == 0 and y_norm_sq <= config.kappa:
        return 0
    below = (y_norm_sq - np.cumsum(y * y)) <= config.kappa
    start = max(config.m0, 1)
    hits = np.nonzero(below[start - 1 :])[0]
    return int(start + hits[0]) if hits.size else dim


def aic_select(
    obs: Observation,
    spectrum: Spectrum,
    noise: NoiseModel,
    m0: int,
    norm: str = "strong",
    penalty_multiplier: float = 1.0,
) -> int:
    """Penalised empirical-risk index over ``0..m0``; ties resolve to the smallest index.

    The strong-norm criterion is
    ``-sum_{i<=m} lam_i**-2 Y_i**2 + 2 * delta**2 * sum_{i<=m} lam_i**-2``
    and the weak-norm criterion ``-sum_{i<=m} Y_i**2 + 2 * m * delta**2``,
    both scaled by an optional penalty multiplier.
    """
    dim = require_same_dim(obs.dim, spectrum.dim)
    m0 = int(m0)
    if not 0 <= m0 <= dim:
        raise ValueError(f"selection range end {m0} outside [0, {dim}]")
    if penalty_multiplier <= 0:
        raise ValueError("penalty multiplier must be positive")
    y2 = obs.y[:m0] ** 2
    pen = 2.0 * penalty_multiplier * noise.delta**2
    if norm == "strong":
        inv2 = spectrum.values[:m0] ** -2.0
        crit = -_prefix_sums(inv2 * y2) + pen * _prefix_sums(inv2)
    elif norm == "weak":
        crit = -_prefix_sums(y2) + pen * np.arange(m0 + 1, dtype=float)
    else:
        raise ValueError(f"unknown norm {norm!r}; expected 'strong' or 'weak'")
    return int(np.argmin(crit))


def two_step(
    obs: Observation,
    spectrum: Spectrum,
    noise: NoiseModel,
    config: StoppingConfig,
    norm: str = "strong",
    penalty_multiplier: float = 1.0,
) -> tuple[StopOutcome, EstimateVector]:
    """Residual rule refined by AIC selection on an immediate stop.

    When the stop is not immediate the stopped index stands; when it is,
    the AIC index over ``0..m0`` replaces it. The selection only reuses
    coefficients the stopping pass already consumed.
    """
    outcome = early_stop(obs, config)
    if outcome.tau > config.m0:
        chosen = outcome.tau
    else:
        chosen = aic_select(obs, spectrum, noise, config.m0, norm, penalty_multiplier)
    outcome = replace(outcome, rho=chosen)
    return outcome, estimate_at(obs, spectrum, float(chosen))


def estimate_noise_sq(obs: Observation, burn_in: int) -> float:
    """Plug-in squared noise level ``R_m**2 / (dim - m)`` from a burn-in index ``m``.

    Not applied automatically anywhere; callers opt in explicitly.
    """
    dim = obs.dim
    m = int(burn_in)
    if not 0 <= m < dim:
        raise ValueError(f"burn-in index {m} outside [0, {dim})")
    head = obs.y[:m]
    return (obs.y_norm_sq - float(np.dot(head, head))) / (dim - m)
