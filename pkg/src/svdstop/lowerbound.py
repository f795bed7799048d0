"""Lower-bound laboratory: adversarial constructions and empirical stress tests.

The estimation-theoretic floor for data-driven truncation rests on a
two-point argument: perturb the signal beyond an index the rule cannot
see past, and the risk at the perturbed signal stays above the squared
bias there. This module builds those perturbed signals, evaluates the
total-variation and tail bounds the argument runs on, and provides
Monte Carlo checks that pit concrete stopping rules against the
predicted floors. All numeric constants in the predicates are kept
exactly as in the underlying inequalities; none of them is optimised.

Everything here is either a pure construction, a closed-form bound, or
a simulation with reported standard errors; no asymptotic statement is
checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import logsumexp
from scipy.stats import chi2, poisson

from .estimator import estimate_at, strong_bias_sq, strong_variance, weak_bias_sq
from .model import (
    NoiseModel,
    Observation,
    Signal,
    Spectrum,
    make_polynomial_spectrum,
    replication_seed,
    require_same_dim,
    simulate_observation,
)
from .oracles import oracle_set

__all__ = [
    "AccuracyError",
    "AdversaryResult",
    "GapReport",
    "OverrunReport",
    "SIMPLIFIED_NORM_THRESHOLD",
    "TailReport",
    "TvBoundResult",
    "adaptation_ceiling",
    "adversary_conditions",
    "hide_signal",
    "laurent_massart_tails",
    "overrun_check",
    "residual_adversary",
    "tv_bound",
    "tv_numeric",
    "weak_oracle_gap_instance",
]

# Below this value of |theta| + |theta_bar| the simplified total-variation
# bound is not valid; the exact constant is sqrt(8)*e / (2*pi - sqrt(pi)*e).
SIMPLIFIED_NORM_THRESHOLD = math.sqrt(8.0) * math.e / (2.0 * math.pi - math.sqrt(math.pi) * math.e)

_POISSON_TAIL = 1e-13
_QUADRATURE_TOL = 1e-6


class AccuracyError(RuntimeError):
    """A numeric routine missed its accuracy target; carries the estimate reached."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class AdversaryResult:
    """A perturbed signal together with the predicate record and risk floor.

    ``conditions_met`` maps predicate names to booleans; the residual-rule
    adversary fills ``prefix_equal``, ``weak_bias_close`` and
    ``weak_bias_large``, the frequency-rule one only ``prefix_equal``.
    """

    mu_bar: Signal
    i0: int
    conditions_met: Mapping[str, bool]
    predicted_floor: float

    def as_record(self) -> dict:
        return {
            "i0": self.i0,
            "conditions_met": dict(self.conditions_met),
            "predicted_floor": self.predicted_floor,
            "mu_bar": [float(v) for v in self.mu_bar.coefficients],
        }


@dataclass(frozen=True)
class TvBoundResult:
    """Total-variation bounds for a pair of noncentral chi-square laws.

    ``bound_simplified`` is ``None`` whenever the sum of the two
    noncentrality norms falls below :data:`SIMPLIFIED_NORM_THRESHOLD`.
    Bounds are reported as computed, even when vacuous (above one).
    """

    bound_general: float
    bound_simplified: float | None = None
    tv_numeric: float | None = None

    def __post_init__(self):
        if self.bound_general < 0:
            raise ValueError("general bound must be nonnegative")
        if self.bound_simplified is not None and self.bound_simplified < 0:
            raise ValueError("simplified bound must be nonnegative")
        if self.tv_numeric is not None and not 0.0 <= self.tv_numeric <= 1.0:
            raise ValueError("numeric total variation must lie in [0, 1]")

    def as_record(self) -> dict:
        return {
            "bound_general": self.bound_general,
            "bound_simplified": self.bound_simplified,
            "tv_numeric": self.tv_numeric,
        }


def _check_i0(i0: int, dim: int) -> int:
    i0 = int(i0)
    if not 1 <= i0 <= dim - 1:
        raise ValueError(f"perturbation index {i0} outside [1, {dim - 1}]")
    return i0


def hide_signal(mu: Signal, i0: int, alpha: float, r_bar: float) -> AdversaryResult:
    """Replace coordinate ``i0 + 1`` by half the smoothness budget there.

    The perturbed signal agrees with ``mu`` up to ``i0`` and carries
    ``r_bar / 2 * (i0 + 1)**-alpha`` at position ``i0 + 1`` (one-based),
    which keeps it inside the smoothness ball of radius ``r_bar`` as soon
    as ``mu`` lies in the ball of radius ``r_bar / 2``. Any rule whose
    risk at ``mu`` is comparable to the balanced-oracle risk keeps at
    least a third of the remaining squared bias as risk at the perturbed
    signal, provided ``i0`` is taken three comparability factors past the
    discrete balanced oracle.
    """
    if alpha < 0:
        raise ValueError("smoothness exponent must be nonnegative")
    if r_bar <= 0:
        raise ValueError("smoothness radius must be positive")
    i0 = _check_i0(i0, mu.dim)
    values = np.array(mu.coefficients)
    values[i0] = 0.5 * r_bar * float(i0 + 1) ** (-alpha)
    mu_bar = Signal(values)
    floor = strong_bias_sq(mu_bar, float(i0)) / 3.0
    return AdversaryResult(
        mu_bar=mu_bar,
        i0=i0,
        conditions_met={"prefix_equal": bool(np.array_equal(mu.coefficients[:i0], values[:i0]))},
        predicted_floor=floor,
    )


def adversary_conditions(
    mu: Signal,
    mu_bar: Signal,
    spectrum: Spectrum,
    noise: NoiseModel,
    i0: int,
) -> dict[str, bool]:
    """Evaluate the residual-rule adversary predicates for a signal pair.

    ``prefix_equal``: the signals agree on every coordinate up to ``i0``.
    ``weak_bias_close``: the weak squared biases at ``i0`` differ by at
    most ``0.05 * sqrt(D - i0) / 2 * delta**2``.
    ``weak_bias_large``: the weak bias norms at ``i0`` sum to at least
    ``5.25 * delta``.
    """
    dim = require_same_dim(mu.dim, mu_bar.dim)
    require_same_dim(dim, spectrum.dim)
    i0 = _check_i0(i0, dim)
    wb_mu = weak_bias_sq(mu, spectrum, float(i0))
    wb_bar = weak_bias_sq(mu_bar, spectrum, float(i0))
    delta_sq = noise.delta**2
    return {
        "prefix_equal": bool(np.array_equal(mu.coefficients[:i0], mu_bar.coefficients[:i0])),
        "weak_bias_close": abs(wb_bar - wb_mu) <= 0.05 * math.sqrt(dim - i0) / 2.0 * delta_sq,
        "weak_bias_large": math.sqrt(wb_mu) + math.sqrt(wb_bar) >= 5.25 * noise.delta,
    }


def residual_adversary(
    mu: Signal,
    spectrum: Spectrum,
    noise: NoiseModel,
    i0: int,
    alpha: float,
    r_bar: float,
) -> AdversaryResult:
    """Enlarge coordinate ``i0 + 1`` in quadrature by the smoothness budget.

    The perturbed coordinate satisfies ``mu_bar**2 = mu**2 +
    r_bar**2 / 4 * (i0 + 1)**(-2 alpha)`` (sign kept), the construction
    under which a residual-based rule with risk comparable to the
    balanced oracle at ``mu`` retains at least ``0.05`` of the squared
    bias at ``i0`` as risk at the perturbed signal, whenever the three
    reported conditions hold and ``i0`` lies at least 400 comparability
    factors past the discrete balanced oracle.
    """
    if alpha < 0:
        raise ValueError("smoothness exponent must be nonnegative")
    if r_bar <= 0:
        raise ValueError("smoothness radius must be positive")
    dim = require_same_dim(mu.dim, spectrum.dim)
    i0 = _check_i0(i0, dim)
    values = np.array(mu.coefficients)
    bump = 0.25 * r_bar**2 * float(i0 + 1) ** (-2.0 * alpha)
    values[i0] = math.copysign(math.sqrt(values[i0] ** 2 + bump), values[i0] if values[i0] else 1.0)
    mu_bar = Signal(values)
    return AdversaryResult(
        mu_bar=mu_bar,
        i0=i0,
        conditions_met=adversary_conditions(mu, mu_bar, spectrum, noise, i0),
        predicted_floor=0.05 * strong_bias_sq(mu_bar, float(i0)),
    )


def tv_bound(theta_norm: float, theta_bar_norm: float, num_terms: int) -> TvBoundResult:
    """Closed-form total-variation bounds for noncentral chi-square laws.

    The laws compared are those of ``sum_{k<=K} (theta_k + Z_k)**2`` for
    standard Gaussian ``Z`` and two mean vectors, which depend on the
    means only through their norms. The general bound is
    ``e * (|a**2 - b**2| + sqrt(8/pi) * |a - b|) / sqrt(pi * K)`` and the
    simplified one ``2 * |a**2 - b**2| / sqrt(K)``, valid once
    ``a + b >= SIMPLIFIED_NORM_THRESHOLD``.
    """
    if num_terms < 1:
        raise ValueError("the laws need at least one summand")
    a, b = float(theta_norm), float(theta_bar_norm)
    if a < 0 or b < 0:
        raise ValueError("noncentrality norms must be nonnegative")
    diff_sq = abs(a**2 - b**2)
    general = math.e * (diff_sq + math.sqrt(8.0 / math.pi) * abs(a - b)) / math.sqrt(math.pi * num_terms)
    simplified = None
    if a + b >= SIMPLIFIED_NORM_THRESHOLD:
        simplified = 2.0 * diff_sq / math.sqrt(num_terms)
    return TvBoundResult(bound_general=general, bound_simplified=simplified)


def _mixture_terms(num_terms: int, noncentrality: float) -> tuple[np.ndarray, np.ndarray]:
    """Poisson weights and central chi-square degrees for a noncentral law."""
    half = 0.5 * noncentrality
    if half <= 0.0:
        return np.array([0.0]), np.array([float(num_terms)])
    count = int(poisson.isf(_POISSON_TAIL, half)) + 2
    js = np.arange(count + 1)
    log_w = poisson.logpmf(js, half)
    return log_w, num_terms + 2.0 * js


def _mixture_logpdf(x: np.ndarray, log_w: np.ndarray, dfs: np.ndarray) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    terms = log_w[None, :] + chi2.logpdf(x[:, None], dfs[None, :])
    return logsumexp(terms, axis=1)


def _mixture_cdf(x: float, log_w: np.ndarray, dfs: np.ndarray) -> float:
    return float(np.exp(log_w) @ chi2.cdf(x, dfs))


def tv_numeric(theta_norm: float, theta_bar_norm: float, num_terms: int) -> float:
    """Numeric total variation between two noncentral chi-square laws.

    The densities are evaluated as Poisson mixtures of central
    chi-square densities with the weight tail truncated below 1e-13.
    The distance is computed twice: once through the single sign change
    of the density difference (the likelihood ratio is monotone, so the
    distance is a difference of distribution functions at the crossing)
    and once by composite Gauss-Legendre quadrature of the absolute
    density difference, with a square-root substitution taming the
    origin singularity for one degree of freedom. Raises
    :class:`AccuracyError` when the two routes disagree by more than
    1e-6; otherwise the crossing-based value is returned.
    """
    if num_terms < 1:
        raise ValueError("the laws need at least one summand")
    a, b = float(theta_norm), float(theta_bar_norm)
    if a < 0 or b < 0:
        raise ValueError("noncentrality norms must be nonnegative")
    # order so that f is the law with the larger noncentrality
    nu_f, nu_g = max(a, b) ** 2, min(a, b) ** 2
    if nu_f - nu_g <= 1e-12 * (1.0 + nu_f):
        # the densities agree beyond quadrature resolution; the exact
        # distance is bounded by the general closed form, itself tiny here
        return 0.0
    log_w_f, dfs_f = _mixture_terms(num_terms, nu_f)
    log_w_g, dfs_g = _mixture_terms(num_terms, nu_g)

    def log_ratio(x: float) -> float:
        return float(_mixture_logpdf(x, log_w_f, dfs_f)[0] - _mixture_logpdf(x, log_w_g, dfs_g)[0])

    # the ratio is increasing in x, negative near 0 and positive far out
    lo = 1e-8
    while log_ratio(lo) >= 0.0 and lo > 1e-250:
        lo *= 1e-4
    hi = num_terms + nu_f + 30.0 * math.sqrt(2.0 * num_terms + 4.0 * nu_f) + 30.0
    while log_ratio(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise AccuracyError("no density crossing found", estimate=math.nan)
    crossing = float(brentq(log_ratio, lo, hi, xtol=1e-12, rtol=8.9e-16))
    from_cdf = _mixture_cdf(crossing, log_w_g, dfs_g) - _mixture_cdf(crossing, log_w_f, dfs_f)

    def abs_diff(x: np.ndarray) -> np.ndarray:
        return np.abs(
            np.exp(_mixture_logpdf(x, log_w_f, dfs_f)) - np.exp(_mixture_logpdf(x, log_w_g, dfs_g))
        )

    upper = num_terms + nu_f + 40.0 * math.sqrt(2.0 * num_terms + 4.0 * nu_f) + 60.0
    while 2.0 - _mixture_cdf(upper, log_w_f, dfs_f) - _mixture_cdf(upper, log_w_g, dfs_g) > 1e-10:
        upper *= 1.5
    from_quadrature = 0.5 * _integrate_abs_diff(abs_diff, crossing, upper)

    if abs(from_cdf - from_quadrature) > _QUADRATURE_TOL:
        raise AccuracyError(
            f"quadrature routes disagree: {from_cdf:.9g} vs {from_quadrature:.9g}",
            estimate=from_cdf,
        )
    return min(max(from_cdf, 0.0), 1.0)


def _integrate_abs_diff(abs_diff, crossing: float, upper: float) -> float:
    """Integrate ``abs_diff`` over [0, upper] with nodes clustered sensibly.

    The grid splits at the density crossing (the only kink of the
    integrand) and the initial segment is mapped through ``x = u**2`` so
    an integrable origin singularity costs no accuracy.
    """
    nodes20, weights20 = leggauss(20)
    nodes64, weights64 = leggauss(64)

    def panel(f, left: float, right: float, nodes, weights) -> float:
        mid, half = 0.5 * (left + right), 0.5 * (right - left)
        return half * float(weights @ f(mid + half * nodes))

    head_end = min(1.0, crossing if crossing > 0 else 1.0, upper / 10.0)
    total = panel(lambda u: abs_diff(u**2) * 2.0 * u, 0.0, math.sqrt(head_end), nodes64, weights64)
    boundaries = [head_end]
    if head_end < crossing < upper:
        boundaries.extend(np.linspace(head_end, crossing, 40)[1:])
    tail_start = boundaries[-1]
    boundaries.extend(np.linspace(tail_start, upper, 200)[1:])
    for left, right in zip(boundaries[:-1], boundaries[1:]):
        total += panel(abs_diff, left, right, nodes20, weights20)
    return total


@dataclass(frozen=True)
class TailReport:
    """Empirical frequencies of weighted chi-square deviation events."""

    x: float
    bound: float
    lower_frequency: float
    lower_se: float
    upper_frequency: float
    upper_se: float
    replications: int

    def as_record(self) -> dict:
        return {
            "x": self.x,
            "bound": self.bound,
            "lower_frequency": self.lower_frequency,
            "lower_se": self.lower_se,
            "upper_frequency": self.upper_frequency,
            "upper_se": self.upper_se,
            "replications": self.replications,
        }


def laurent_massart_tails(
    weights: np.ndarray,
    x: float,
    replications: int = 100000,
    seed: int = 0,
) -> TailReport:
    """Monte Carlo check of the weighted chi-square deviation bounds.

    For nonnegative weights ``a`` and standard Gaussians ``eps``, the
    events ``sum a_i (eps_i**2 - 1) < -2 |a| sqrt(x)`` and
    ``sum a_i (eps_i**2 - 1) > 2 |a| sqrt(x) + 2 max(a) x`` each have
    probability below ``exp(-x)``. The report carries the empirical
    frequencies with binomial standard errors.
    """
    a = np.asarray(weights, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("weights must form a nonempty vector")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("weights must be finite and nonnegative")
    if x <= 0:
        raise ValueError("deviation level must be positive")
    if replications < 1:
        raise ValueError("need at least one replication")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))
    norm_a = float(np.linalg.norm(a))
    max_a = float(np.max(a))
    lower_thr = -2.0 * norm_a * math.sqrt(x)
    upper_thr = 2.0 * norm_a * math.sqrt(x) + 2.0 * max_a * x
    lower_hits = 0
    upper_hits = 0
    done = 0
    block = 200000 // max(a.size, 1) + 1
    while done < replications:
        take = min(block, replications - done)
        sums = (rng.standard_normal((take, a.size)) ** 2 - 1.0) @ a
        lower_hits += int(np.count_nonzero(sums < lower_thr))
        upper_hits += int(np.count_nonzero(sums > upper_thr))
        done += take
    p_lo = lower_hits / replications
    p_up = upper_hits / replications
    return TailReport(
        x=float(x),
        bound=math.exp(-x),
        lower_frequency=p_lo,
        lower_se=math.sqrt(p_lo * (1.0 - p_lo) / replications),
        upper_frequency=p_up,
        upper_se=math.sqrt(p_up * (1.0 - p_up) / replications),
        replications=replications,
    )


@dataclass(frozen=True)
class OverrunReport:
    """Monte Carlo check that large variance forces early stopping.

    When ``V_m`` is at least 200 times the squared risk of the rule, the
    probability of running to ``m`` or beyond is at most 0.9. The
    premise is evaluated at the estimated risk; ``implication_ok`` is
    ``None`` when the premise fails and otherwise records whether the
    overrun probability stays below 0.9 within three standard errors.
    """

    m: int
    variance_at_m: float
    risk_sq_estimate: float
    risk_sq_se: float
    premise_holds: bool
    overrun_probability: float
    overrun_se: float
    implication_ok: bool | None
    replications: int

    def as_record(self) -> dict:
        return {
            "m": self.m,
            "variance_at_m": self.variance_at_m,
            "risk_sq_estimate": self.risk_sq_estimate,
            "risk_sq_se": self.risk_sq_se,
            "premise_holds": self.premise_holds,
            "overrun_probability": self.overrun_probability,
            "overrun_se": self.overrun_se,
            "implication_ok": self.implication_ok,
            "replications": self.replications,
        }


def overrun_check(
    rule: Callable[[Observation], int],
    mu: Signal,
    spectrum: Spectrum,
    noise: NoiseModel,
    m: int,
    replications: int = 1000,
    seed: int = 0,
) -> OverrunReport:
    """Stress-test an arbitrary data-dependent index against the overrun bound.

    ``rule`` maps an observation to an index in ``0..D``. The squared
    risk of the rule at ``mu`` and the probability of stopping at or
    beyond ``m`` are both estimated from the same replications.
    """
    dim = require_same_dim(mu.dim, spectrum.dim)
    m = int(m)
    if not 1 <= m <= dim:
        raise ValueError(f"index {m} outside [1, {dim}]")
    if replications < 2:
        raise ValueError("need at least two replications")
    errors = np.empty(replications)
    overruns = np.empty(replications, dtype=bool)
    target = np.asarray(mu.coefficients)
    for rep in range(replications):
        obs = simulate_observation(mu, spectrum, noise, replication_seed(seed, rep))
        index = int(rule(obs))
        if not 0 <= index <= dim:
            raise ValueError(f"rule returned index {index} outside [0, {dim}]")
        diff = estimate_at(obs, spectrum, float(index)).values - target
        errors[rep] = float(np.dot(diff, diff))
        overruns[rep] = index >= m
    risk_sq = float(np.mean(errors))
    risk_se = float(np.std(errors, ddof=1) / math.sqrt(replications))
    p_over = float(np.mean(overruns))
    p_se = math.sqrt(p_over * (1.0 - p_over) / replications)
    v_m = strong_variance(spectrum, noise, float(m))
    premise = v_m >= 200.0 * risk_sq
    return OverrunReport(
        m=m,
        variance_at_m=v_m,
        risk_sq_estimate=risk_sq,
        risk_sq_se=risk_se,
        premise_holds=premise,
        overrun_probability=p_over,
        overrun_se=p_se,
        implication_ok=(p_over <= 0.9 + 3.0 * p_se) if premise else None,
        replications=replications,
    )


def adaptation_ceiling(dim: int, delta: float, p: float) -> float:
    """Largest smoothness exponent that admits adaptation, given the setup.

    Returns ``log(delta**-2) / log(dim) - p - 1/2``; above this exponent
    the minimax truncation level would have to exceed the dimension.
    """
    if dim <= 1:
        raise ValueError("dimension must exceed 1")
    if delta <= 0:
        raise ValueError("noise level must be positive")
    if p < 0:
        raise ValueError("decay exponent must be nonnegative")
    return math.log(delta**-2.0) / math.log(dim) - p - 0.5


@dataclass(frozen=True)
class GapReport:
    """A concrete instance where the weak oracle loses a factor in strong norm.

    For a signal concentrated on the last coordinate with the strongly
    balanced level at ``D - 3/4``, the strong bias at the weak-norm
    proxy level is four times the strong bias at the strongly balanced
    level, so the factor in the bias transfer bound is genuinely paid.
    """

    feasible: bool
    reason: str | None
    p: float
    dim: int
    delta: float
    mu_last: float
    strong_time: float | None = None
    proxy_time: float | None = None
    weak_time: float | None = None
    bias_ratio: float | None = None

    def as_record(self) -> dict:
        return {
            "feasible": self.feasible,
            "reason": self.reason,
            "p": self.p,
            "dim": self.dim,
            "delta": self.delta,
            "mu_last": self.mu_last,
            "strong_time": self.strong_time,
            "proxy_time": self.proxy_time,
            "weak_time": self.weak_time,
            "bias_ratio": self.bias_ratio,
        }


def weak_oracle_gap_instance(p: float, dim: int) -> GapReport:
    """Search for the signal that pins the bias transfer factor at four.

    With ``lambda_i = i**-p`` and the default threshold, the signal puts
    everything on the last coordinate, sized so the strong bias and
    variance balance at ``D - 3/4``. The construction is feasible (the
    weak balanced level stays at most ``D - 1``) for ``p > 3/2`` and
    ``dim`` large enough; infeasibility is reported, not raised. The
    noise level is set to one; the instance is scale-invariant.
    """
    if dim < 3:
        return GapReport(feasible=False, reason="dimension too small", p=p, dim=dim, delta=1.0, mu_last=0.0)
    spectrum = make_polynomial_spectrum(dim, p)
    delta = 1.0
    inv_sq = spectrum.values**-2.0
    # strong bias equals variance at D - 3/4: mu_D**2 / 4 = V_{D - 3/4}
    mu_last_sq = inv_sq[-1] + 4.0 * float(np.sum(inv_sq[:-1]))
    mu_last = math.sqrt(mu_last_sq)
    if spectrum.values[-1] ** 2 * mu_last_sq > delta**2 * (dim - 1):
        return GapReport(
            feasible=False,
            reason="weak balanced level would exceed dimension minus one",
            p=p,
            dim=dim,
            delta=delta,
            mu_last=mu_last,
        )
    values = np.zeros(dim)
    values[-1] = mu_last
    signal = Signal(values)
    noise = NoiseModel(delta=delta)
    oracles = oracle_set(signal, spectrum, noise, kappa=dim * delta**2, m0=0)
    ratio = strong_bias_sq(signal, oracles.proxy_time) / strong_bias_sq(signal, oracles.strong_time)
    if strong_bias_sq(signal, oracles.proxy_time) < 4.0 * strong_bias_sq(signal, oracles.strong_time) - 1e-9:
        raise RuntimeError(f"constructed instance misses the factor four: ratio {ratio}")
    return GapReport(
        feasible=True,
        reason=None,
        p=p,
        dim=dim,
        delta=delta,
        mu_last=mu_last,
        strong_time=oracles.strong_time,
        proxy_time=oracles.proxy_time,
        weak_time=oracles.weak_time,
        bias_ratio=ratio,
    )
