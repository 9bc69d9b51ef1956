"""Closed-form error expressions for Alamouti 2Tx2Rx signaling and for
fixed-gain vector systems under two-component mixture noise.

The Gaussian-only curve for the 2Tx2Rx scheme comes in two independent
routes: chi-square-averaged quadrature (``ber_gaussian_integral``) and a
Gauss-hypergeometric closed form (``ber_gaussian_closed``), plus the simple
analytic upper bound (``ber_gaussian_upper``).  Mixture-noise results average
these over the 16 per-slot noise-component patterns.  All mixture formulas
assume Gaussian components; heavy-tail variants are simulation-only.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .model import BACKGROUND, IMPULSE, ChannelRealization, NoiseSpec
from .numerics import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    chi2_pdf,
    hyp2f1,
    integrate_semiinfinite,
    ln_gamma,
    q_function,
)

__all__ = [
    "MixtureStateWeight",
    "mixture_states",
    "pairwise_error_bound_fixed_channel",
    "ber_gaussian_integral",
    "ber_gaussian_closed",
    "gaussian_closed_prefactor",
    "ber_gaussian_upper",
    "alamouti_gaussian_ber",
    "alamouti_reference_spec",
    "ber_mixture",
    "ber_mixture_addends",
    "ber_mlbnr_optimal",
    "ber_mlbnr_optimal_addends",
    "ber_ml_genie_general",
    "ber_mlbnr_general",
    "ber_mls_general",
    "chi_moment_match",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class MixtureStateWeight:
    """One noise-component pattern: labels, its probability, and the
    per-sample variances it implies."""

    state_vector: tuple
    probability: float
    effective_variances: tuple


def _require_gaussian(spec) -> None:
    if spec.tail != "gaussian":
        raise ValueError(
            f"analytic mixture formulas assume Gaussian components; got tail={spec.tail!r}"
        )


def mixture_states(spec, n: int) -> list:
    """Enumerate all 2^n component patterns of n samples with their
    probabilities and per-sample variances."""
    out = []
    for pattern in itertools.product((BACKGROUND, IMPULSE), repeat=n):
        p = 1.0
        variances = []
        for s in pattern:
            if s == IMPULSE:
                p *= spec.epsilon
                variances.append(spec.sigma2_sq)
            else:
                p *= 1.0 - spec.epsilon
                variances.append(spec.sigma1_sq)
        out.append(MixtureStateWeight(pattern, p, tuple(variances)))
    return out


def pairwise_error_bound_fixed_channel(ch: ChannelRealization, e_abs: float,
                                       spec) -> float:
    """Minimum-distance pairwise error quantity for a fixed channel,
    averaged over the 16 noise-component patterns.

    The threshold is half the squared minimum distance e_abs^2 * sum|h|^2 and
    the per-pattern deviate is the |h|-weighted sum of real mixture samples;
    the simulation oracle for this quantity draws exactly that event.
    """
    _require_gaussian(spec)
    g2 = np.abs(ch.gains) ** 2
    d2_min = e_abs * e_abs * float(g2.sum())
    total = 0.0
    for w in mixture_states(spec, 4):
        if w.probability == 0.0:
            continue
        scale = math.sqrt(float(np.dot(g2, w.effective_variances)))
        total += w.probability * q_function((d2_min / 2.0) / scale)
    return total


def ber_gaussian_integral(sigma: float, n: float,
                          cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Gaussian-noise pairwise BER averaged over the chi-square distributed
    channel energy (n real dimensions), by adaptive quadrature."""
    if not (sigma > 0.0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if not (n > 0.0):
        raise ValueError(f"n must be > 0, got {n}")
    return integrate_semiinfinite(
        lambda x: 2.0 * chi2_pdf(2.0 * x, n) * q_function(math.sqrt(x) / (sigma * _SQRT2)),
        cfg,
    )


def gaussian_closed_prefactor(n: float) -> float:
    """Constant multiplying 2F1(.)/sigma in the closed-form curve:
    Gamma((n+1)/2) / (2 sqrt(pi) Gamma(n/2)).  Equals 35/64 at n = 8."""
    return math.exp(ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)) / (2.0 * _SQRT_PI)


def ber_gaussian_closed(sigma: float, n: float) -> float:
    """Closed form of ``ber_gaussian_integral`` via the Gauss hypergeometric
    function; n may be non-integer (moment-matched systems)."""
    if not (sigma > 0.0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if not (n > 0.0):
        raise ValueError(f"n must be > 0, got {n}")
    z = -1.0 / (4.0 * sigma * sigma)
    f = hyp2f1(0.5, (n + 1.0) / 2.0, 1.5, z)
    return 0.5 - gaussian_closed_prefactor(n) * f / sigma


def ber_gaussian_upper(sigma: float, n: float) -> float:
    """Analytic upper bound of the Gaussian-noise curve,
    sigma*(2 sigma)^(n-1) Gamma((n-1)/2) / (sqrt(pi) (1+4 sigma^2)^((n-1)/2) Gamma(n/2)).

    Requires n > 1 (the Gamma((n-1)/2) factor has a pole at n = 1)."""
    if not (sigma > 0.0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if not (n > 1.0):
        raise ValueError(f"n must be > 1, got {n}")
    log_value = (
        math.log(sigma)
        + (n - 1.0) * math.log(2.0 * sigma)
        + ln_gamma((n - 1.0) / 2.0)
        - 0.5 * math.log(math.pi)
        - ((n - 1.0) / 2.0) * math.log1p(4.0 * sigma * sigma)
        - ln_gamma(n / 2.0)
    )
    return math.exp(log_value)


def alamouti_gaussian_ber(variance: float) -> float:
    """Gaussian-only BER of the unit-energy BPSK 2Tx2Rx slot at per-dimension
    noise variance ``variance``.

    The closed-form family's sigma axis is parameterized for a slot with unit
    *total* transmit power (per-antenna symbol energy 1/2, the classic
    comparison reference).  The simulator transmits unit-energy symbols on
    each antenna, which is that reference with noise rescaled by 1/sqrt(2),
    hence sigma = sqrt(variance/2).
    """
    return ber_gaussian_closed(math.sqrt(variance / 2.0), 8.0)


def alamouti_reference_spec(spec) -> NoiseSpec:
    """Rescale mixture variances onto the unit-total-power reference that the
    closed-form family (and the genie background-only bound) is written in."""
    return NoiseSpec(spec.epsilon, spec.sigma1_sq / 2.0, spec.sigma2_sq / 2.0, spec.tail)


def ber_mixture_addends(spec, base: Optional[Callable[[float], float]] = None) -> list:
    """The five impulse-count addends of the mixture-noise BER: binomial
    pattern probabilities times the Gaussian-only curve at the per-slot
    averaged variance ((4-i)*sigma1_sq + i*sigma2_sq)/4."""
    _require_gaussian(spec)
    if base is None:
        base = alamouti_gaussian_ber
    e = spec.epsilon
    v1, v2 = spec.sigma1_sq, spec.sigma2_sq
    addends = []
    for i in range(5):
        coef = math.comb(4, i) * (1.0 - e) ** (4 - i) * e ** i
        if coef == 0.0:
            addends.append(0.0)
            continue
        variance = ((4 - i) * v1 + i * v2) / 4.0
        addends.append(coef * base(variance))
    return addends


def ber_mixture(spec, base: Optional[Callable[[float], float]] = None) -> float:
    """Mixture-noise BER of the least-squares decoder: the exact binomial
    regrouping of the 16-pattern average of the Gaussian-only curve at
    per-slot averaged variances (an approximation of the full per-sample
    average, exercised as such by the simulation cross-checks)."""
    return float(sum(ber_mixture_addends(spec, base)))


def ber_mlbnr_optimal_addends(spec, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> list:
    """The five addends of the genie background-only decoder bound: for i
    impulse-hit samples (i < 4) the decision rides on the remaining 8-2i real
    channel dimensions at background noise; the all-impulse pattern falls back
    to least squares over the full slot at impulse noise."""
    _require_gaussian(spec)
    e = spec.epsilon
    s1 = math.sqrt(spec.sigma1_sq)
    s2 = math.sqrt(spec.sigma2_sq)
    addends = []
    for i in range(4):
        coef = math.comb(4, i) * (1.0 - e) ** (4 - i) * e ** i
        addends.append(coef * ber_gaussian_integral(s1, 8.0 - 2.0 * i, cfg) if coef else 0.0)
    coef = e ** 4
    addends.append(coef * ber_gaussian_integral(s2, 8.0, cfg) if coef else 0.0)
    return addends


def ber_mlbnr_optimal(spec, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """BER of the genie background-only decoder (potential bound for robust
    detection)."""
    return float(sum(ber_mlbnr_optimal_addends(spec, cfg)))


def _as_difference_vector(e) -> np.ndarray:
    arr = np.asarray(e, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("difference vector must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("difference vector must be finite")
    return arr


def ber_ml_genie_general(e: Sequence[float], spec) -> float:
    """Pairwise error of genie maximum-likelihood detection for a fixed-gain
    system with symbol differences e, averaged over all component patterns:
    each pattern contributes Q(sqrt(sum e_j^2 / var_j) / 2)."""
    _require_gaussian(spec)
    arr = _as_difference_vector(e)
    total = 0.0
    for w in mixture_states(spec, arr.size):
        if w.probability == 0.0:
            continue
        arg = 0.5 * math.sqrt(float(np.sum(arr ** 2 / np.asarray(w.effective_variances))))
        total += w.probability * q_function(arg)
    return total


def ber_mlbnr_general(e: Sequence[float], spec) -> float:
    """Pairwise error of the genie background-only rule for a fixed-gain
    system: patterns with at least one background sample decide on those
    samples alone; the all-impulse pattern falls back to the full vector at
    impulse noise."""
    _require_gaussian(spec)
    arr = _as_difference_vector(e)
    s1 = math.sqrt(spec.sigma1_sq)
    s2 = math.sqrt(spec.sigma2_sq)
    total = 0.0
    for w in mixture_states(spec, arr.size):
        if w.probability == 0.0:
            continue
        keep = np.array([s == BACKGROUND for s in w.state_vector])
        if keep.any():
            arg = 0.5 * math.sqrt(float(np.sum(arr[keep] ** 2))) / s1
        else:
            arg = 0.5 * math.sqrt(float(np.sum(arr ** 2))) / s2
        total += w.probability * q_function(arg)
    return total


def ber_mls_general(e: Sequence[float], spec) -> float:
    """Pairwise error of least-squares detection for a fixed-gain system in
    mixture noise: each pattern contributes
    Q((sum e_j^2 / 2) / sqrt(sum var_j e_j^2))."""
    _require_gaussian(spec)
    arr = _as_difference_vector(e)
    half_energy = 0.5 * float(np.sum(arr ** 2))
    total = 0.0
    for w in mixture_states(spec, arr.size):
        if w.probability == 0.0:
            continue
        scale = math.sqrt(float(np.sum(np.asarray(w.effective_variances) * arr ** 2)))
        total += w.probability * q_function(half_energy / scale)
    return total


def chi_moment_match(mean: float, variance: float):
    """Scaled chi-square matching a given mean and variance: returns (a, n)
    such that chi2(n)/a has exactly those first two moments
    (a = 2*mean/variance, n = 2*mean^2/variance; n may be non-integer)."""
    if not (mean > 0.0):
        raise ValueError(f"mean must be > 0, got {mean}")
    if not (variance > 0.0):
        raise ValueError(f"variance must be > 0, got {variance}")
    return 2.0 * mean / variance, 2.0 * mean * mean / variance
