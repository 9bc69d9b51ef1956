"""Special functions and quadrature backing the closed-form error expressions.

Everything here is a pure function; all routines are safe to call from any
number of threads.
"""

import math
from dataclasses import dataclass
from typing import Callable

from scipy.integrate import quad

__all__ = [
    "QuadratureConfig",
    "DEFAULT_QUADRATURE",
    "ConvergenceError",
    "q_function",
    "q_upper_bound",
    "ln_gamma",
    "hyp2f1",
    "chi2_pdf",
    "integrate_semiinfinite",
]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


class ConvergenceError(RuntimeError):
    """Quadrature exhausted its refinement budget without meeting tolerance.

    Attributes
    ----------
    estimate : best available value of the integral
    error_bound : estimated absolute error of ``estimate``
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and refinement budget for adaptive quadrature."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_refinements: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0.0):
            raise ValueError(f"abs_tol must be > 0, got {self.abs_tol}")
        if not (self.rel_tol > 0.0):
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_refinements < 1:
            raise ValueError(f"max_refinements must be >= 1, got {self.max_refinements}")


DEFAULT_QUADRATURE = QuadratureConfig()


def q_function(x: float) -> float:
    """Upper-tail probability of the standard normal.

    Evaluated through the complementary error function, whose libm
    implementation is a rational/continued-fraction approximation accurate to
    a few ulp; relative error is far below 1e-12 for |x| <= 8.
    """
    if not math.isfinite(x):
        raise ValueError(f"q_function requires finite x, got {x!r}")
    return 0.5 * math.erfc(x / _SQRT2)


def q_upper_bound(x: float) -> float:
    """Gaussian tail bound exp(-x^2/2) / (x*sqrt(2*pi)).

    Strictly greater than ``q_function(x)`` for every x > 0; diverges as
    x -> 0+, so it is only meaningful on the positive axis.
    """
    if not (x > 0.0):
        raise ValueError(f"q_upper_bound requires x > 0, got {x!r}")
    return math.exp(-0.5 * x * x) / (x * _SQRT2PI)


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if not (x > 0.0):
        raise ValueError(f"ln_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def chi2_pdf(x: float, n: float) -> float:
    """Chi-square density with n degrees of freedom, n > 0 and possibly non-integer.

    Density is x^(n/2-1) * exp(-x/2) / (2^(n/2) * Gamma(n/2)).  At x = 0 the
    value is the continuous limit: 0 for n > 2, 1/2 for n = 2, +inf for n < 2.
    """
    if not (n > 0.0):
        raise ValueError(f"chi2_pdf requires n > 0, got {n!r}")
    if not (x >= 0.0):
        raise ValueError(f"chi2_pdf requires x >= 0, got {x!r}")
    if x == 0.0:
        if n > 2.0:
            return 0.0
        if n == 2.0:
            return 0.5
        return math.inf
    log_pdf = (0.5 * n - 1.0) * math.log(x) - 0.5 * x \
        - 0.5 * n * math.log(2.0) - math.lgamma(0.5 * n)
    return math.exp(log_pdf)


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for z <= 0.

    Computed from the Euler integral representation

        Gamma(c) / (Gamma(b) Gamma(c-b)) *
            integral_0^1 t^(b-1) (1-t)^(c-b-1) (1-t z)^(-a) dt,

    with the endpoint-singular factors handled by weighted (QAWS) adaptive
    quadrature.  The function is symmetric in (a, b), and the representation
    is applied with whichever of the two satisfies c > b > 0.  Relative
    accuracy is ~1e-13 on the negative-z arguments exercised by the BER
    formulas (validated against a high-precision oracle in the test suite).
    """
    for name, v in (("a", a), ("b", b), ("c", c), ("z", z)):
        if not math.isfinite(v):
            raise ValueError(f"hyp2f1 requires finite {name}, got {v!r}")
    if not (z <= 0.0):
        raise ValueError(f"hyp2f1 requires z <= 0, got {z!r}")
    if not (c > b > 0.0):
        if c > a > 0.0:
            a, b = b, a
        else:
            raise ValueError(
                f"hyp2f1 requires c > b > 0 (or c > a > 0 by symmetry), got a={a}, b={b}, c={c}"
            )
    if z == 0.0:
        return 1.0
    coef = math.exp(math.lgamma(c) - math.lgamma(b) - math.lgamma(c - b))
    out = quad(
        lambda t: (1.0 - t * z) ** (-a),
        0.0,
        1.0,
        weight="alg",
        wvar=(b - 1.0, c - b - 1.0),
        epsabs=1e-16,
        epsrel=5e-14,
        limit=200,
        full_output=1,
    )
    value, abserr = out[0], out[1]
    # QAWS frequently reports a roundoff warning while already being at
    # machine precision; only escalate when the achieved error is too coarse
    # for the documented 1e-10 relative accuracy.
    if len(out) > 3 and abserr > 1e-11 * max(abs(value), 1e-300):
        raise ConvergenceError(str(out[3]), coef * value, coef * abserr)
    return coef * value


def integrate_semiinfinite(f: Callable[[float], float],
                           cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Adaptive quadrature of f over [0, inf).

    Meets max(cfg.abs_tol, cfg.rel_tol * |result|); deterministic for a fixed
    configuration.  Raises ConvergenceError (carrying the best estimate and
    its error bound) when the refinement budget is exhausted first.
    """
    out = quad(
        f,
        0.0,
        math.inf,
        epsabs=cfg.abs_tol,
        epsrel=cfg.rel_tol,
        limit=cfg.max_refinements,
        full_output=1,
    )
    value, abserr = out[0], out[1]
    if len(out) > 3:
        raise ConvergenceError(str(out[3]), value, abserr)
    return value
