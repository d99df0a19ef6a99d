"""Bessel K, Gauss 2F1 and elementary symmetric polynomials.

Only what the closed-form normalizing constants need. Everything is real
valued; large gamma ratios are left to callers working in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure, SeriesDiverged, TermCapExceeded, UnsupportedOrder


@dataclass(frozen=True)
class SeriesControl:
    """Truncation tolerance and term cap for series and quadrature."""

    rel_tol: float = 1e-14
    max_terms: int = 100_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


DEFAULT_CONTROL = SeriesControl()

# polynomial in 1/z multiplying sqrt(pi/(2z)) e^{-z}
_HALF_ORDER_POLY = {
    0.5: (1.0,),
    1.5: (1.0, 1.0),
    2.5: (1.0, 3.0, 3.0),
}


def bessel_k(lam: float, z: float) -> float:
    """Modified Bessel function of the third kind for ``lam`` in {1/2, 3/2, 5/2}.

    Negative orders are folded with ``K_{-lam} = K_lam``.
    """
    key = abs(float(lam))
    if key not in _HALF_ORDER_POLY:
        raise UnsupportedOrder(f"no closed form for order {lam}; use bessel_k_integral")
    if not z > 0:
        raise ValueError("z must be positive")
    w = 1.0 / z
    poly = sum(c * w**k for k, c in enumerate(_HALF_ORDER_POLY[key]))
    return math.sqrt(math.pi / (2.0 * z)) * math.exp(-z) * poly


def _log_integrand(t, lam, z):
    # u = e^t in the integral definition; shifted by +z so the peak is O(1)
    return 2.0 * lam * t - z * (np.cosh(2.0 * t) - 1.0)


def bessel_k_integral(
    lam: float,
    z: float,
    ctrl: SeriesControl | None = None,
    scaled: bool = False,
) -> float:
    """``K_lam(z)`` by quadrature of ``int_0^inf u^{2 lam - 1} exp(-z (u^2 + u^-2) / 2) du``.

    With ``u = e^t`` the integrand becomes ``exp(2 lam t - z cosh 2t)``, which
    decays doubly exponentially; the range is cut where it drops below
    ``rel_tol`` times its peak (times a safety factor).

    Parameters
    ----------
    scaled
        Return ``e^z K_lam(z)``, which stays representable for large ``z``.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    if not z > 0:
        raise ValueError("z must be positive")
    lam = float(lam)
    t_peak = 0.5 * math.asinh(lam / z)
    log_peak = _log_integrand(t_peak, lam, z)
    cut = log_peak + math.log(ctrl.rel_tol) - 10.0

    def edge(direction):
        step = 0.25
        t = t_peak
        while _log_integrand(t + direction * step, lam, z) > cut:
            t += direction * step
            step *= 1.5
        return t + direction * step

    lo, hi = edge(-1.0), edge(1.0)
    epsrel = max(ctrl.rel_tol, 1e-13)
    f = lambda t: math.exp(_log_integrand(t, lam, z) - log_peak)
    val, err = integrate.quad(f, lo, hi, points=[t_peak], epsabs=0.0, epsrel=epsrel, limit=500)
    if not np.isfinite(val) or val <= 0 or err > max(1e-9, 100 * epsrel) * val:
        raise QuadratureFailure(f"K_{lam}({z}): estimate {val} with error {err}")
    log_val = math.log(val) + log_peak
    if not scaled:
        log_val -= z
    return math.exp(log_val)


def log_bessel_k(lam: float, z: float, ctrl: SeriesControl | None = None) -> float:
    """``log K_lam(z)``; closed form when available, quadrature otherwise."""
    if abs(float(lam)) in _HALF_ORDER_POLY:
        w = 1.0 / z
        poly = sum(c * w**k for k, c in enumerate(_HALF_ORDER_POLY[abs(float(lam))]))
        return 0.5 * math.log(math.pi / (2.0 * z)) - z + math.log(poly)
    return math.log(bessel_k_integral(lam, z, ctrl, scaled=True)) - z


def gauss_2f1(a: float, b: float, c: float, z: float, ctrl: SeriesControl | None = None) -> float:
    """Gauss hypergeometric function by direct summation, ``|z| < 1``.

    Stops once a term is below ``rel_tol`` of the partial sum and the term
    ratio has dropped below one, so the tail is bounded by a geometric series.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    if abs(z) >= 1.0:
        raise SeriesDiverged(f"|z| = {abs(z)} >= 1")
    if c <= 0 and float(c).is_integer():
        raise ValueError(f"c = {c} is a nonpositive integer")
    total = 1.0
    term = 1.0
    for k in range(ctrl.max_terms):
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        term *= ratio
        total += term
        if term == 0.0:
            return total
        if abs(term) < ctrl.rel_tol * abs(total) and abs(ratio) < 1.0:
            return total
    raise TermCapExceeded(f"2F1({a}, {b}; {c}; {z}) not converged in {ctrl.max_terms} terms")


def gauss_2f1_derivative(
    a: float, b: float, c: float, z: float, ctrl: SeriesControl | None = None
) -> float:
    """``d/dz 2F1(a, b; c; z) = (a b / c) 2F1(a+1, b+1; c+1; z)``."""
    if a == 0 or b == 0:
        return 0.0
    return a * b / c * gauss_2f1(a + 1, b + 1, c + 1, z, ctrl)


def elementary_symmetric(values: Sequence[float]) -> np.ndarray:
    """``sigma_0 .. sigma_m`` of ``values`` via ``e_k <- e_k + x e_{k-1}``."""
    vals = np.asarray(values, dtype=float).ravel()
    e = np.zeros(vals.size + 1)
    e[0] = 1.0
    for n, x in enumerate(vals, start=1):
        e[1 : n + 1] += x * e[0:n].copy()
    return e
