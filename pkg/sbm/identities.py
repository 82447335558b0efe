"""Integral identities behind the limit laws, each with an independent quadrature."""

from __future__ import annotations

import math
from collections.abc import Callable

from scipy.integrate import quad

from models.errors import NonpositiveParameter, NonpositiveTime
from sbm.densities import QUAD_EPSABS, marginal_half_normal, skew_density

QUAD_EPSREL: float = 1e-12


def imck_identity(a: float, b: float) -> float:
    """Closed form of the integral of t^(-1/2) exp(-a t - b / t) over t > 0.

    Raises;
        NonpositiveParameter: If a <= 0 or b < 0.
    """
    if a <= 0.0 or b < 0.0:
        raise NonpositiveParameter(f"Need a > 0 and b >= 0, got a={a}, b={b}")
    return math.sqrt(math.pi / a) * math.exp(-2.0 * math.sqrt(a * b))


def imck_quadrature(a: float, b: float) -> float:
    """Adaptive quadrature of the same integral after t = w^2."""
    if a <= 0.0 or b <= 0.0:
        raise NonpositiveParameter(f"Need a > 0 and b > 0, got a={a}, b={b}")

    def integrand(w: float) -> float:
        if w == 0.0:
            return 0.0
        return 2.0 * math.exp(-a * w * w - b / (w * w))

    # the integrand peaks at w = (b / a)^(1/4)
    peak = (b / a) ** 0.25
    head, _ = quad(integrand, 0.0, peak, epsabs=QUAD_EPSABS * 1e-2, epsrel=QUAD_EPSREL, limit=200)
    tail, _ = quad(integrand, peak, math.inf, epsabs=QUAD_EPSABS * 1e-2, epsrel=QUAD_EPSREL, limit=200)
    return head + tail


def last_zero_mixture(phi: Callable[[float], float], t: float) -> float:
    """E[phi(|B_t|)] rebuilt from the last zero before t.

    The last zero g has the arcsine density 1 / (pi sqrt(s (t - s))) and, given g = s,
    |B_t| is sqrt(t - s) times a Rayleigh variable.
    """
    if t <= 0.0:
        raise NonpositiveTime(f"Time must be positive, got {t}")

    def meander(remaining: float) -> float:
        root = math.sqrt(remaining)
        value, _ = quad(lambda z: phi(z * root) * z * math.exp(-0.5 * z * z), 0.0, math.inf, epsabs=QUAD_EPSABS)
        return value

    # s = t sin^2(theta) turns the arcsine weight into d theta
    outer, _ = quad(lambda theta: meander(t * math.cos(theta) ** 2), 0.0, 0.5 * math.pi, epsabs=QUAD_EPSABS)
    return 2.0 / math.pi * outer


def half_normal_functional(phi: Callable[[float], float], t: float) -> float:
    """Integral of phi against the half-normal density at time t."""
    value, _ = quad(lambda u: phi(u) * float(marginal_half_normal(t, u)), 0.0, math.inf, epsabs=QUAD_EPSABS)
    return value


def skew_marginal_functional(phi: Callable[[float], float], alpha: float, t: float) -> float:
    """Integral of phi against p^alpha_t(0, .)."""
    density = lambda y: phi(y) * float(skew_density(alpha, t, 0.0, y))  # noqa: E731
    below, _ = quad(density, -math.inf, 0.0, epsabs=QUAD_EPSABS)
    above, _ = quad(density, 0.0, math.inf, epsabs=QUAD_EPSABS)
    return below + above


def folded_functional(phi: Callable[[float], float], alpha: float, t: float) -> float:
    """Half-normal integral of phi_hat(u) = alpha phi(u) + (1 - alpha) phi(-u)."""
    return half_normal_functional(lambda u: alpha * phi(u) + (1.0 - alpha) * phi(-u), t)
