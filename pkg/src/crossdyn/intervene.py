"""Asymmetric-intervention analysis on a landscape.

Tilting the energy by a linear term, G(x) = F(x) + c x, makes one
attractor preferred. Two quantities summarise the intervention: the
relative extra force it applies compared to all forces already acting
(the velocity-change ratio r), and the equilibrium fraction of the
population left of a threshold under the tilted Boltzmann weight
exp(-G).
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import NegativeRadicand

_QUAD_LIMIT = 400
_RADICAND_TOL = -1e-12


def _landau_support(a, b, tail_ratio=1e-12):
    """Truncation cut where exp(a x^2 - b x^4) falls to tail_ratio * peak."""
    peak = a * a / (4.0 * b) if a > 0 else 0.0
    target = peak + np.log(tail_ratio)
    x2 = (a + np.sqrt(a * a - 4.0 * b * target)) / (2.0 * b)
    return float(np.sqrt(x2))


def _effort_squared(pdf, df_dx, c, t, sigma, lo, hi, epsabs=1e-12, epsrel=1e-10):
    """Population-averaged relative squared velocity change of the tilt.

    Integrand: p(x) (2 c dF/dx + c^2) / ((dF/dx)^2 + sigma^2 / t). The
    numerator is the second-moment difference of the tilted and untilted
    displacement processes; the t-scaling has been folded in so only
    sigma^2 / t remains.
    """
    noise_term = sigma * sigma / t

    def integrand(x):
        slope = df_dx(x)
        return pdf(x) * (2.0 * c * slope + c * c) / (slope * slope + noise_term)

    value, _ = quad(integrand, lo, hi, limit=_QUAD_LIMIT, epsabs=epsabs, epsrel=epsrel)
    return value


def relative_effort(a, b, c, t, sigma, epsrel=1e-10):
    """Relative intervention effort r(c) for the quartic ground truth.

    r is the square root of the population-averaged relative change in
    squared displacement caused by tilting F = -a x^2 + b x^4 to F + c x,
    over a horizon t with noise sigma. r(0) = 0; in the noise-dominated
    regime r scales like sqrt(t) / sigma.

    Raises
    ------
    NegativeRadicand
        If the quadrature result is below -1e-12 (values in [-1e-12, 0]
        clamp to zero).
    """
    if not b > 0.0:
        raise ValueError(f"b must be positive for a normalisable density, got {b}")
    if not (t > 0.0 and sigma > 0.0):
        raise ValueError(f"t and sigma must be positive, got t={t}, sigma={sigma}")
    if c == 0.0:
        return 0.0
    cut = _landau_support(a, b)
    z, _ = quad(lambda x: np.exp(a * x * x - b * x**4), -cut, cut, limit=_QUAD_LIMIT)

    def pdf(x):
        return np.exp(a * x * x - b * x**4) / z

    def df_dx(x):
        return -2.0 * a * x + 4.0 * b * x**3

    r2 = _effort_squared(pdf, df_dx, c, t, sigma, -cut, cut, epsrel=epsrel)
    return _sqrt_clamped(r2)


def relative_effort_model(model, c, t, lo=None, hi=None, epsrel=1e-10):
    """r(c) for a fitted model: same integral with the KDE density and slope."""
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    if c == 0.0:
        return 0.0
    density = model.landscape.density
    if lo is None or hi is None:
        base_lo, base_hi = model.data_range()
        pad = 8.0 * density.bandwidth
        lo = base_lo - pad if lo is None else lo
        hi = base_hi + pad if hi is None else hi

    def df_dx(x):
        return -float(density.log_pdf_derivative(x))

    r2 = _effort_squared(
        lambda x: float(density.pdf(x)), df_dx, c, t, model.sigma, lo, hi, epsrel=epsrel
    )
    return _sqrt_clamped(r2)


def _sqrt_clamped(r2):
    if r2 < _RADICAND_TOL:
        raise NegativeRadicand(f"squared effort {r2:.3e} below tolerance; quadrature failed")
    return float(np.sqrt(max(r2, 0.0)))


def occupancy_fraction(a, b, c, threshold=0.0, epsrel=1e-10):
    """Equilibrium mass below ``threshold`` under the tilted energy.

    Integrates exp(-G) = exp(a x^2 - b x^4 - c x) by adaptive quadrature
    over the tail-truncated support and returns the left-of-threshold
    fraction. c = 0 with threshold 0 gives exactly 1/2 by symmetry.
    """
    if not b > 0.0:
        raise ValueError(f"b must be positive for a normalisable weight, got {b}")

    def log_weight(x):
        return a * x * x - b * x**4 - c * x

    def weight(x):
        return np.exp(log_weight(x))

    # Extend the untilted cut until both tails are 1e-12 of the tilted peak.
    cut = _landau_support(a, b)
    peak = float(np.max(log_weight(np.linspace(-cut, cut, 2001))))
    floor = peak + np.log(1e-12)
    while log_weight(-cut) > floor or log_weight(cut) > floor:
        cut *= 1.25

    lo, hi = -cut, cut
    threshold = float(np.clip(threshold, lo, hi))
    left, _ = quad(weight, lo, threshold, limit=_QUAD_LIMIT, epsrel=epsrel)
    right, _ = quad(weight, threshold, hi, limit=_QUAD_LIMIT, epsrel=epsrel)
    return left / (left + right)


@dataclass(frozen=True)
class TiltedLandscape:
    """Landscape with energy G(x) = F(x) + c x and force force(x) - c.

    Exposes the same energy/force/data_range surface as
    :class:`~crossdyn.landscape.EnergyLandscape`, so feature finding and
    simulation work on it unchanged.
    """

    base: object
    c: float

    def energy(self, x):
        return self.base.energy(x) + self.c * x

    def force(self, x):
        return self.base.force(x) - self.c

    def data_range(self):
        return self.base.data_range()

    @property
    def density(self):
        return self.base.density


def tilted_landscape(landscape, c):
    """Tilt ``landscape`` by ``c`` energy units per unit x."""
    return TiltedLandscape(base=landscape, c=float(c))
