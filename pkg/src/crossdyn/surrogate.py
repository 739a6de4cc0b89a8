"""Synthetic datasets with known ground truth.

Cross-sections are drawn from the quartic double-well family
p(x) = exp(a x^2 - b x^4) / Z (two attractors iff a > 0, single well
otherwise) by inverse-transform sampling of a finely tabulated CDF.
Longitudinal follow-ups are generated from a fitted model as one
Euler-Maruyama displacement per individual, giving validation tests a
cohort whose dynamics are model-consistent by construction.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .kde import CrossSection
from .validate import LongitudinalPair

_CDF_NODES = 100_000
_TAIL_RATIO = 1e-12  # truncate where the density falls below this times its peak


@dataclass(frozen=True)
class LandauSpec:
    """Quartic-potential ground truth: energy -a x^2 + b x^4, n samples.

    ``z`` (the normalising constant of exp(a x^2 - b x^4)) is computed by
    adaptive quadrature at construction and cached on the instance.
    """

    a: float
    b: float
    n: int
    seed: int | None = None
    z: float = field(init=False, compare=False)

    def __post_init__(self):
        if not self.b > 0.0:
            raise ValueError(f"b must be positive, got {self.b}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        lo, hi = self.support()
        z, _ = quad(lambda x: np.exp(self.log_weight(x)), lo, hi, limit=200)
        object.__setattr__(self, "z", float(z))

    def log_weight(self, x):
        """Unnormalised log density a x^2 - b x^4."""
        x = np.asarray(x, dtype=np.float64)
        return self.a * x * x - self.b * x**4

    def pdf(self, x):
        return np.exp(self.log_weight(x)) / self.z

    def peak_log_weight(self):
        if self.a > 0:
            x_star = np.sqrt(self.a / (2.0 * self.b))
            return float(self.log_weight(x_star))
        return 0.0

    def support(self, tail_ratio=_TAIL_RATIO):
        """Symmetric truncation where the density is tail_ratio * peak.

        Solves a x^2 - b x^4 = peak + log(tail_ratio) in closed form; the
        discriminant is positive for every normalisable (a, b).
        """
        target = self.peak_log_weight() + np.log(tail_ratio)
        x2 = (self.a + np.sqrt(self.a * self.a - 4.0 * self.b * target)) / (2.0 * self.b)
        cut = float(np.sqrt(x2))
        return -cut, cut

    def attractors(self):
        """Minima of the true energy: +-sqrt(a / 2b) for a > 0, else {0}."""
        if self.a > 0:
            x_star = float(np.sqrt(self.a / (2.0 * self.b)))
            return (-x_star, x_star)
        return (0.0,)


def _tabulated_cdf(spec):
    lo, hi = spec.support()
    xs = np.linspace(lo, hi, _CDF_NODES)
    pdf = np.exp(spec.log_weight(xs))
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(xs))))
    cdf /= cdf[-1]
    return xs, cdf


def sample_landau(spec):
    """Draw ``spec.n`` i.i.d. values by inverse-transform sampling.

    The CDF is tabulated on 1e5 nodes over the truncated support and
    inverted by monotone cubic interpolation; duplicate CDF ordinates
    (flat tail segments at float resolution) are dropped to keep the
    inversion strictly monotone. Reproducible given ``spec.seed``.
    """
    xs, cdf = _tabulated_cdf(spec)
    keep = np.concatenate(([True], np.diff(cdf) > 0.0))
    inverse = PchipInterpolator(cdf[keep], xs[keep])
    rng = np.random.default_rng(spec.seed)
    u = rng.random(spec.n)
    values = inverse(u)
    label = f"landau(a={spec.a:g}, b={spec.b:g}, n={spec.n}, seed={spec.seed})"
    return CrossSection(values=values, label=label)


def landau_cdf(spec):
    """Callable CDF of the tabulated ground truth (for KS-style checks)."""
    xs, cdf = _tabulated_cdf(spec)

    def cdf_fn(x):
        return np.interp(x, xs, cdf, left=0.0, right=1.0)

    return cdf_fn


def synth_longitudinal(model, baseline, dt, seed=None, label="synthetic"):
    """One-step follow-up per individual under the fitted dynamics.

    follow-up_i = x_i + force(x_i) dt + sigma sqrt(dt) z_i with independent
    standard-normal z_i; sigma = 0 gives the deterministic drift limit.
    Returns one :class:`LongitudinalPair` per baseline value.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    values = baseline.values if isinstance(baseline, CrossSection) else np.asarray(baseline, dtype=np.float64)
    drift = np.asarray(model.landscape.force(values), dtype=np.float64) * dt
    rng = np.random.default_rng(seed)
    noise = model.sigma * np.sqrt(dt) * rng.standard_normal(values.size)
    follow = values + drift + noise
    return [
        LongitudinalPair(id=str(i), baseline=float(b), followups=((label, float(f)),))
        for i, (b, f) in enumerate(zip(values, follow))
    ]
