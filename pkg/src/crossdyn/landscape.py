"""Free-energy landscape over the data domain, via the Boltzmann relation.

With the noise scale fixed to beta = 1 the landscape is F(x) = -log p(x)
for the estimated density p. Local minima of F are attractors (the norms
of the population); local maxima between attractors are tipping points.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kde
from .errors import NoAttractorFound

_BISECT_TOL = 1e-8


@dataclass(frozen=True)
class EnergyLandscape:
    """Energy field F(x) = -(1/beta) log p(x) over a fitted density.

    beta is fixed at 1: only the ratio of drift to noise is identifiable
    from a single time point, so the deterministic timescale is pinned here
    and the noise amplitude is fitted separately.
    """

    density: kde.DensityModel
    beta: float = 1.0

    def __post_init__(self):
        if self.beta != 1.0:
            raise ValueError("beta is fixed at 1.0; rescale sigma instead")

    def energy(self, x):
        """F(x) = -log p(x); finite for every finite x."""
        return np.negative(self.density.log_pdf(x))

    def force(self, x):
        """-dF/dx = d log p / dx; positive force pushes the state upward."""
        return self.density.log_pdf_derivative(x)

    def data_range(self):
        """Integer-bounded domain: (floor(min), ceil(max)) of the samples."""
        values = self.density.values
        return float(np.floor(values.min())), float(np.ceil(values.max()))


@dataclass(frozen=True)
class LandscapeFeatures:
    """Sorted attractors (force + -> -) and tipping points (- -> +).

    Tipping points outside the span of the attractors are dropped, so the
    two tuples always interleave and len(tipping_points) ==
    len(attractors) - 1.
    """

    attractors: tuple = field(default_factory=tuple)
    tipping_points: tuple = field(default_factory=tuple)


def energy(landscape, x):
    """Energy of ``landscape`` at ``x`` (works for tilted landscapes too)."""
    return landscape.energy(x)


def force(landscape, x):
    """Drift -dF/dx of ``landscape`` at ``x``."""
    return landscape.force(x)


def _bisect_root(f, lo, hi, f_lo, tol=_BISECT_TOL):
    """Root of f in [lo, hi] given a sign change, bisected to width tol."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_lo > 0) == (f_mid > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_features(landscape, x_min, x_max, scan_points=2001, min_barrier=0.0):
    """Locate attractors and tipping points by force sign changes.

    The force is evaluated on ``scan_points`` uniform nodes in
    [x_min, x_max]; each sign change is refined by bisection to 1e-8.
    A + -> - change is an attractor, a - -> + change a tipping point.
    With ``min_barrier > 0``, features are pruned until every barrier seen
    from its shallower side is at least that deep (KDE wiggles can
    otherwise produce spurious shallow pairs).

    Raises
    ------
    NoAttractorFound
        If the force has no + -> - sign change in the range.
    """
    if not x_min < x_max:
        raise ValueError(f"x_min must be below x_max, got [{x_min}, {x_max}]")
    if scan_points < 100:
        raise ValueError(f"scan_points must be >= 100, got {scan_points}")

    xs = np.linspace(x_min, x_max, scan_points)
    fs = np.asarray(landscape.force(xs), dtype=np.float64)

    def force_at(x):
        return float(landscape.force(x))

    attractors = []
    tippings = []
    n = scan_points
    i = 0
    while i < n - 1:
        a = fs[i]
        if a == 0.0:
            # Exact node zero (symmetric data can produce one): classify by
            # the nearest nonzero flanks and skip past the zero run.
            j = i - 1
            while j >= 0 and fs[j] == 0.0:
                j -= 1
            k = i
            while k < n and fs[k] == 0.0:
                k += 1
            if j >= 0 and k < n and (fs[j] > 0) != (fs[k] > 0):
                root = 0.5 * (xs[i] + xs[k - 1])
                if fs[j] > 0:
                    attractors.append(float(root))
                else:
                    tippings.append(float(root))
            i = k
            continue
        b = fs[i + 1]
        if b != 0.0 and (a > 0) != (b > 0):
            root = _bisect_root(force_at, float(xs[i]), float(xs[i + 1]), float(a))
            if a > 0:
                attractors.append(root)
            else:
                tippings.append(root)
        i += 1

    if not attractors:
        raise NoAttractorFound(
            f"force has no downhill-to-uphill sign change in [{x_min}, {x_max}]"
        )

    # Interleaving contract: keep only tipping points strictly between the
    # outermost attractors.
    tippings = [t for t in tippings if attractors[0] < t < attractors[-1]]

    if min_barrier > 0.0:
        attractors, tippings = _prune_shallow(landscape, attractors, tippings, min_barrier)
        if not attractors:
            raise NoAttractorFound(
                f"all features are shallower than min_barrier={min_barrier}"
            )

    return LandscapeFeatures(tuple(attractors), tuple(tippings))


def _prune_shallow(landscape, attractors, tippings, min_barrier):
    """Iteratively merge the feature pair with the smallest barrier."""
    attractors = list(attractors)
    tippings = list(tippings)
    while tippings:
        e_att = [float(landscape.energy(a)) for a in attractors]
        e_tip = [float(landscape.energy(t)) for t in tippings]
        prominences = [(e_tip[k] - max(e_att[k], e_att[k + 1]), k) for k in range(len(tippings))]
        shallowest, k = min(prominences)
        if shallowest >= min_barrier:
            break
        # Drop the tipping point and the shallower of its two attractors.
        drop = k if e_att[k] >= e_att[k + 1] else k + 1
        del tippings[k]
        del attractors[drop]
    return attractors, tippings
