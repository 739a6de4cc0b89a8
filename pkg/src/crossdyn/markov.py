"""Space-time discretisation of the Langevin dynamics and the noise fit.

One Euler step of the dynamics, started at grid point x, lands at
N(x - dF/dx * dt, sigma^2 dt). Collecting those transition densities over
the grid points inside four standard deviations of the mean, then
normalising each row, gives a sparse band matrix W whose stationary row
vector pi approximates the model's long-run distribution. The noise
amplitude sigma is the value that makes that stationary density match the
data density, measured by the squared Hellinger distance.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.sparse import csr_matrix

from . import _kernels
from .errors import BoundaryOptimumWarning, EmptyRow, NoConvergence
from .landscape import EnergyLandscape

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0  # 0.618..., bracket shrink factor


@dataclass(frozen=True)
class Grid:
    """Uniform state grid tied to a noise-dependent time step.

    The time step is set so that a pure diffusion of amplitude sigma needs
    about 1000 steps to cross the domain: sigma * sqrt(1000 dt) =
    (x_max - x_min) / 2. The spacing divides one diffusion step into
    ``fineness`` pieces: dx = sqrt(dt) / fineness. The final point is
    snapped to x_max, so the last cell is up to one dx wider.
    """

    x_min: float
    x_max: float
    dt: float
    dx: float
    points: np.ndarray
    fineness: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, order="C")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self):
        return self.points.size

    @property
    def span(self):
        return self.x_max - self.x_min


def build_grid(data_range, sigma, fineness=10):
    """Grid over ``data_range`` for noise amplitude ``sigma``.

    dt = ((x_max - x_min) / 2)^2 / (1000 sigma^2), dx = sqrt(dt) / fineness,
    floor((x_max - x_min) / dx) + 1 points with the last snapped to x_max.
    """
    x_min, x_max = float(data_range[0]), float(data_range[1])
    if not x_max > x_min:
        raise ValueError(f"empty data range [{x_min}, {x_max}]")
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    span = x_max - x_min
    dt = (0.5 * span) ** 2 / (1000.0 * sigma * sigma)
    dx = np.sqrt(dt) / fineness
    n = int(np.floor(span / dx)) + 1
    points = x_min + dx * np.arange(n)
    points[-1] = x_max
    return Grid(x_min=x_min, x_max=x_max, dt=dt, dx=dx, points=points, fineness=fineness)


@dataclass(frozen=True)
class DiscreteChain:
    """Row-stochastic transition matrix on a grid, plus start/stationary vectors.

    ``transition`` rows are source states; ``initial`` is the data-derived
    start vector (cell masses of the fitted density); ``stationary`` is
    filled in by :func:`stationary_distribution`.
    """

    grid: Grid
    transition: csr_matrix
    initial: np.ndarray
    stationary: np.ndarray | None = None


@dataclass(frozen=True)
class LangevinModel:
    """Fully specified dynamics: landscape (beta = 1) plus noise amplitude.

    Fitted models always have sigma > 0; sigma = 0 is accepted so the
    deterministic drift limit can be exercised directly.
    """

    landscape: EnergyLandscape
    sigma: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.beta != 1.0:
            raise ValueError("beta is fixed at 1.0")

    def data_range(self):
        return self.landscape.data_range()

    def grid_dt(self):
        """Time step of this model's default grid."""
        if self.sigma == 0.0:
            raise ValueError("sigma = 0 model has no diffusion timescale; pass dt explicitly")
        lo, hi = self.data_range()
        return (0.5 * (hi - lo)) ** 2 / (1000.0 * self.sigma**2)

    def default_grid(self, fineness=10):
        return build_grid(self.data_range(), self.sigma, fineness=fineness)


def transition_matrix(landscape, grid, sigma):
    """One-step transition matrix of the discretised dynamics.

    For each source point x the destination weights are the normal density
    N(x + force(x) * dt, sigma^2 dt) evaluated at the grid points within
    four standard deviations of the mean, then row-normalised. Mass beyond
    the grid edges is truncated by that normalisation.

    Raises
    ------
    EmptyRow
        If some row's window contains no grid point (grid too coarse for
        the drift at that point).
    """
    pts = grid.points
    n = pts.size
    dt = grid.dt
    s = sigma * np.sqrt(dt)
    window = 4.0 * s

    means = pts + np.asarray(landscape.force(pts), dtype=np.float64) * dt
    # Nudge the window edges so membership of points lying exactly at
    # 4 sigma is stable against last-ulp rounding.
    edge = window * (1.0 + 1e-9)
    lo_idx = np.searchsorted(pts, means - edge, side="left")
    hi_idx = np.searchsorted(pts, means + edge, side="right")
    widths = hi_idx - lo_idx
    if np.any(widths <= 0):
        bad = int(np.argmax(widths <= 0))
        raise EmptyRow(
            f"no grid point within 4 sigma sqrt(dt) of the step mean from "
            f"x={pts[bad]:.6g} (mean {means[bad]:.6g}); grid too coarse"
        )

    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(widths, out=indptr[1:])
    total = int(indptr[-1])
    indices = np.empty(total, dtype=np.int64)
    data = np.empty(total)
    # Flattened destination indices: one arange per row, offset to lo_idx.
    offsets = np.arange(total) - np.repeat(indptr[:-1], widths)
    indices[:] = np.repeat(lo_idx, widths) + offsets
    dest = pts[indices]
    z = (dest - np.repeat(means, widths)) / s
    data[:] = np.exp(-0.5 * z * z)
    row_sums = np.add.reduceat(data, indptr[:-1])
    data /= np.repeat(row_sums, widths)

    w = csr_matrix((data, indices, indptr), shape=(n, n))
    initial = landscape.density.cell_masses(_cell_edges(grid))
    initial = np.maximum(initial, 0.0)
    initial /= initial.sum()
    return DiscreteChain(grid=grid, transition=w, initial=initial)


def _cell_edges(grid):
    pts = grid.points
    mids = 0.5 * (pts[1:] + pts[:-1])
    return np.concatenate(([pts[0] - 0.5 * grid.dx], mids, [pts[-1] + 0.5 * grid.dx]))


def stationary_distribution(chain, start=None, tol=1e-10, max_iter=1_000_000):
    """Stationary row vector pi with pi W = pi, by power iteration.

    Starts from the chain's data-derived initial vector unless ``start`` is
    given; iterates until the max-norm step difference is at most ``tol``.

    Raises
    ------
    NoConvergence
        If the tolerance is not reached within ``max_iter`` iterations.
    """
    if start is None:
        start = chain.initial
    start = np.asarray(start, dtype=np.float64)
    if np.any(start < 0) or start.sum() <= 0:
        raise ValueError("start vector must be nonnegative with positive mass")
    wt = chain.transition.transpose().tocsr()
    pi, n_iter, diff = _kernels.power_iteration(
        wt.indptr.astype(np.int64),
        wt.indices.astype(np.int64),
        np.ascontiguousarray(wt.data, dtype=np.float64),
        np.ascontiguousarray(start),
        float(tol),
        int(max_iter),
    )
    if diff > tol:
        raise NoConvergence(
            f"power iteration at {max_iter} iterations: last step {diff:.3e} > tol {tol:.1e}"
        )
    return pi


def solve_chain(chain, **kwargs):
    """Return a copy of ``chain`` with its stationary vector filled in."""
    pi = stationary_distribution(chain, **kwargs)
    return replace(chain, stationary=pi)


class SplineDensity:
    """Continuous density from a stationary vector: cubic spline through
    (grid point, pi_i / dx), clamped at zero and renormalised over the grid
    range.

    Calling evaluates the normalised density; ``knot_values`` holds the raw
    pi_i / dx ordinates the spline interpolates.
    """

    def __init__(self, grid, stationary):
        self.grid = grid
        self.knot_values = np.asarray(stationary, dtype=np.float64) / grid.dx
        self.spline = CubicSpline(grid.points, self.knot_values)
        self.norm = self._clamped_integral()

    def _clamped_integral(self, oversample=8):
        xs = np.linspace(self.grid.x_min, self.grid.x_max, oversample * self.grid.n_points)
        vals = np.maximum(self.spline(xs), 0.0)
        return float(np.trapezoid(vals, xs))

    def __call__(self, x):
        return np.maximum(self.spline(x), 0.0) / self.norm


def continuous_density(chain):
    """Spline density of the chain's stationary vector."""
    if chain.stationary is None:
        raise ValueError("chain has no stationary vector; run stationary_distribution first")
    return SplineDensity(chain.grid, chain.stationary)


def hellinger(p, q, xs):
    """Squared Hellinger distance (1/2) int (sqrt p - sqrt q)^2 dx.

    ``p`` and ``q`` are densities given either as callables or as values on
    the quadrature nodes ``xs``; the integral is a trapezoid rule over
    ``xs``. Zero iff the densities agree a.e.; 1 for disjoint supports.
    """
    xs = np.asarray(xs, dtype=np.float64)
    p_vals = np.asarray(p(xs) if callable(p) else p, dtype=np.float64)
    q_vals = np.asarray(q(xs) if callable(q) else q, dtype=np.float64)
    diff = np.sqrt(np.maximum(p_vals, 0.0)) - np.sqrt(np.maximum(q_vals, 0.0))
    return 0.5 * float(np.trapezoid(diff * diff, xs))


def _normalised_on(f, xs):
    vals = np.maximum(np.asarray(f(xs), dtype=np.float64), 0.0)
    return vals / np.trapezoid(vals, xs)


def fit_sigma(
    landscape,
    data_density=None,
    sigma_bounds=(0.05, 10.0),
    fineness=10,
    rel_tol=1e-3,
    fixed_grid=None,
    quad_points=2001,
    full_output=False,
):
    """Fit the noise amplitude by golden-section search on the Hellinger cost.

    For each candidate sigma the grid is rebuilt (dt depends on sigma), the
    chain solved, its stationary density splined, and the squared Hellinger
    distance to ``data_density`` evaluated on a fixed quadrature grid of
    ``quad_points`` nodes over the data range; the common quadrature grid
    keeps the cost comparable across candidates. The search stops when the
    bracket is narrower than ``rel_tol`` times the initial bracket.

    ``data_density`` defaults to the landscape's own KDE. ``fixed_grid``
    may be a prebuilt :class:`Grid`, or ``True`` to build one grid at the
    reference noise scale sigma = 1 and reuse it for every candidate
    instead of rebuilding.

    Returns the fitted :class:`LangevinModel`; with ``full_output=True``
    returns ``(model, FitDiagnostics)``.

    Warns
    -----
    BoundaryOptimumWarning
        If the fitted sigma lands within 1% of either search bound.
    """
    lo, hi = float(sigma_bounds[0]), float(sigma_bounds[1])
    if not 0.0 < lo < hi:
        raise ValueError(f"sigma bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")
    if data_density is None:
        data_density = landscape.density.pdf

    x_lo, x_hi = landscape.data_range()
    if fixed_grid is True:
        fixed_grid = build_grid((x_lo, x_hi), 1.0, fineness)
    xs = np.linspace(x_lo, x_hi, quad_points)
    target = _normalised_on(data_density, xs)

    cache = {}

    def cost(sigma):
        if sigma in cache:
            return cache[sigma][0]
        grid = fixed_grid if fixed_grid else build_grid((x_lo, x_hi), sigma, fineness)
        chain = solve_chain(transition_matrix(landscape, grid, sigma))
        density = continuous_density(chain)
        value = hellinger(_normalised_on(density, xs), target, xs)
        cache[sigma] = (value, chain)
        return value

    a, b = lo, hi
    width0 = b - a
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = cost(x1), cost(x2)
    n_evals = 2
    while (b - a) > rel_tol * width0:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = cost(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = cost(x2)
        n_evals += 1

    sigma_hat, best = min(((s, c) for s, c in ((x1, f1), (x2, f2))), key=lambda t: t[1])
    if sigma_hat - lo < 0.01 * width0 or hi - sigma_hat < 0.01 * width0:
        warnings.warn(
            f"fitted sigma {sigma_hat:.4g} is within 1% of the search bounds "
            f"({lo}, {hi}); widen the bracket",
            BoundaryOptimumWarning,
        )

    model = LangevinModel(landscape=landscape, sigma=float(sigma_hat))
    if not full_output:
        return model
    diag = FitDiagnostics(
        cost=float(best),
        bracket=(float(a), float(b)),
        n_evaluations=n_evals,
        chain=cache[sigma_hat][1],
    )
    return model, diag


@dataclass(frozen=True)
class FitDiagnostics:
    """Side information from :func:`fit_sigma`."""

    cost: float
    bracket: tuple
    n_evaluations: int
    chain: DiscreteChain = field(repr=False, compare=False, default=None)
