"""Gaussian kernel density estimation with analytic log-density derivatives.

The estimated density is the uniform mixture of Gaussians centred on the
observed values,

    p(x) = (n h sqrt(2 pi))^-1 sum_i exp(-(x - x_i)^2 / (2 h^2)),

with the bandwidth h chosen by Silverman's rule of thumb unless supplied.
The log-density slope d log p / dx is evaluated analytically as a ratio of
weighted kernel sums rather than by numerical differentiation, so it stays
smooth and finite everywhere.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateData

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class CrossSection:
    """A one-time-point sample: one scalar value per individual.

    Parameters
    ----------
    values : array_like
        At least two finite measurements, all in the same unit.
    label : str, optional
        Free-form identifier carried through reports and output files.
    """

    values: np.ndarray
    label: str | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size < 2:
            raise DegenerateData(
                f"need at least 2 values, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise DegenerateData("values must all be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


def silverman_bandwidth(data, ddof=1):
    """Bandwidth by Silverman's rule, 0.9 min(std, IQR/1.34) n^(-1/5).

    Quartiles use linear interpolation between order statistics; the
    standard deviation uses ``ddof`` delta degrees of freedom (1 by
    default, i.e. the unbiased sample estimate). If one of std and IQR is
    zero the other is used alone.

    Raises
    ------
    DegenerateData
        If both the standard deviation and the IQR are zero.
    """
    values = data.values if isinstance(data, CrossSection) else np.asarray(data, dtype=np.float64)
    n = values.size
    if n < 2:
        raise DegenerateData(f"need at least 2 values, got {n}")
    std = float(np.std(values, ddof=ddof))
    q75, q25 = np.percentile(values, [75, 25])
    iqr_scaled = float(q75 - q25) / 1.34
    candidates = [s for s in (std, iqr_scaled) if s > 0.0]
    if not candidates:
        raise DegenerateData("data has zero dispersion (std and IQR both zero)")
    return 0.9 * min(candidates) * n ** (-0.2)


@dataclass(frozen=True)
class DensityModel:
    """Gaussian KDE: sample locations plus one shared bandwidth.

    Construct directly from raw sample values (any length >= 1; used by
    low-level checks), or through :meth:`fit` to apply the length-2 data
    contract and Silverman bandwidth selection.
    """

    values: np.ndarray
    bandwidth: float
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C").ravel()
        if values.size < 1:
            raise DegenerateData("need at least one sample")
        if not np.all(np.isfinite(values)):
            raise DegenerateData("samples must all be finite")
        if not self.bandwidth > 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @classmethod
    def fit(cls, data, bandwidth=None, ddof=1):
        """Fit a density to a :class:`CrossSection`.

        ``bandwidth=None`` selects Silverman's rule.
        """
        if not isinstance(data, CrossSection):
            data = CrossSection(np.asarray(data))
        if bandwidth is None:
            bandwidth = silverman_bandwidth(data, ddof=ddof)
        return cls(values=data.values, bandwidth=bandwidth, label=data.label)

    @property
    def n(self):
        return self.values.size

    def pdf(self, x):
        return pdf(self, x)

    def log_pdf(self, x):
        return log_pdf(self, x)

    def log_pdf_derivative(self, x):
        return log_pdf_derivative(self, x)

    def cell_masses(self, edges):
        """Probability mass of each interval between consecutive edges.

        Exact under the Gaussian mixture (difference of normal CDFs summed
        over kernels), used to seed the discrete chain with the data-derived
        start vector.
        """
        from scipy.special import ndtr

        edges = np.asarray(edges, dtype=np.float64)
        u = (edges[:, None] - self.values[None, :]) / self.bandwidth
        cdf = ndtr(u).mean(axis=1)
        return np.diff(cdf)


def _sums(model, x):
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    m, s0, s1 = _kernels.gauss_kernel_sums(
        np.ascontiguousarray(x_arr), model.values, model.bandwidth
    )
    return x_arr, m, s0, s1


def _as_input_shape(result, x):
    if np.ndim(x) == 0:
        return float(result[0])
    return result.reshape(np.shape(x))


def pdf(model, x):
    """Density of the Gaussian mixture at ``x`` (scalar or array).

    Strictly positive for all finite ``x`` in exact arithmetic; may
    underflow to 0 many hundreds of bandwidths away from the data.
    """
    x_arr, m, s0, _ = _sums(model, x)
    out = np.exp(m + np.log(s0)) / (model.n * model.bandwidth * np.sqrt(2.0 * np.pi))
    return _as_input_shape(out, x)


def log_pdf(model, x):
    """log p(x), evaluated in shifted form so it is finite for all finite x."""
    x_arr, m, s0, _ = _sums(model, x)
    out = m + np.log(s0) - np.log(model.n * model.bandwidth) - _LOG_SQRT_2PI
    return _as_input_shape(out, x)


def log_pdf_derivative(model, x):
    """d log p / dx as the exact ratio of weighted kernel sums.

    Equals sum_i (x_i - x) k_i / (h^2 sum_i k_i) with
    k_i = exp(-(x - x_i)^2 / (2 h^2)); the denominator is strictly
    positive, so the result is smooth and finite everywhere.
    """
    x_arr, _, s0, s1 = _sums(model, x)
    out = s1 / (s0 * model.bandwidth**2)
    return _as_input_shape(out, x)
