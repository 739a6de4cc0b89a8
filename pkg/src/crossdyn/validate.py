"""Directional prediction accuracy against follow-up observations.

For each individual the model predicts the probability of a positive or a
negative displacement over a horizon dt (normal with mean force * dt and
standard deviation sigma sqrt(dt)). The observed displacement sign picks
which probability counts as that individual's accuracy; the cohort
average is compared against a random-choice null distribution and scaled
so the null's 95% upper limit maps to 0 and the per-individual ceiling
(always taking the larger probability) maps to 1.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateData, DegenerateScale, EmptyCohort
from .kde import CrossSection


@dataclass(frozen=True)
class LongitudinalPair:
    """One individual: baseline value plus labelled follow-up values."""

    id: str
    baseline: float
    followups: tuple

    def followup(self, label=None):
        if label is None:
            return self.followups[0][1]
        for name, value in self.followups:
            if name == label:
                return value
        raise KeyError(f"individual {self.id} has no follow-up labelled {label!r}")


@dataclass(frozen=True)
class StandardizationRecord:
    """Affine map to standardized coordinates: y = (x - median) / std."""

    median: float
    std: float

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.median) / self.std

    def invert(self, y):
        return np.asarray(y, dtype=np.float64) * self.std + self.median


def standardize(data, ddof=1):
    """Shift to zero median and scale to unit standard deviation.

    Returns the transformed :class:`CrossSection` and the
    :class:`StandardizationRecord` needed to map further values (or map
    results back).

    Raises
    ------
    DegenerateData
        If the standard deviation is zero.
    """
    values = data.values if isinstance(data, CrossSection) else np.asarray(data, dtype=np.float64)
    std = float(np.std(values, ddof=ddof))
    if not std > 0.0:
        raise DegenerateData("cannot standardize data with zero standard deviation")
    record = StandardizationRecord(median=float(np.median(values)), std=std)
    label = data.label if isinstance(data, CrossSection) else None
    return CrossSection(values=record.apply(values), label=label), record


def displacement_probabilities(model, x, dt):
    """(P_PD, P_ND): probabilities of positive / negative displacement.

    The displacement over ``dt`` is normal with mean force(x) * dt and
    standard deviation sigma sqrt(dt); zero displacement has measure zero,
    so P_ND = 1 - P_PD exactly.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not model.sigma > 0.0:
        raise ValueError("displacement probabilities need sigma > 0")
    mu = np.asarray(model.landscape.force(x), dtype=np.float64) * dt
    s = model.sigma * np.sqrt(dt)
    p_pd = ndtr(mu / s)
    return p_pd, 1.0 - p_pd


def accuracy(p_pd, observed_signs):
    """Cohort accuracy (A_average, A_average_maximum).

    Each individual contributes the probability the model put on the
    observed displacement direction; the ceiling takes the larger of the
    two probabilities regardless of direction. Zero signs must already be
    excluded.

    Raises
    ------
    EmptyCohort
        If no individuals are supplied.
    """
    p_pd = np.atleast_1d(np.asarray(p_pd, dtype=np.float64))
    signs = np.atleast_1d(np.asarray(observed_signs, dtype=np.float64))
    if p_pd.size == 0:
        raise EmptyCohort("no individuals to score")
    if np.any(signs == 0):
        raise ValueError("zero displacement signs must be excluded before scoring")
    a_i = np.where(signs > 0, p_pd, 1.0 - p_pd)
    a_max_i = np.maximum(p_pd, 1.0 - p_pd)
    return float(a_i.mean()), float(a_max_i.mean())


def select_delta_t(model, baselines, displacements, dt_unit=None, scan=(1, 100)):
    """Integer horizon multiplier minimising the deterministic misfit.

    Scans k over ``scan`` (inclusive) and returns the k minimising the
    Euclidean distance between the drift displacement force(x) * k *
    ``dt_unit`` and the observed displacements; ties break toward smaller
    k. ``dt_unit`` defaults to the model's grid time step.
    """
    baselines = np.asarray(baselines, dtype=np.float64)
    displacements = np.asarray(displacements, dtype=np.float64)
    if baselines.size == 0:
        raise EmptyCohort("no individuals in the horizon scan")
    if dt_unit is None:
        dt_unit = model.grid_dt()
    lo, hi = int(scan[0]), int(scan[1])
    forces = np.asarray(model.landscape.force(baselines), dtype=np.float64)
    ks = np.arange(lo, hi + 1)
    drift = forces[None, :] * (ks[:, None] * dt_unit)
    distances = np.sqrt(((drift - displacements[None, :]) ** 2).sum(axis=1))
    return int(ks[np.argmin(distances)])


def random_choice_null(p_pd, repetitions=1000, seed=None):
    """Null distribution of cohort accuracies under random direction choice.

    Each repetition picks, independently per individual, P_PD or P_ND with
    probability one half and averages. Returns the ``repetitions`` means
    and their 97.5th percentile (the null 95% CI upper limit U_CI),
    linear-interpolation quantile.
    """
    p_pd = np.atleast_1d(np.asarray(p_pd, dtype=np.float64))
    if p_pd.size == 0:
        raise EmptyCohort("no individuals for the null distribution")
    rng = np.random.default_rng(seed)
    picks = rng.random((repetitions, p_pd.size)) < 0.5
    means = np.where(picks, p_pd[None, :], 1.0 - p_pd[None, :]).mean(axis=1)
    u_ci = float(np.percentile(means, 97.5))
    return means, u_ci


def scaled_accuracy(a_average, u_ci, a_average_max):
    """Rescale so U_CI maps to 0 and the accuracy ceiling maps to 1.

    Raises
    ------
    DegenerateScale
        If the ceiling does not exceed the null upper limit.
    """
    if not a_average_max > u_ci:
        raise DegenerateScale(
            f"ceiling {a_average_max:.6g} does not exceed null limit {u_ci:.6g}"
        )
    return (a_average - u_ci) / (a_average_max - u_ci)


def ideal_case_accuracy(model, baselines, dt, null_repetitions=1000, seed=None):
    """Scaled accuracy when displacements exactly follow the expectation.

    The ideal displacement is the negated standardized value (everyone
    moves toward the cohort centre); individuals exactly at zero are
    excluded like any zero displacement.
    """
    baselines = np.asarray(baselines, dtype=np.float64)
    ideal = -baselines
    keep = ideal != 0.0
    if not np.any(keep):
        raise EmptyCohort("all ideal displacements are zero")
    p_pd, _ = displacement_probabilities(model, baselines[keep], dt)
    a_avg, a_max = accuracy(p_pd, np.sign(ideal[keep]))
    _, u_ci = random_choice_null(p_pd, repetitions=null_repetitions, seed=seed)
    return scaled_accuracy(a_avg, u_ci, a_max)


def bootstrap_accuracy(
    p_pd, observed_signs, repetitions=1000, seed=None, null_repetitions=1000
):
    """Bootstrap percentile interval for the scaled accuracy.

    Resamples individuals with replacement and recomputes the full scaled
    accuracy (ceiling and null limit included) inside every resample;
    returns the (2.5th, 97.5th) percentiles. Resamples whose rescale is
    degenerate are dropped.
    """
    p_pd = np.atleast_1d(np.asarray(p_pd, dtype=np.float64))
    signs = np.atleast_1d(np.asarray(observed_signs, dtype=np.float64))
    n = p_pd.size
    if n < 2:
        raise EmptyCohort(f"bootstrap needs at least 2 individuals, got {n}")
    rng = np.random.default_rng(seed)
    scaled = np.full(repetitions, np.nan)
    for r in range(repetitions):
        idx = rng.integers(0, n, size=n)
        p_r = p_pd[idx]
        a_avg, a_max = accuracy(p_r, signs[idx])
        picks = rng.random((null_repetitions, n)) < 0.5
        means = np.where(picks, p_r[None, :], 1.0 - p_r[None, :]).mean(axis=1)
        u_ci = float(np.percentile(means, 97.5))
        if a_max > u_ci:
            scaled[r] = (a_avg - u_ci) / (a_max - u_ci)
    kept = scaled[np.isfinite(scaled)]
    if kept.size == 0:
        raise DegenerateScale("every bootstrap resample had a degenerate rescale")
    lo, hi = np.percentile(kept, [2.5, 97.5])
    return float(lo), float(hi)


@dataclass(frozen=True)
class Cluster:
    """Sub-cohort from one half-open category interval [lower, upper)."""

    label: str
    lower: float
    upper: float
    members: tuple
    disregarded: bool

    @property
    def size(self):
        return len(self.members)


def cluster_by_category(cohort, boundaries, labels, min_size=20):
    """Partition a cohort into half-open baseline-value categories.

    ``boundaries`` are strictly increasing interior cut points; interval k
    is [b_{k-1}, b_k) with open outer rays, so a value equal to a boundary
    belongs to the upper class. Clusters smaller than ``min_size`` are
    flagged ``disregarded`` (kept in the output for reporting).
    """
    boundaries = list(boundaries)
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise ValueError(f"boundaries must be strictly increasing, got {boundaries}")
    if len(labels) != len(boundaries) + 1:
        raise ValueError(
            f"need {len(boundaries) + 1} labels for {len(boundaries)} boundaries, "
            f"got {len(labels)}"
        )
    edges = [-np.inf] + [float(b) for b in boundaries] + [np.inf]
    buckets = [[] for _ in labels]
    for pair in cohort:
        k = int(np.searchsorted(np.asarray(boundaries), pair.baseline, side="right"))
        buckets[k].append(pair)
    return [
        Cluster(
            label=labels[k],
            lower=edges[k],
            upper=edges[k + 1],
            members=tuple(buckets[k]),
            disregarded=len(buckets[k]) < min_size,
        )
        for k in range(len(labels))
    ]


def filter_range(cohort, lower, upper):
    """Members with lower <= baseline < upper."""
    if not upper > lower:
        raise ValueError(f"need upper > lower, got [{lower}, {upper})")
    return [p for p in cohort if lower <= p.baseline < upper]


@dataclass(frozen=True)
class HistogramBin:
    """Directional balance of displacements whose baselines share one bin."""

    lower: float
    positive: int
    negative: int

    @property
    def relative(self):
        return (self.positive - self.negative) / (self.positive + self.negative)


def displacement_histogram(baselines, displacements, bin_width=1.0, bin_origin=None):
    """Per-bin relative count of positive versus negative displacements.

    An individual lands in the bin [origin + k w, origin + (k+1) w) that
    contains its baseline. The bin value is (pos - neg) / (pos + neg);
    zero displacements are excluded from both counts and bins left empty
    are omitted.
    """
    baselines = np.asarray(baselines, dtype=np.float64)
    displacements = np.asarray(displacements, dtype=np.float64)
    if baselines.size == 0:
        raise EmptyCohort("no individuals to bin")
    if not bin_width > 0.0:
        raise ValueError(f"bin width must be positive, got {bin_width}")
    keep = displacements != 0.0
    baselines, displacements = baselines[keep], displacements[keep]
    if bin_origin is None:
        bin_origin = np.floor(baselines.min() / bin_width) * bin_width if baselines.size else 0.0
    ks = np.floor((baselines - bin_origin) / bin_width).astype(np.int64)
    bins = []
    for k in np.unique(ks):
        in_bin = displacements[ks == k]
        bins.append(
            HistogramBin(
                lower=float(bin_origin + k * bin_width),
                positive=int(np.count_nonzero(in_bin > 0)),
                negative=int(np.count_nonzero(in_bin < 0)),
            )
        )
    return bins


@dataclass(frozen=True)
class IndividualResult:
    id: str
    p_pd: float
    p_nd: float
    a_i: float | None
    a_i_max: float
    observed_sign: int


@dataclass(frozen=True)
class ValidationReport:
    """Everything the accuracy pipeline produces for one cohort."""

    followup_label: str
    per_individual: tuple
    a_average: float
    a_average_max: float
    u_ci: float
    a_scaled: float
    delta_t_used: int
    dt_unit: float
    dt_used: float
    n_scored: int
    n_zero_excluded: int
    ideal_a_scaled: float | None = None
    bootstrap_ci: tuple | None = None
    seed: int | None = None
    label: str | None = None

    def to_dict(self):
        d = {
            "followup_label": self.followup_label,
            "label": self.label,
            "a_average": self.a_average,
            "a_average_max": self.a_average_max,
            "u_ci": self.u_ci,
            "a_scaled": self.a_scaled,
            "ideal_a_scaled": self.ideal_a_scaled,
            "bootstrap_ci": list(self.bootstrap_ci) if self.bootstrap_ci else None,
            "delta_t_used": self.delta_t_used,
            "dt_unit": self.dt_unit,
            "dt_used": self.dt_used,
            "n_scored": self.n_scored,
            "n_zero_excluded": self.n_zero_excluded,
            "seed": self.seed,
            "per_individual": [
                {
                    "id": r.id,
                    "p_pd": r.p_pd,
                    "p_nd": r.p_nd,
                    "a_i": r.a_i,
                    "a_i_max": r.a_i_max,
                    "observed_sign": r.observed_sign,
                }
                for r in self.per_individual
            ],
        }
        return d


def validate_cohort(
    model,
    cohort,
    followup_label=None,
    record=None,
    dt_unit=None,
    scan=(1, 100),
    null_repetitions=1000,
    bootstrap_repetitions=1000,
    seed=0,
    zero_policy="exclude",
    label=None,
):
    """Run the full directional-accuracy pipeline on one cohort.

    The model must be fitted to the cohort's standardized baselines;
    ``record`` maps the cohort's raw values into the model's coordinates
    (identity when the model was fitted on the raw scale). Steps: map
    values, select the horizon multiplier, compute per-individual
    displacement probabilities, score against observed signs (zero
    displacements excluded per ``zero_policy``), build the random-choice
    null, rescale, compute the ideal-case ceiling, and (optionally)
    bootstrap the scaled accuracy.
    """
    if not cohort:
        raise EmptyCohort("cohort is empty")
    if zero_policy not in ("exclude", "error"):
        raise ValueError(f"zero_policy must be 'exclude' or 'error', got {zero_policy!r}")
    if followup_label is None:
        followup_label = cohort[0].followups[0][0]

    baselines_raw = np.array([p.baseline for p in cohort])
    follow_raw = np.array([p.followup(followup_label) for p in cohort])
    ids = [p.id for p in cohort]
    if record is None:
        record = StandardizationRecord(median=0.0, std=1.0)
    y = record.apply(baselines_raw)
    d = (follow_raw - baselines_raw) / record.std

    if dt_unit is None:
        dt_unit = model.grid_dt()
    k = select_delta_t(model, y, d, dt_unit=dt_unit, scan=scan)
    dt_used = k * dt_unit

    p_pd, p_nd = displacement_probabilities(model, y, dt_used)
    signs = np.sign(d)
    zero = signs == 0.0
    if np.any(zero) and zero_policy == "error":
        raise DegenerateData(
            f"{int(zero.sum())} individuals have exactly zero displacement"
        )
    keep = ~zero
    if not np.any(keep):
        raise EmptyCohort("every displacement is exactly zero")

    a_avg, a_max = accuracy(p_pd[keep], signs[keep])
    seeds = np.random.SeedSequence(seed).spawn(3)
    _, u_ci = random_choice_null(
        p_pd[keep], repetitions=null_repetitions, seed=seeds[0]
    )
    a_scaled = scaled_accuracy(a_avg, u_ci, a_max)
    ideal = ideal_case_accuracy(
        model, y, dt_used, null_repetitions=null_repetitions, seed=seeds[1]
    )
    bootstrap_ci = None
    if bootstrap_repetitions:
        bootstrap_ci = bootstrap_accuracy(
            p_pd[keep],
            signs[keep],
            repetitions=bootstrap_repetitions,
            seed=seeds[2],
            null_repetitions=null_repetitions,
        )

    per_individual = tuple(
        IndividualResult(
            id=ids[i],
            p_pd=float(p_pd[i]),
            p_nd=float(p_nd[i]),
            a_i=float(p_pd[i] if signs[i] > 0 else 1.0 - p_pd[i]) if signs[i] != 0 else None,
            a_i_max=float(max(p_pd[i], 1.0 - p_pd[i])),
            observed_sign=int(signs[i]),
        )
        for i in range(len(cohort))
    )
    return ValidationReport(
        followup_label=followup_label,
        per_individual=per_individual,
        a_average=a_avg,
        a_average_max=a_max,
        u_ci=u_ci,
        a_scaled=a_scaled,
        delta_t_used=k,
        dt_unit=float(dt_unit),
        dt_used=float(dt_used),
        n_scored=int(keep.sum()),
        n_zero_excluded=int(zero.sum()),
        ideal_a_scaled=ideal,
        bootstrap_ci=bootstrap_ci,
        seed=seed,
        label=label,
    )
