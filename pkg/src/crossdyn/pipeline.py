"""End-to-end fit: raw values -> standardized KDE landscape -> noise fit."""

from dataclasses import dataclass

from .kde import CrossSection, DensityModel
from .landscape import EnergyLandscape
from .markov import FitDiagnostics, LangevinModel, fit_sigma
from .validate import StandardizationRecord, standardize


@dataclass(frozen=True)
class FitOutput:
    """A fitted model plus the transform tying it back to the raw data."""

    model: LangevinModel
    record: StandardizationRecord
    diagnostics: FitDiagnostics
    data: CrossSection

    def to_raw(self, y):
        """Map standardized coordinates back to the raw measurement scale."""
        return self.record.invert(y)


def fit_model(
    values,
    label=None,
    standardize_data=True,
    bandwidth=None,
    ddof=1,
    fineness=10,
    sigma_bounds=(0.05, 10.0),
    rel_tol=1e-3,
    fixed_grid=False,
):
    """Fit the full dynamics to a cross-section of raw values.

    Standardizes (zero median, unit standard deviation) unless disabled,
    fits the Gaussian KDE with Silverman's bandwidth unless one is given,
    derives the landscape, and fits the noise amplitude by the Hellinger
    criterion. Deterministic for fixed inputs.
    """
    data = values if isinstance(values, CrossSection) else CrossSection(values, label=label)
    if standardize_data:
        fit_data, record = standardize(data, ddof=ddof)
    else:
        fit_data, record = data, StandardizationRecord(median=0.0, std=1.0)
    density = DensityModel.fit(fit_data, bandwidth=bandwidth, ddof=ddof)
    scape = EnergyLandscape(density)
    model, diag = fit_sigma(
        scape,
        sigma_bounds=sigma_bounds,
        fineness=fineness,
        rel_tol=rel_tol,
        fixed_grid=fixed_grid,
        full_output=True,
    )
    return FitOutput(model=model, record=record, diagnostics=diag, data=data)
