import numpy as np
import pytest
from numpy.testing import assert_allclose

from crossdyn.errors import NoAttractorFound
from crossdyn.kde import CrossSection, DensityModel, log_pdf
from crossdyn.landscape import EnergyLandscape, energy, find_features, force


@pytest.fixture
def gaussian_landscape(rng):
    return EnergyLandscape(DensityModel.fit(CrossSection(rng.standard_normal(400))))


class TestEnergy:
    def test_definitional_identity(self, gaussian_landscape, rng):
        xs = rng.uniform(-3, 3, 50)
        total = energy(gaussian_landscape, xs) + log_pdf(gaussian_landscape.density, xs)
        assert np.max(np.abs(total)) == 0.0

    def test_peak_value(self):
        scape = EnergyLandscape(DensityModel(values=[0.0], bandwidth=1.0))
        assert_allclose(energy(scape, 0.0), 0.5 * np.log(2 * np.pi), rtol=1e-12)
        assert abs(energy(scape, 0.0) - 0.9189) < 1e-4

    def test_beta_fixed(self, gaussian_landscape):
        with pytest.raises(ValueError, match="beta"):
            EnergyLandscape(gaussian_landscape.density, beta=2.0)

    def test_double_well_minima(self, landau_fit):
        scape = landau_fit.model.landscape
        feats = find_features(scape, *scape.data_range())
        assert len(feats.attractors) == 2
        assert_allclose(feats.attractors, [-np.sqrt(1.5), np.sqrt(1.5)], atol=0.1)


class TestForce:
    def test_symmetric_zero(self):
        scape = EnergyLandscape(DensityModel(values=[-1.0, 1.0], bandwidth=1.0))
        assert abs(force(scape, 0.0)) < 1e-15

    def test_matches_negative_energy_gradient(self, gaussian_landscape, rng):
        xs = rng.uniform(-3, 3, 100)
        step = 1e-5
        fd = (energy(gaussian_landscape, xs + step) - energy(gaussian_landscape, xs - step)) / (
            2 * step
        )
        assert np.max(np.abs(force(gaussian_landscape, xs) + fd)) < 1e-5

    def test_sign_change_across_attractor(self, landau_fit):
        scape = landau_fit.model.landscape
        feats = find_features(scape, *scape.data_range())
        right = feats.attractors[-1]
        assert force(scape, right) == pytest.approx(0.0, abs=1e-6)
        assert force(scape, right - 0.05) > 0
        assert force(scape, right + 0.05) < 0


class TestFindFeatures:
    def test_unimodal_single_attractor(self, gaussian_landscape):
        feats = find_features(gaussian_landscape, *gaussian_landscape.data_range())
        assert len(feats.attractors) == 1
        assert len(feats.tipping_points) == 0
        assert abs(feats.attractors[0]) < 0.5

    def test_double_well_tipping_point(self, landau_fit):
        scape = landau_fit.model.landscape
        feats = find_features(scape, *scape.data_range())
        assert len(feats.tipping_points) == 1
        assert abs(feats.tipping_points[0]) < 0.1
        a_left, a_right = feats.attractors
        assert a_left < feats.tipping_points[0] < a_right

    def test_monotone_force_raises(self, gaussian_landscape):
        # Right of all the data the force points back down only.
        with pytest.raises(NoAttractorFound):
            find_features(gaussian_landscape, 5.0, 9.0)

    def test_symmetric_pair(self):
        values = np.concatenate([np.linspace(0.4, 1.6, 30), -np.linspace(0.4, 1.6, 30)])
        scape = EnergyLandscape(DensityModel(values=values, bandwidth=0.3))
        feats = find_features(scape, -2.0, 2.0)
        assert abs(force(scape, 0.0)) < 1e-9
        assert len(feats.attractors) == 2
        assert_allclose(feats.attractors[0], -feats.attractors[1], atol=1e-6)

    def test_interleaving(self, landau_fit):
        scape = landau_fit.model.landscape
        feats = find_features(scape, *scape.data_range())
        merged = sorted(list(feats.attractors) + list(feats.tipping_points))
        assert len(feats.tipping_points) == len(feats.attractors) - 1
        # Sorted merge alternates attractor / tipping / attractor / ...
        assert merged[::2] == sorted(feats.attractors)

    def test_min_barrier_prunes_wiggles(self, rng):
        # Undersmoothed KDE: many spurious minima; a barrier floor thins them
        # and a floor above every barrier keeps only the deepest attractor.
        values = rng.standard_normal(120)
        scape = EnergyLandscape(DensityModel(values=values, bandwidth=0.05))
        raw = find_features(scape, -3.0, 3.0)
        assert len(raw.attractors) > 1
        pruned = find_features(scape, -3.0, 3.0, min_barrier=2.0)
        assert len(pruned.attractors) < len(raw.attractors)
        assert len(pruned.tipping_points) == len(pruned.attractors) - 1
        lone = find_features(scape, -3.0, 3.0, min_barrier=50.0)
        assert len(lone.attractors) == 1
        assert len(lone.tipping_points) == 0

    def test_validates_arguments(self, gaussian_landscape):
        with pytest.raises(ValueError, match="x_min"):
            find_features(gaussian_landscape, 2.0, -2.0)
        with pytest.raises(ValueError, match="scan_points"):
            find_features(gaussian_landscape, -2.0, 2.0, scan_points=10)

    def test_bisection_refinement(self, gaussian_landscape):
        feats_coarse = find_features(gaussian_landscape, -3.0, 3.0, scan_points=101)
        feats_fine = find_features(gaussian_landscape, -3.0, 3.0, scan_points=4001)
        assert_allclose(feats_coarse.attractors[0], feats_fine.attractors[0], atol=1e-6)
