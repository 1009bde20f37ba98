import numpy as np
import pytest

from radiomapper.environment import AccessPoint, Environment, Region
from radiomapper.fine.pathloss import (
    check_identifiability,
    fit_all_propagation,
    fit_propagation,
)


def _env_with_aps(ap_positions):
    region = Region(id=1, polygon=np.array([[0.0, 0.0], [20.0, 0.0], [20.0, 20.0], [0.0, 20.0]]))
    aps = [AccessPoint(id=i + 1, position=np.asarray(p, dtype=float)) for i, p in enumerate(ap_positions)]
    return Environment(regions=[region], aps=aps, rp_spacing=1.0)


class TestIdentifiability:
    def test_two_aps_fail_on_count(self):
        env = _env_with_aps([[1.0, 1.0], [5.0, 5.0]])
        report = check_identifiability(1, env)
        assert not report.ok
        assert report.valid_ap_count == 2
        assert "3" in report.reason

    def test_three_collinear_aps_fail(self):
        env = _env_with_aps([[1.0, 1.0], [5.0, 5.0], [9.0, 9.0]])
        report = check_identifiability(1, env)
        assert not report.ok
        assert "collinear" in report.reason

    def test_triangle_passes(self):
        env = _env_with_aps([[1.0, 1.0], [9.0, 1.0], [5.0, 8.0]])
        report = check_identifiability(1, env)
        assert report.ok
        assert report.reason is None


class TestFitPropagation:
    AP = np.array([0.0, 0.0])

    def _noiseless(self, distances, alpha=-20.0, beta=-30.0):
        pts = np.column_stack([np.asarray(distances, dtype=float), np.zeros(len(distances))])
        rss = beta + alpha * np.log10(np.asarray(distances, dtype=float))
        return pts, rss

    def test_exact_recovery_noiseless(self):
        pts, rss = self._noiseless([1.0, 2.0, 5.0, 10.0])
        fit = fit_propagation(pts, rss, self.AP)
        assert fit.alpha == pytest.approx(-20.0, abs=1e-9)
        assert fit.beta == pytest.approx(-30.0, abs=1e-9)
        assert fit.sigma2 <= 1e-18
        assert not fit.degenerate

    def test_two_points_exact_interpolation(self):
        pts, rss = self._noiseless([2.0, 8.0], alpha=-25.0, beta=-28.0)
        fit = fit_propagation(pts, rss, self.AP)
        assert fit.alpha == pytest.approx(-25.0, abs=1e-9)
        assert fit.beta == pytest.approx(-28.0, abs=1e-9)
        assert fit.sigma2 == pytest.approx(0.0, abs=1e-18)

    def test_noisy_recovery_within_half_db(self):
        # Monte-Carlo LS oracle: sigma = 4 dB, 1000 samples, 20 seeds;
        # log-uniform distances over two decades keep the slope standard
        # error near 0.22, so +-0.5 is a comfortable band
        for seed in range(20):
            rng = np.random.default_rng(seed)
            d = 10.0 ** rng.uniform(0.0, 2.0, size=1000)
            pts = np.column_stack([d, np.zeros(1000)])
            rss = -30.0 + (-20.0) * np.log10(d) + rng.normal(0.0, 4.0, size=1000)
            fit = fit_propagation(pts, rss, self.AP)
            assert abs(fit.alpha - (-20.0)) < 0.5, f"seed {seed}"

    def test_rank_deficient_falls_back(self):
        pts = np.array([[3.0, 0.0], [0.0, 3.0], [-3.0, 0.0]])  # all at distance 3
        rss = np.array([-50.0, -52.0, -51.0])
        fit = fit_propagation(pts, rss, self.AP)
        assert fit.degenerate
        assert fit.alpha == -20.0
        assert fit.beta == pytest.approx(np.mean(rss) - (-20.0) * np.log10(3.0))

    def test_sample_at_ap_clamped(self):
        pts = np.array([[0.0, 0.0], [10.0, 0.0]])
        rss = np.array([-10.0, -50.0])
        fit = fit_propagation(pts, rss, self.AP)
        assert np.isfinite(fit.alpha) and np.isfinite(fit.beta)

    def test_single_sample_degenerate(self):
        fit = fit_propagation(np.array([[5.0, 0.0]]), np.array([-60.0]), self.AP)
        assert fit.degenerate


class TestFitAllPropagation:
    def test_fits_only_valid_pairs(self, three_room_env):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0.5, 5.5, size=(90, 2))
        pts[:, 0] = rng.uniform(0.5, 23.5, size=90)
        from radiomapper.environment import point_in_region

        labels = np.array([point_in_region(three_room_env, p) for p in pts])
        rss = rng.uniform(-80.0, -30.0, size=(90, three_room_env.ap_count))
        model = fit_all_propagation(pts, labels, rss, three_room_env)
        assert np.isfinite(model.alpha[model.valid]).all()
        assert np.isnan(model.alpha[~model.valid]).all()
