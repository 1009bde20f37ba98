import numpy as np
import pytest

from radiomapper.environment import AccessPoint, Environment, Region
from radiomapper.fine.ga import GaConfig, _steered_walks, ga_search, trajectory_log_posterior
from radiomapper.geometry import points_in_polygon, polygon_bounds
from radiomapper.mobility import MobilityConfig
from radiomapper.propagation import PropagationModel


def _single_room():
    region = Region(id=1, polygon=np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]))
    aps = [
        AccessPoint(id=1, position=np.array([1.0, 1.0])),
        AccessPoint(id=2, position=np.array([9.0, 1.0])),
        AccessPoint(id=3, position=np.array([5.0, 9.0])),
    ]
    return Environment(regions=[region], aps=aps, rp_spacing=0.5)


def _true_model(env, sigma2=1e-12):
    model = PropagationModel.empty(env.region_count, env.ap_count, env.valid_region_matrix())
    for k in range(1, env.region_count + 1):
        for q in range(1, env.ap_count + 1):
            if model.valid[k - 1, q - 1]:
                model.set_entry(k, q, -20.0, -30.0, sigma2)
    return model


def _mobility():
    return MobilityConfig(mean_residence={1: 10.0})


def _rss_for(env, model, points, labels):
    pts = np.atleast_2d(points)
    out = np.empty((pts.shape[0], env.ap_count))
    for q in range(1, env.ap_count + 1):
        d = np.maximum(np.linalg.norm(pts - env.aps[q - 1].position, axis=1), 0.01)
        out[:, q - 1] = model.predict(1, q, d)
    return out


class TestTrajectoryLogPosterior:
    def test_single_slot_noiseless_maximum(self):
        env = _single_room()
        model = _true_model(env, sigma2=4.0)
        x = np.array([[4.0, 5.0]])
        labels = np.array([1])
        rss = _rss_for(env, model, x, labels)
        score = trajectory_log_posterior(x, labels, rss, model, env, _mobility())
        expected = sum(-0.5 * np.log(2 * np.pi * 4.0) for _ in range(3))
        assert score == pytest.approx(expected, rel=1e-10)

    def test_overspeed_step_is_minus_inf(self):
        env = _single_room()
        model = _true_model(env, sigma2=4.0)
        mob = _mobility()
        x = np.array([[1.0, 1.0], [1.0 + mob.max_speed * mob.slot_interval + 0.01, 1.0]])
        labels = np.array([1, 1])
        rss = _rss_for(env, model, x, labels)
        assert trajectory_log_posterior(x, labels, rss, model, env, mob) == -np.inf

    def test_point_outside_region_is_minus_inf(self):
        env = _single_room()
        model = _true_model(env, sigma2=4.0)
        x = np.array([[11.0, 5.0]])
        labels = np.array([1])
        rss = np.full((1, 3), -50.0)
        assert trajectory_log_posterior(x, labels, rss, model, env, _mobility()) == -np.inf

    def test_term_by_term_enumeration_oracle(self):
        env = _single_room()
        model = _true_model(env, sigma2=6.25)
        mob = _mobility()
        x = np.array([[2.0, 3.0], [2.5, 3.4]])
        labels = np.array([1, 1])
        rng = np.random.default_rng(0)
        rss = _rss_for(env, model, x, labels) + rng.normal(0, 2, size=(2, 3))

        expected = 0.0
        for t in range(2):
            for q in range(3):
                d = max(np.linalg.norm(x[t] - env.aps[q].position), 0.01)
                pred = -30.0 + (-20.0) * np.log10(d)
                expected += -0.5 * np.log(2 * np.pi * 6.25) - (rss[t, q] - pred) ** 2 / (2 * 6.25)
        step = float(np.linalg.norm(x[1] - x[0]))
        speed = step / mob.slot_interval
        expected += -np.log(np.sqrt(2 * np.pi) * mob.speed_std) - (speed - mob.mean_speed) ** 2 / (
            2 * mob.speed_std**2
        )
        got = trajectory_log_posterior(x, labels, rss, model, env, mob)
        assert got == pytest.approx(expected, rel=1e-6)


class TestGaSearch:
    def test_single_slot_matches_grid_search(self):
        # noiseless RSS from 3 non-collinear APs; oracle = 0.05 m grid scan
        env = _single_room()
        model = _true_model(env, sigma2=0.25)
        truth = np.array([[6.3, 4.1]])
        labels = np.array([1])
        rss = _rss_for(env, model, truth, labels)

        xmin, ymin, xmax, ymax = polygon_bounds(env.region(1).polygon)
        xs = np.arange(xmin, xmax + 1e-9, 0.05)
        ys = np.arange(ymin, ymax + 1e-9, 0.05)
        gx, gy = np.meshgrid(xs, ys)
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        ll = np.zeros(grid.shape[0])
        for q in range(3):
            d = np.maximum(np.linalg.norm(grid - env.aps[q].position, axis=1), 0.01)
            pred = -30.0 - 20.0 * np.log10(d)
            ll -= (rss[0, q] - pred) ** 2
        grid_opt = grid[np.argmax(ll)]

        result = ga_search(
            labels, rss, model, env, _mobility(), GaConfig(), np.random.default_rng(3)
        )
        assert np.linalg.norm(result.points[0] - grid_opt) < 0.1

    def test_elitism_trace_non_decreasing(self):
        env = _single_room()
        model = _true_model(env, sigma2=4.0)
        rng = np.random.default_rng(4)
        T = 30
        labels = np.ones(T, dtype=int)
        walk = _steered_walks(1, labels, env, _mobility(), np.random.default_rng(9))[0]
        rss = _rss_for(env, model, walk, labels) + rng.normal(0, 2, size=(T, 3))
        result = ga_search(labels, rss, model, env, _mobility(), GaConfig(), np.random.default_rng(5))
        trace = np.asarray(result.trace)
        assert (np.diff(trace) >= 0).all()

    def test_degenerate_identity_configuration(self):
        # zero crossover/mutation rates: children are copies, the population
        # never changes, and the output is exactly a best initial individual
        env = _single_room()
        model = _true_model(env, sigma2=4.0)
        labels = np.ones(5, dtype=int)
        rss = np.full((5, 3), -50.0)
        cfg = GaConfig(
            population=2,
            generations=3,
            crossover_rate=0.0,
            mutation_rate=0.0,
            span_mutation_rate=0.0,
            tournament_size=2,
        )
        seed = np.array([[5.0, 5.0]] * 5)
        mob = _mobility()
        result = ga_search(
            labels, rss, model, env, mob, cfg, np.random.default_rng(6), seed_individual=seed
        )
        seed_score = trajectory_log_posterior(seed, labels, rss, model, env, mob)
        assert result.fitness >= seed_score
        if result.fitness == seed_score:
            assert np.array_equal(result.points, seed)

    def test_all_points_inside_regions(self, three_room_env):
        model = PropagationModel.empty(3, 3, three_room_env.valid_region_matrix())
        for k in range(1, 4):
            for q in range(1, 4):
                if model.valid[k - 1, q - 1]:
                    model.set_entry(k, q, -20.0, -30.0, 4.0)
        labels = np.repeat([1, 2, 3], 10)
        rng = np.random.default_rng(7)
        rss = rng.uniform(-80, -30, size=(30, 3))
        mob = MobilityConfig(mean_residence={1: 10.0, 2: 10.0, 3: 10.0})
        result = ga_search(labels, rss, model, three_room_env, mob, GaConfig(generations=5), np.random.default_rng(8))
        for k in (1, 2, 3):
            poly = three_room_env.region(k).polygon
            assert points_in_polygon(poly, result.points[labels == k]).all()

    def test_warm_start_never_worse_than_seed(self):
        env = _single_room()
        model = _true_model(env, sigma2=1.0)
        rng = np.random.default_rng(10)
        T = 20
        labels = np.ones(T, dtype=int)
        truth = _steered_walks(1, labels, env, _mobility(), np.random.default_rng(11))[0]
        rss = _rss_for(env, model, truth, labels) + rng.normal(0, 1, size=(T, 3))
        seed = _steered_walks(1, labels, env, _mobility(), np.random.default_rng(12))[0]
        seed_score = trajectory_log_posterior(seed, labels, rss, model, env, _mobility())
        result = ga_search(
            labels, rss, model, env, _mobility(), GaConfig(generations=10),
            np.random.default_rng(13), seed_individual=seed,
        )
        assert result.fitness >= seed_score

    def test_determinism(self):
        env = _single_room()
        model = _true_model(env, sigma2=1.0)
        labels = np.ones(12, dtype=int)
        rng = np.random.default_rng(14)
        rss = rng.uniform(-70, -40, size=(12, 3))
        a = ga_search(labels, rss, model, env, _mobility(), GaConfig(generations=8), np.random.default_rng(15))
        b = ga_search(labels, rss, model, env, _mobility(), GaConfig(generations=8), np.random.default_rng(15))
        assert np.array_equal(a.points, b.points)
        assert a.fitness == b.fitness

    def test_identifiability_warning_sets_degraded(self):
        region = Region(id=1, polygon=np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]))
        aps = [AccessPoint(id=1, position=np.array([1.0, 1.0])), AccessPoint(id=2, position=np.array([9.0, 9.0]))]
        env = Environment(regions=[region], aps=aps, rp_spacing=0.5)
        model = PropagationModel.empty(1, 2, env.valid_region_matrix())
        model.set_entry(1, 1, -20.0, -30.0, 4.0)
        model.set_entry(1, 2, -20.0, -30.0, 4.0)
        labels = np.ones(5, dtype=int)
        rss = np.full((5, 2), -50.0)
        with pytest.warns(UserWarning, match="region 1"):
            result = ga_search(labels, rss, model, env, _mobility(), GaConfig(generations=2), np.random.default_rng(16))
        assert result.degraded
