import numpy as np

from radiomapper.fine import FineConfig, GaConfig, alternate_location_inference
from radiomapper.fine.alternate import _windows
from radiomapper.geometry import points_in_polygon
from radiomapper.worlds import (
    corridor_environment,
    default_mobility,
    sample_propagation,
    simulate_world,
)


def _small_world(sigma=1.0, n_users=2, slots=50, seed=11):
    env = corridor_environment(n_rooms=3, rp_spacing=0.5)
    prop = sample_propagation(env, np.random.default_rng(7), shadowing_db=sigma)
    mob = default_mobility(env, slots_per_region=slots)
    world = simulate_world(env, mob, prop, n_users=n_users, seed=seed)
    return env, mob, world


def _fast_config(outers=5):
    return FineConfig(
        max_outer_iterations=outers,
        window=120,
        window_overlap=30,
        ga=GaConfig(population=60, generations=25, stall_generations=8),
    )


class TestWindows:
    def test_short_sequence_single_window(self):
        assert _windows(150, 200, 50) == [(0, 150)]

    def test_covers_every_slot_with_overlap(self):
        for T, phase in [(500, 0), (500, 1), (437, 0), (437, 1)]:
            spans = _windows(T, 200, 50, phase)
            covered = np.zeros(T, dtype=int)
            for s, e in spans:
                covered[s:e] += 1
            assert (covered >= 1).all()
            assert covered.max() <= 2

    def test_phases_move_seams(self):
        a = _windows(1000, 200, 50, phase=0)
        b = _windows(1000, 200, 50, phase=1)
        assert a != b


class TestAlternation:
    def test_empty_input(self):
        env, mob, _ = _small_world()
        result = alternate_location_inference([], [], env, mob, FineConfig(), seed=0)
        assert result.trajectories == []
        assert result.iterations == 0
        assert result.converged

    def test_ground_truth_labels_low_error(self):
        env, mob, world = _small_world(sigma=1.0)
        result = alternate_location_inference(
            [s.observations for s in world.sequences],
            [t.labels for t in world.trajectories],
            env,
            mob,
            _fast_config(),
            seed=3,
        )
        err = np.concatenate(
            [np.linalg.norm(x - t.points, axis=1) for x, t in zip(result.trajectories, world.trajectories)]
        )
        # this reduced-budget config only shows the machinery converging;
        # the 1.0 m bar is exercised at full scale in the acceptance suite
        assert float(err.mean()) <= 2.5

    def test_region_containment_and_objective_trace(self):
        env, mob, world = _small_world()
        result = alternate_location_inference(
            [s.observations for s in world.sequences],
            [t.labels for t in world.trajectories],
            env,
            mob,
            _fast_config(3),
            seed=3,
        )
        for x, t in zip(result.trajectories, world.trajectories):
            for k in (1, 2, 3):
                mask = t.labels == k
                if mask.any():
                    assert points_in_polygon(env.region(k).polygon, x[mask]).all()
        assert len(result.objective_trace) == result.iterations
        assert all(np.isfinite(v) for v in result.objective_trace)

    def test_determinism(self):
        env, mob, world = _small_world(slots=30)
        seqs = [s.observations for s in world.sequences]
        labs = [t.labels for t in world.trajectories]
        r1 = alternate_location_inference(seqs, labs, env, mob, _fast_config(2), seed=5)
        r2 = alternate_location_inference(seqs, labs, env, mob, _fast_config(2), seed=5)
        for a, b in zip(r1.trajectories, r2.trajectories):
            assert np.array_equal(a, b)
        assert r1.objective_trace == r2.objective_trace

    def test_propagation_fit_step_never_decreases_objective(self):
        # for fixed trajectories the closed-form refit maximizes the
        # observation term, so the joint objective cannot drop
        from radiomapper.fine.ga import trajectory_log_posterior
        from radiomapper.fine.pathloss import fit_all_propagation

        env, mob, world = _small_world(slots=30)
        seqs = [s.observations for s in world.sequences]
        labs = [t.labels for t in world.trajectories]
        result = alternate_location_inference(seqs, labs, env, mob, _fast_config(2), seed=5)

        before = sum(
            trajectory_log_posterior(x, lab, rss, result.propagation, env, mob)
            for x, lab, rss in zip(result.trajectories, labs, seqs)
        )
        refit = fit_all_propagation(
            np.vstack(result.trajectories), np.concatenate(labs), np.vstack(seqs), env
        )
        after = sum(
            trajectory_log_posterior(x, lab, rss, refit, env, mob)
            for x, lab, rss in zip(result.trajectories, labs, seqs)
        )
        assert after >= before - 1e-6
