"""Alternating optimization between trajectory search and path-loss fits.

Each outer iteration re-optimizes every user's trajectory with the genetic
search (windowed for long sequences, warm-started from the current
estimate) and then refits all propagation parameters in closed form. The
loop stops when total trajectory movement drops below the convergence
threshold, when the iteration cap is reached, or when the joint objective
keeps deteriorating (divergence guard restoring the best-seen state).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import geometry
from ..coarse.em import signal_weighted_anchors
from ..environment import Environment
from ..mobility import MobilityConfig
from ..propagation import PropagationModel
from .ga import GaConfig, _Problem, _RegionProjector, _project_per_region, ga_search, trajectory_log_posterior
from .pathloss import FALLBACK_ALPHA, fit_all_propagation


@dataclass
class FineConfig:
    epsilon: float = 1e-3  # total trajectory movement threshold (meters)
    max_outer_iterations: int = 200
    window: int = 200  # GA window length in slots
    window_overlap: int = 50
    provisional_sigma_db: float = 8.0  # used before the first propagation fit
    divergence_patience: int = 5
    fit_first: bool = True  # bootstrap parameters from the anchor trajectories
    polish_radii: tuple[float, ...] = (1.0, 0.5, 0.25, 0.12, 0.06)  # greedy refinement steps
    ga: GaConfig = field(default_factory=GaConfig)

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if not (0 <= self.window_overlap < self.window):
            raise ValueError("window_overlap must be in [0, window)")


@dataclass
class FineResult:
    trajectories: list[np.ndarray]
    propagation: PropagationModel
    objective_trace: list[float]
    iterations: int
    converged: bool
    ga_degraded: bool = False


def _windows(T: int, window: int, overlap: int, phase: int = 0) -> list[tuple[int, int]]:
    """Overlapping window spans covering [0, T); odd phases shift the seams
    by half a stride so stitch points move between outer iterations."""
    if T <= window:
        return [(0, T)]
    stride = window - overlap
    s = 0 if phase % 2 == 0 else -(stride // 2)
    spans = []
    while True:
        a, e = max(s, 0), min(s + window, T)
        if e - a >= 2:
            spans.append((a, e))
        if e >= T:
            break
        s += stride
    return spans


def _optimize_user(
    current: np.ndarray,
    labels: np.ndarray,
    rss: np.ndarray,
    params: PropagationModel,
    env: Environment,
    mobility: MobilityConfig,
    config: FineConfig,
    rng: np.random.Generator,
    phase: int = 0,
) -> tuple[np.ndarray, bool]:
    T = labels.shape[0]
    acc = np.zeros((T, 2))
    cnt = np.zeros(T)
    degraded = False
    ov = config.window_overlap
    for s, e in _windows(T, config.window, config.window_overlap, phase):
        result = ga_search(
            labels[s:e],
            rss[s:e],
            params,
            env,
            mobility,
            config.ga,
            rng,
            seed_individual=current[s:e],
        )
        degraded |= result.degraded
        if len(result.trace) > 1:
            diffs = np.diff(np.asarray(result.trace))
            if np.any(diffs < 0):
                raise AssertionError("GA best-fitness trace decreased despite elitism")
        # crossfade weights: ramping through the overlap keeps the stitched
        # steps close to the parent window steps
        n = e - s
        w = np.ones(n)
        ramp = min(ov, n)
        if s > 0 and ramp > 0:
            w[:ramp] = np.arange(1, ramp + 1) / (ramp + 1)
        if e < T and ramp > 0:
            w[n - ramp :] = np.minimum(w[n - ramp :], np.arange(ramp, 0, -1) / (ramp + 1))
        acc[s:e] += w[:, None] * result.points
        cnt[s:e] += w
    stitched = acc / cnt[:, None]
    # crossfading can leave a point outside a non-convex region
    stitched = _project_per_region(stitched, labels, env)
    stitched = _repair_steps(stitched, labels, env, mobility)
    if config.polish_radii:
        stitched = _coordinate_polish(stitched, labels, rss, params, env, mobility, config.polish_radii)
    return stitched, degraded


_STENCIL = np.array(
    [
        [0.0, 0.0],  # keep-current first so score ties never move a point
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
        [0.7071067811865476, 0.7071067811865476],
        [-0.7071067811865476, 0.7071067811865476],
        [0.7071067811865476, -0.7071067811865476],
        [-0.7071067811865476, -0.7071067811865476],
    ]
)


def _coordinate_polish(
    points: np.ndarray,
    labels: np.ndarray,
    rss: np.ndarray,
    params: PropagationModel,
    env: Environment,
    mobility: MobilityConfig,
    radii: tuple[float, ...],
) -> np.ndarray:
    """Greedy block-coordinate ascent on the joint posterior: every slot of
    one parity moves to its best stencil offset given fixed neighbors.
    Slots of equal parity share no mobility term, so each half-sweep is
    exact coordinate ascent and never decreases the joint objective."""
    problem = _Problem(labels, rss, params, env, mobility)
    projector = _RegionProjector(labels, env)
    x = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    T = x.shape[0]
    inv_2var = 1.0 / (2.0 * mobility.speed_std**2)
    dt = mobility.slot_interval
    vbar = mobility.mean_speed

    def transition_scores(steps: np.ndarray, enforced: np.ndarray) -> np.ndarray:
        speeds = steps / dt
        score = -((speeds - vbar) ** 2) * inv_2var
        score = np.where(enforced[None, :], score, 0.0)
        score[(steps >= problem.max_step) & enforced[None, :]] = -np.inf
        return score

    for radius in radii:
        offsets = radius * _STENCIL
        for parity in (0, 1):
            cand = x[None, :, :] + offsets[:, None, :]  # (C, T, 2)
            cand = projector.project(cand)
            score = problem.slot_observation_scores(cand)  # (C, T)
            if T > 1:
                left = np.linalg.norm(cand[:, 1:, :] - x[None, :-1, :], axis=2)
                right = np.linalg.norm(cand[:, :-1, :] - x[None, 1:, :], axis=2)
                score[:, 1:] += transition_scores(left, problem.enforced)
                score[:, :-1] += transition_scores(right, problem.enforced)
            slots = np.arange(parity, T, 2)
            choice = np.argmax(score[:, slots], axis=0)
            x[slots] = cand[choice, slots]
    return x


def _repair_steps(
    points: np.ndarray, labels: np.ndarray, env: Environment, mobility: MobilityConfig
) -> np.ndarray:
    """Forward pass shrinking any over-cap step between bridgeable regions;
    the next optimization round polishes whatever this distorts."""
    max_step = mobility.max_speed * mobility.slot_interval
    out = points.copy()
    for t in range(1, out.shape[0]):
        delta = out[t] - out[t - 1]
        dist = float(np.linalg.norm(delta))
        if dist < max_step:
            continue
        a, b = int(labels[t - 1]), int(labels[t])
        if a != b:
            gap = geometry.polygon_polygon_distance(env.region(a).polygon, env.region(b).polygon)
            if gap >= max_step:
                continue  # exempt transition, nothing to repair
        cand = out[t - 1] + (0.9 * max_step / dist) * delta
        cand = geometry.project_point_into_polygon(env.region(b).polygon, cand)
        if float(np.linalg.norm(cand - out[t - 1])) < max_step:
            out[t] = cand
    return out


def alternate_location_inference(
    sequences: list[np.ndarray],
    labels: list[np.ndarray],
    env: Environment,
    mobility: MobilityConfig,
    config: FineConfig,
    seed: int,
) -> FineResult:
    """Jointly recover trajectories and propagation parameters from RSS
    sequences and per-slot region labels."""
    if len(sequences) != len(labels):
        raise ValueError("one label array per sequence is required")
    if not sequences:
        return FineResult(
            trajectories=[],
            propagation=PropagationModel.empty(env.region_count, env.ap_count, env.valid_region_matrix()),
            objective_trace=[],
            iterations=0,
            converged=True,
        )
    rng = np.random.default_rng([seed, 0xF17E])

    trajectories = []
    for rss, lab in zip(sequences, labels):
        anchors = signal_weighted_anchors(rss, env.ap_positions)
        trajectories.append(_project_per_region(anchors, lab, env))

    if config.fit_first:
        # bootstrap the propagation parameters from the anchor trajectories;
        # the nominal alpha=-20/beta=0 start otherwise rewards maximal
        # distance from every AP and derails the first search pass
        params = fit_all_propagation(
            np.vstack(trajectories), np.concatenate(labels), np.vstack(sequences), env
        )
    else:
        params = PropagationModel.empty(env.region_count, env.ap_count, env.valid_region_matrix())
        params.alpha[params.valid] = FALLBACK_ALPHA
        params.beta[params.valid] = 0.0
        params.sigma2[params.valid] = config.provisional_sigma_db**2

    def joint_objective(prop: PropagationModel) -> float:
        return sum(
            trajectory_log_posterior(x, lab, rss, prop, env, mobility)
            for x, lab, rss in zip(trajectories, labels, sequences)
        )

    trace: list[float] = []
    best_objective = -np.inf
    best_state: tuple[list[np.ndarray], PropagationModel] | None = None
    drops = 0
    converged = False
    degraded = False
    iterations = 0

    for iterations in range(1, config.max_outer_iterations + 1):
        old = [x.copy() for x in trajectories]
        for m, (rss, lab) in enumerate(zip(sequences, labels)):
            trajectories[m], was_degraded = _optimize_user(
                trajectories[m], lab, rss, params, env, mobility, config, rng, phase=iterations - 1
            )
            degraded |= was_degraded

        all_points = np.vstack(trajectories)
        all_labels = np.concatenate(labels)
        all_rss = np.vstack(sequences)
        params = fit_all_propagation(all_points, all_labels, all_rss, env)

        objective = joint_objective(params)
        trace.append(objective)
        if objective > best_objective:
            best_objective = objective
            best_state = ([x.copy() for x in trajectories], params)
            drops = 0
        else:
            drops += 1
            if drops >= config.divergence_patience:
                warnings.warn(
                    f"objective dropped for {drops} consecutive iterations; restoring best state"
                )
                trajectories, params = best_state
                break

        movement = sum(
            float(np.sum(np.linalg.norm(x - x_old, axis=1)))
            for x, x_old in zip(trajectories, old)
        )
        if movement < config.epsilon:
            converged = True
            break

    return FineResult(
        trajectories=trajectories,
        propagation=params,
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        ga_degraded=degraded,
    )
