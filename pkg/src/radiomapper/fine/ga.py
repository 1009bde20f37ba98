"""Region-constrained genetic search over whole trajectories.

Individuals are complete (T, 2) coordinate sequences confined slot-by-slot
to their labeled regions. Fitness is the joint log posterior: masked
log-Gaussian RSS likelihoods under the current propagation parameters plus
the Markov mobility score between consecutive slots. Crossover applies a
convex blend of two parents (one weight per child, so feasible parents
yield feasible children), mutation adds clamped Gaussian steps per slot
plus occasional tapered span offsets, and tournament selection with
elitism keeps the best fitness non-decreasing. All operators are
vectorized across the population.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import geometry
from ..environment import Environment
from ..mobility import MobilityConfig, segments_from_labels
from ..propagation import MIN_DISTANCE_M, PropagationModel
from .pathloss import check_identifiability


@dataclass
class GaConfig:
    population: int = 100
    generations: int = 50
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    tournament_size: int = 5
    mutation_step: float = 0.5  # meters
    elitism: int = 1
    span_mutation_rate: float = 0.3  # chance of one correlated-span mutation per child
    span_mutation_scale: float = 3.0  # span offset scale, in mutation_step units
    stall_generations: int | None = None  # stop early after this many flat generations

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        if not (1 <= self.tournament_size <= self.population):
            raise ValueError("tournament_size must be in [1, population]")
        if self.elitism < 1:
            raise ValueError("elitism must be >= 1")


class _RegionProjector:
    """Vectorized per-slot projection of population points into their
    labeled region polygons, with a clamp fast path for rectangles."""

    def __init__(self, labels: np.ndarray, env: Environment):
        self.groups: list[tuple[np.ndarray, np.ndarray | None, np.ndarray | None]] = []
        for k in np.unique(labels):
            poly = env.region(int(k)).polygon
            slots = np.where(labels == k)[0]
            if geometry.is_axis_aligned_rectangle(poly):
                xmin, ymin, xmax, ymax = geometry.polygon_bounds(poly)
                self.groups.append((slots, np.array([xmin, ymin]), np.array([xmax, ymax])))
            else:
                self.groups.append((slots, None, poly))

    def project(self, pop: np.ndarray) -> np.ndarray:
        """Projection of a (S, T, 2) population; returns pop (modified)."""
        for slots, lo, hi_or_poly in self.groups:
            if lo is not None:
                pop[:, slots, :] = np.clip(pop[:, slots, :], lo, hi_or_poly)
            else:
                sub = pop[:, slots, :].reshape(-1, 2)
                pop[:, slots, :] = geometry.project_points_into_polygon(hi_or_poly, sub).reshape(
                    pop.shape[0], slots.size, 2
                )
        return pop


class _Problem:
    """Precomputed per-sequence arrays shared by fitness evaluations."""

    def __init__(
        self,
        labels: np.ndarray,
        rss: np.ndarray,
        params: PropagationModel,
        env: Environment,
        mobility: MobilityConfig,
    ):
        self.labels = np.asarray(labels, dtype=int)
        self.rss = np.asarray(rss, dtype=float)
        self.env = env
        self.mobility = mobility
        T = self.labels.shape[0]
        if self.rss.shape[0] != T:
            raise ValueError("labels and RSS lengths differ")
        if np.any(self.labels < 1) or np.any(self.labels > env.region_count):
            raise ValueError("labels reference unknown regions")
        k_idx = self.labels - 1
        self.valid = params.valid[k_idx, :] & np.isfinite(params.alpha[k_idx, :])
        alpha = np.where(self.valid, np.nan_to_num(params.alpha[k_idx, :]), 0.0)
        beta = np.where(self.valid, np.nan_to_num(params.beta[k_idx, :]), 0.0)
        sigma2 = np.maximum(np.nan_to_num(params.sigma2[k_idx, :], nan=1.0), 1e-12)
        inv_two_sigma2 = np.where(self.valid, 0.5 / sigma2, 0.0)
        # the Gaussian normalizers do not depend on the candidate: fold them
        # into a single constant and keep only the weighted-residual part
        self.obs_const = float(np.sum(np.where(self.valid, -0.5 * np.log(2.0 * np.pi * sigma2), 0.0)))
        self.alpha_half = (0.5 * alpha).astype(np.float32)
        self.beta32 = beta.astype(np.float32)
        self.rss_masked = np.where(self.valid, self.rss, 0.0).astype(np.float32)
        self.weight32 = inv_two_sigma2.astype(np.float32)
        self.ap_pos = env.ap_positions
        self.ap_pos32 = self.ap_pos.astype(np.float32)
        self.ap_sq32 = np.sum(self.ap_pos32**2, axis=1)

        self.max_step = mobility.max_speed * mobility.slot_interval
        self.speed_log_norm = -np.log(np.sqrt(2.0 * np.pi) * mobility.speed_std)
        # transitions whose region pair cannot be bridged within one slot are
        # exempt from the mobility term: otherwise every candidate would
        # score -inf and the search could not rank individuals
        self.enforced = np.ones(T - 1 if T > 1 else 0, dtype=bool)
        for t in range(T - 1):
            a, b = self.labels[t], self.labels[t + 1]
            if a != b:
                d = geometry.polygon_polygon_distance(
                    env.region(int(a)).polygon, env.region(int(b)).polygon
                )
                if d >= self.max_step:
                    self.enforced[t] = False

    def slot_observation_scores(self, population: np.ndarray) -> np.ndarray:
        """(S, T) per-slot weighted-residual observation scores (an additive
        constant away from the per-slot log likelihood)."""
        pop32 = population.astype(np.float32)
        work = pop32 @ self.ap_pos32.T
        pop_sq = np.einsum("stc,stc->st", pop32, pop32)
        work *= -2.0
        work += pop_sq[:, :, None]
        work += self.ap_sq32[None, None, :]
        np.maximum(work, np.float32(MIN_DISTANCE_M**2), out=work)
        np.log10(work, out=work)
        work *= self.alpha_half[None]
        work += self.beta32[None]
        work -= self.rss_masked[None]
        np.square(work, out=work)
        work *= self.weight32[None]
        return -work.sum(axis=2, dtype=np.float64)

    def fitness(self, population: np.ndarray) -> np.ndarray:
        """(S,) joint log posterior for a (S, T, 2) population whose points
        already satisfy the region constraints. The heavy per-AP arithmetic
        runs in float32 with in-place updates; sums accumulate in float64."""
        pop32 = population.astype(np.float32)
        S, T, _ = pop32.shape
        work = pop32 @ self.ap_pos32.T  # (S, T, D), reused in place below
        pop_sq = np.einsum("stc,stc->st", pop32, pop32)
        work *= -2.0
        work += pop_sq[:, :, None]
        work += self.ap_sq32[None, None, :]
        np.maximum(work, np.float32(MIN_DISTANCE_M**2), out=work)
        np.log10(work, out=work)  # = 2 log10 d
        work *= self.alpha_half[None]
        work += self.beta32[None]
        work -= self.rss_masked[None]
        np.square(work, out=work)
        work *= self.weight32[None]
        obs = self.obs_const - work.sum(axis=(1, 2), dtype=np.float64)
        if T < 2:
            return obs
        pop = population
        steps = np.linalg.norm(pop[:, 1:, :] - pop[:, :-1, :], axis=2)  # (S, T-1)
        speeds = steps / self.mobility.slot_interval
        n_enforced = int(self.enforced.sum())
        dev = np.where(self.enforced[None], speeds - self.mobility.mean_speed, 0.0)
        mob = n_enforced * self.speed_log_norm - np.sum(dev**2, axis=1) / (
            2.0 * self.mobility.speed_std**2
        )
        violated = np.any((steps >= self.max_step) & self.enforced[None], axis=1)
        total = obs + mob
        total[violated] = -np.inf
        return total


def trajectory_log_posterior(
    points: np.ndarray,
    labels: np.ndarray,
    rss: np.ndarray,
    params: PropagationModel,
    env: Environment,
    mobility: MobilityConfig,
) -> float:
    """Joint log posterior of one candidate trajectory: -inf if any point
    leaves its labeled region or any enforced displacement reaches the
    speed cap."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels, dtype=int)
    if points.shape[0] != labels.shape[0]:
        raise ValueError("points and labels lengths differ")
    for k in np.unique(labels):
        mask = labels == k
        inside = geometry.points_in_polygon(env.region(int(k)).polygon, points[mask])
        if not np.all(inside):
            return -np.inf
    problem = _Problem(labels, rss, params, env, mobility)
    return float(problem.fitness(points[None])[0])


def _segment_gates(labels: np.ndarray, env: Environment) -> list[tuple[int, int, np.ndarray]]:
    """(region, n_slots, exit-gate point) per segment; the gate is the point
    of the segment's region nearest to the next segment's region."""
    order, durs = segments_from_labels(labels)
    gates = []
    for i, (k, n) in enumerate(zip(order, durs)):
        poly = env.region(k).polygon
        if i + 1 < len(order):
            nxt_poly = env.region(order[i + 1]).polygon
            gate = geometry.project_point_into_polygon(poly, geometry.polygon_centroid(nxt_poly))
        else:
            gate = geometry.polygon_centroid(poly)
        gates.append((k, n, gate))
    return gates


def _steered_walks(
    n_walks: int,
    labels: np.ndarray,
    env: Environment,
    mobility: MobilityConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """(n_walks, T, 2) random walks respecting per-slot regions, drifting
    toward each segment's exit so cross-segment steps stay feasible."""
    T = labels.shape[0]
    pop = np.empty((n_walks, T, 2))
    projector = _RegionProjector(labels, env)
    step_cap = 0.95 * mobility.max_speed * mobility.slot_interval
    t = 0
    x = None  # (n_walks, 2) current positions
    for k, n, gate in _segment_gates(labels, env):
        poly = env.region(k).polygon
        xmin, ymin, xmax, ymax = geometry.polygon_bounds(poly)
        if x is None:
            x = np.column_stack(
                [rng.uniform(xmin, xmax, n_walks), rng.uniform(ymin, ymax, n_walks)]
            )
        x = geometry.project_points_into_polygon(poly, x)
        pop[:, t, :] = x
        for i in range(1, n):
            remaining = n - i
            to_gate = gate[None, :] - x
            dist = np.linalg.norm(to_gate, axis=1)
            speed = np.clip(
                rng.normal(mobility.mean_speed, mobility.speed_std, n_walks), 0.0, step_cap
            )
            urgency = dist / np.maximum(
                remaining * mobility.mean_speed * mobility.slot_interval, 1e-9
            )
            angles = rng.uniform(0.0, 2.0 * np.pi, n_walks)
            rand_dir = np.column_stack([np.cos(angles), np.sin(angles)])
            gate_dir = to_gate / np.maximum(dist, 1e-9)[:, None]
            gate_dir += 0.3 * rng.standard_normal((n_walks, 2))
            gate_dir /= np.maximum(np.linalg.norm(gate_dir, axis=1), 1e-9)[:, None]
            use_gate = (urgency > 0.8) & (dist > 1e-9)
            direction = np.where(use_gate[:, None], gate_dir, rand_dir)
            cand = x + speed[:, None] * mobility.slot_interval * direction
            cand = geometry.project_points_into_polygon(poly, cand)
            jumped = np.linalg.norm(cand - x, axis=1) >= mobility.max_speed * mobility.slot_interval
            cand[jumped] = x[jumped]
            x = cand
            pop[:, t + i, :] = x
        t += n
    return projector.project(pop)


@dataclass
class GaResult:
    points: np.ndarray  # (T, 2) best individual
    fitness: float
    trace: list[float] = field(default_factory=list)  # best fitness per generation
    degraded: bool = False  # an identifiability precondition failed


def ga_search(
    labels: np.ndarray,
    rss: np.ndarray,
    params: PropagationModel,
    env: Environment,
    mobility: MobilityConfig,
    config: GaConfig,
    rng: np.random.Generator,
    seed_individual: np.ndarray | None = None,
) -> GaResult:
    """Evolve a population of region-constrained trajectories and return the
    best one after the configured number of generations.

    When seed_individual is given (warm start from an outer optimization
    loop), it joins the initial population along with mutated copies;
    elitism then guarantees the result is never worse than the seed.
    """
    labels = np.asarray(labels, dtype=int)
    degraded = False
    for k in sorted(set(labels.tolist())):
        report = check_identifiability(int(k), env)
        if not report.ok:
            warnings.warn(f"region {k}: {report.reason}")
            degraded = True

    problem = _Problem(labels, rss, params, env, mobility)
    projector = _RegionProjector(labels, env)
    T = labels.shape[0]
    S = config.population

    if seed_individual is not None:
        n_seeded = max(1, min(S // 2, S - 1))
        seed_points = np.asarray(seed_individual, dtype=float)[None].copy()
        seed_points = projector.project(seed_points)
        fresh = _steered_walks(S - n_seeded, labels, env, mobility, rng)
        # smooth variations of the seed: whole-trajectory shifts plus a
        # Brownian wiggle, so the variants stay kinematically feasible
        n_mut = n_seeded - 1
        shift = 2.0 * config.mutation_step * rng.standard_normal((n_mut, 1, 2))
        wiggle = np.cumsum(
            0.3 * config.mutation_step * rng.standard_normal((n_mut, T, 2)), axis=1
        )
        mutated = seed_points + shift + wiggle
        pop = np.concatenate([seed_points, projector.project(mutated), fresh], axis=0)
    else:
        pop = _steered_walks(S, labels, env, mobility, rng)

    fit = problem.fitness(pop)
    trace: list[float] = [float(fit.max())]
    e = min(config.elitism, S - 1)
    n_off = S - e
    rows = np.arange(n_off)
    stall = 0

    for _ in range(config.generations):
        elite_idx = np.argsort(-fit, kind="stable")[:e]

        ta = rng.integers(0, S, (n_off, config.tournament_size))
        pa = ta[rows, np.argmax(fit[ta], axis=1)]
        tb = rng.integers(0, S, (n_off, config.tournament_size))
        pb = tb[rows, np.argmax(fit[tb], axis=1)]
        # one lambda per child: a convex blend of two feasible trajectories
        # keeps every step inside the speed cap
        lam = rng.uniform(0.0, 1.0, (n_off, 1, 1))
        do_cross = rng.random(n_off) < config.crossover_rate
        children = np.where(do_cross[:, None, None], lam * pop[pa] + (1.0 - lam) * pop[pb], pop[pa])
        mut_mask = rng.random((n_off, T)) < config.mutation_rate
        noise = config.mutation_step * rng.standard_normal((n_off, T, 2))
        children = children + np.where(mut_mask[:, :, None], noise, 0.0)
        # correlated span mutation: a tapered common offset over a contiguous
        # stretch moves whole sub-paths without breaking smoothness
        do_span = rng.random(n_off) < config.span_mutation_rate
        span_len = rng.integers(5, max(6, T // 2), n_off)
        span_start = rng.integers(0, T, n_off)
        span_off = config.span_mutation_scale * config.mutation_step * rng.standard_normal((n_off, 2))
        for i in np.where(do_span)[0]:
            a = int(span_start[i])
            b = min(int(a + span_len[i]), T)
            w = np.bartlett(b - a + 2)[1:-1, None]
            children[i, a:b] += w * span_off[i]
        children = projector.project(children)

        new_pop = np.concatenate([pop[elite_idx], children], axis=0)
        new_fit = np.concatenate([fit[elite_idx], problem.fitness(children)])
        pop, fit = new_pop, new_fit
        best = float(fit.max())
        if best > trace[-1]:
            stall = 0
        else:
            stall += 1
        trace.append(best)
        if config.stall_generations is not None and stall >= config.stall_generations:
            break

    best_idx = int(np.argmax(fit))
    return GaResult(
        points=pop[best_idx].copy(), fitness=float(fit[best_idx]), trace=trace, degraded=degraded
    )


def _project_per_region(points: np.ndarray, labels: np.ndarray, env: Environment) -> np.ndarray:
    """Project a single (T, 2) trajectory into its per-slot regions."""
    out = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    return _RegionProjector(np.asarray(labels, dtype=int), env).project(out[None])[0]
