"""Synthetic pedestrian trajectories and RSS sequences.

Users traverse regions in a strictly increasing visit order (occasional
skips), dwell a Poisson-distributed number of slots per region, and walk
inside each region with uniform headings and truncated-normal speeds.
Everything is a pure function of (inputs, seed), so generated data doubles
as the ground-truth oracle for the inference stages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .environment import Environment
from .propagation import MIN_DISTANCE_M, PropagationModel

RSS_FLOOR_DBM = -140.0
OUT_OF_RANGE_JITTER_DB = 3.0
_MAX_STEP_TRIES = 100


@dataclass
class MobilityConfig:
    mean_speed: float = 1.2  # m/s
    speed_std: float = 0.4  # m/s
    max_speed: float = 3.0  # m/s
    slot_interval: float = 1.0  # s
    mean_residence: dict[int, float] = field(default_factory=dict)  # region id -> slots
    skip_prob: float = 0.0

    def __post_init__(self):
        if not (0 < self.mean_speed < self.max_speed):
            raise ValueError("require 0 < mean_speed < max_speed")
        if self.speed_std <= 0:
            raise ValueError("speed_std must be positive")
        if self.slot_interval <= 0:
            raise ValueError("slot_interval must be positive")
        if not (0 <= self.skip_prob < 1):
            raise ValueError("skip_prob must be in [0, 1)")
        for k, n in self.mean_residence.items():
            if n < 1:
                raise ValueError(f"mean_residence[{k}] must be >= 1")


@dataclass
class Trajectory:
    user: int
    points: np.ndarray  # (T, 2)
    labels: np.ndarray  # (T,) region ids
    visit_order: list[int]
    residence: list[int]


@dataclass
class RssSequence:
    user: int
    observations: np.ndarray  # (T, D) dBm
    floor_dbm: float = RSS_FLOOR_DBM

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float)
        np.maximum(self.observations, self.floor_dbm, out=self.observations)

    @property
    def length(self) -> int:
        return self.observations.shape[0]


def sample_region_sequence(region_count: int, skip_prob: float, rng: np.random.Generator) -> list[int]:
    """Strictly increasing visit order over 1..K; interior regions are
    skipped independently with skip_prob, endpoints always kept."""
    if region_count < 1:
        raise ValueError("region_count must be >= 1")
    if not (0 <= skip_prob < 1):
        raise ValueError("skip_prob must be in [0, 1)")
    order = [1]
    for k in range(2, region_count):
        if rng.random() >= skip_prob:
            order.append(k)
    if region_count > 1:
        order.append(region_count)
    return order


def sample_residence_times(order, mean_residence, rng: np.random.Generator) -> list[int]:
    """Poisson draws truncated to >= 1 (zeros are redrawn)."""
    times = []
    for k in order:
        nbar = mean_residence[k]
        n = int(rng.poisson(nbar))
        while n == 0:
            n = int(rng.poisson(nbar))
        times.append(n)
    return times


def labels_from_segments(order, residence) -> np.ndarray:
    if len(order) != len(residence):
        raise ValueError(f"order and residence lengths differ: {len(order)} vs {len(residence)}")
    if any(n < 1 for n in residence):
        raise ValueError("all residence times must be >= 1")
    return np.repeat(np.asarray(order, dtype=int), np.asarray(residence, dtype=int))


def segments_from_labels(labels) -> tuple[list[int], list[int]]:
    """Run-length encode a per-slot label array back into (order, residence)."""
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0:
        return [], []
    change = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [labels.size]])
    return labels[starts].tolist(), (ends - starts).tolist()


def _sample_speed(config: MobilityConfig, rng: np.random.Generator) -> float:
    for _ in range(1000):
        v = rng.normal(config.mean_speed, config.speed_std)
        if 0.0 <= v < config.max_speed:
            return v
    return config.mean_speed


def sample_walk(polygon, n_slots: int, config: MobilityConfig, start, rng: np.random.Generator) -> np.ndarray:
    """Random walk of n_slots points inside the polygon starting at start.

    Each step draws a uniform heading and a truncated-normal speed; a
    candidate landing outside the polygon is redrawn up to 100 times, after
    which the walker stays in place for that slot.
    """
    start = np.asarray(start, dtype=float)
    if not geometry.point_in_polygon(polygon, start):
        raise ValueError("walk start point lies outside the polygon")
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    points = np.empty((n_slots, 2))
    points[0] = start
    for t in range(1, n_slots):
        prev = points[t - 1]
        nxt = prev
        for _ in range(_MAX_STEP_TRIES):
            heading = rng.uniform(0.0, 2.0 * np.pi)
            speed = _sample_speed(config, rng)
            cand = prev + speed * config.slot_interval * np.array([np.cos(heading), np.sin(heading)])
            if geometry.point_in_polygon(polygon, cand):
                nxt = cand
                break
        points[t] = nxt
    return points


def _random_point_in_polygon(polygon, rng: np.random.Generator) -> np.ndarray:
    xmin, ymin, xmax, ymax = geometry.polygon_bounds(polygon)
    for _ in range(10000):
        p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        if geometry.point_in_polygon(polygon, p):
            return p
    return geometry.polygon_centroid(polygon)


def simulate_trajectory(env: Environment, user: int, config: MobilityConfig, rng: np.random.Generator) -> Trajectory:
    """Sample a full trajectory: visit order, residence times, and per-slot
    coordinates. Each segment starts at the point of the new region closest
    to the previous segment's end."""
    order = sample_region_sequence(env.region_count, config.skip_prob, rng)
    mean_residence = config.mean_residence or {r.id: 10.0 for r in env.regions}
    residence = sample_residence_times(order, mean_residence, rng)
    labels = labels_from_segments(order, residence)

    pieces = []
    prev_end: np.ndarray | None = None
    for region_id, n in zip(order, residence):
        poly = env.region(region_id).polygon
        if prev_end is None:
            start = _random_point_in_polygon(poly, rng)
        else:
            start = geometry.project_point_into_polygon(poly, prev_end)
        walk = sample_walk(poly, n, config, start, rng)
        pieces.append(walk)
        prev_end = walk[-1]
    points = np.vstack(pieces)
    return Trajectory(user=user, points=points, labels=labels, visit_order=order, residence=residence)


def rss_at(
    points: np.ndarray,
    labels: np.ndarray,
    env: Environment,
    params: PropagationModel,
    rng: np.random.Generator,
    floor_dbm: float = RSS_FLOOR_DBM,
) -> np.ndarray:
    """(N, D) RSS matrix for arbitrary labeled positions: the log-distance
    model plus shadowing for APs whose valid set covers the position's
    region, a weak floor-level signal with uniform jitter otherwise."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    N = points.shape[0]
    D = env.ap_count
    k_idx = np.asarray(labels, dtype=int) - 1
    valid = params.valid[k_idx, :]  # (N, D)

    diff = points[:, None, :] - env.ap_positions[None, :, :]
    dist = np.maximum(np.linalg.norm(diff, axis=2), MIN_DISTANCE_M)

    alpha = params.alpha[k_idx, :]
    beta = params.beta[k_idx, :]
    sigma = np.sqrt(params.sigma2[k_idx, :])

    noise = rng.standard_normal((N, D))
    jitter = rng.uniform(0.0, OUT_OF_RANGE_JITTER_DB, size=(N, D))

    modeled = beta + alpha * np.log10(dist) + sigma * noise
    out_of_range = floor_dbm + jitter
    return np.maximum(np.where(valid, modeled, out_of_range), floor_dbm)


def generate_rss(
    traj: Trajectory,
    env: Environment,
    params: PropagationModel,
    rng: np.random.Generator,
    floor_dbm: float = RSS_FLOOR_DBM,
) -> RssSequence:
    obs = rss_at(traj.points, traj.labels, env, params, rng, floor_dbm)
    return RssSequence(user=traj.user, observations=obs, floor_dbm=floor_dbm)


def validate_trajectory(traj: Trajectory, env: Environment, config: MobilityConfig) -> None:
    """Raise AssertionError if any trajectory invariant is violated."""
    T = traj.points.shape[0]
    assert traj.labels.shape[0] == T
    assert sum(traj.residence) == T, "residence times must sum to the slot count"
    assert all(b > a for a, b in zip(traj.visit_order, traj.visit_order[1:])), "visit order not increasing"
    rec_order, rec_res = segments_from_labels(traj.labels)
    assert rec_order == traj.visit_order and rec_res == traj.residence
    max_step = config.max_speed * config.slot_interval
    boundaries = set(np.cumsum(traj.residence)[:-1].tolist())
    for t in range(1, T):
        if t in boundaries:
            continue  # cross-segment displacement is unconstrained
        step = float(np.linalg.norm(traj.points[t] - traj.points[t - 1]))
        assert step < max_step, f"slot {t}: step {step:.3f} m exceeds {max_step:.3f} m"
    for t in range(T):
        poly = env.region(int(traj.labels[t])).polygon
        assert geometry.point_in_polygon(poly, traj.points[t]), f"slot {t} outside its region"
