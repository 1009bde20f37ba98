"""Ready-made synthetic environments and ground-truth worlds.

The default world is a corridor of rooms traversed left to right, mirroring
a ~770 m2 office: rooms in a row, doorway gaps in the dividing walls, and
three APs per room placed so that the elevated AP is visible a few rooms
away while the low APs stay room-local.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import AccessPoint, Environment, Region, point_in_region
from .geometry import polygon_bounds
from .mobility import MobilityConfig, RssSequence, Trajectory, generate_rss, rss_at, simulate_trajectory
from .propagation import PropagationModel

ROOM_W = 9.5
ROOM_H = 9.0
DOOR_SILL = 5.0  # dividing walls run from y=0 up to this height
_AP_LOCAL = [(2.0, 2.0), (7.5, 3.2), (4.75, 8.0)]


def corridor_environment(n_rooms: int = 9, rp_spacing: float = 0.2) -> Environment:
    """Row of n_rooms identical rooms with doorway-gapped dividing walls
    and 3 APs per room."""
    regions = []
    aps = []
    walls = []
    for j in range(n_rooms):
        x0 = ROOM_W * j
        poly = np.array([[x0, 0.0], [x0 + ROOM_W, 0.0], [x0 + ROOM_W, ROOM_H], [x0, ROOM_H]])
        regions.append(Region(id=j + 1, polygon=poly))
        for dx, dy in _AP_LOCAL:
            aps.append(AccessPoint(id=len(aps) + 1, position=np.array([x0 + dx, dy])))
        if j > 0:
            walls.append(np.array([[x0, 0.0], [x0, DOOR_SILL]]))
    return Environment(regions=regions, aps=aps, walls=walls, rp_spacing=rp_spacing)


def sample_propagation(
    env: Environment,
    rng: np.random.Generator,
    shadowing_db: float = 2.0,
    alpha_range: tuple[float, float] = (-28.0, -18.0),
    beta_range: tuple[float, float] = (-34.0, -26.0),
) -> PropagationModel:
    """Ground-truth propagation parameters for every valid (region, AP) pair."""
    model = PropagationModel.empty(env.region_count, env.ap_count, env.valid_region_matrix())
    for k in range(1, env.region_count + 1):
        for q in range(1, env.ap_count + 1):
            if model.valid[k - 1, q - 1]:
                alpha = rng.uniform(*alpha_range)
                beta = rng.uniform(*beta_range)
                model.set_entry(k, q, alpha, beta, shadowing_db**2)
    return model


def default_mobility(env: Environment, slots_per_region: float = 220.0, skip_prob: float = 0.0) -> MobilityConfig:
    return MobilityConfig(
        mean_residence={r.id: slots_per_region for r in env.regions},
        skip_prob=skip_prob,
    )


@dataclass
class SyntheticWorld:
    env: Environment
    propagation: PropagationModel
    mobility: MobilityConfig
    trajectories: list[Trajectory]
    sequences: list[RssSequence]


def simulate_world(
    env: Environment,
    mobility: MobilityConfig,
    propagation: PropagationModel,
    n_users: int,
    seed: int,
) -> SyntheticWorld:
    """Sample trajectories and RSS sequences for n_users, one deterministic
    substream per user."""
    trajectories = []
    sequences = []
    for m in range(n_users):
        rng = np.random.default_rng([seed, m])
        traj = simulate_trajectory(env, m + 1, mobility, rng)
        trajectories.append(traj)
        sequences.append(generate_rss(traj, env, propagation, rng))
    return SyntheticWorld(
        env=env,
        propagation=propagation,
        mobility=mobility,
        trajectories=trajectories,
        sequences=sequences,
    )


def sample_holdout_queries(
    env: Environment,
    propagation: PropagationModel,
    n_points: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random in-region query points with fresh RSS draws: returns
    (positions (N,2), region ids (N,), rss (N,D))."""
    positions = np.empty((n_points, 2))
    labels = np.empty(n_points, dtype=int)
    i = 0
    while i < n_points:
        # area-weighted: sample uniformly over the union bounding box
        xs = [polygon_bounds(r.polygon) for r in env.regions]
        xmin = min(b[0] for b in xs)
        ymin = min(b[1] for b in xs)
        xmax = max(b[2] for b in xs)
        ymax = max(b[3] for b in xs)
        p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        rid = point_in_region(env, p)
        if rid is None:
            continue
        positions[i] = p
        labels[i] = rid
        i += 1
    rss = rss_at(positions, labels, env, propagation, rng)
    return positions, labels, rss
