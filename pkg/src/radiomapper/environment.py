"""Indoor floor-plan model: regions, access points, walls, and the RP grid.

Region and AP ids are 1-based and must be contiguous (1..K, 1..D) so that
id-1 indexes the corresponding numpy arrays throughout the package.
Instances are treated as immutable after construction.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geometry


class ConfigError(ValueError):
    """Raised when an environment or pipeline configuration is invalid."""


@dataclass
class Region:
    id: int
    polygon: np.ndarray  # (V, 2) vertices in meters
    centroid: np.ndarray = field(init=False)

    def __post_init__(self):
        self.polygon = geometry.as_polygon(self.polygon)
        if geometry.polygon_area(self.polygon) <= 0.0:
            raise ConfigError(f"region {self.id} has zero area")
        if not geometry.is_simple_polygon(self.polygon):
            raise ConfigError(f"region {self.id} polygon is self-intersecting")
        self.centroid = geometry.polygon_centroid(self.polygon)


@dataclass
class AccessPoint:
    id: int
    position: np.ndarray  # (2,) meters
    valid_regions: frozenset[int] | None = None  # Z_q, filled by Environment

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)


@dataclass
class Environment:
    regions: list[Region]
    aps: list[AccessPoint]
    walls: list[np.ndarray] = field(default_factory=list)  # each (2, 2) segment
    rp_spacing: float = 0.2

    def __post_init__(self):
        if self.rp_spacing <= 0:
            raise ConfigError("rp_spacing must be positive")
        ids = [r.id for r in self.regions]
        if ids != list(range(1, len(self.regions) + 1)):
            raise ConfigError(f"region ids must be 1..K in order, got {ids}")
        ap_ids = [a.id for a in self.aps]
        if ap_ids != list(range(1, len(self.aps) + 1)):
            raise ConfigError(f"AP ids must be 1..D in order, got {ap_ids}")
        self.walls = [np.asarray(w, dtype=float).reshape(2, 2) for w in self.walls]
        self._check_region_overlap()
        valid = compute_valid_regions(self)
        for ap in self.aps:
            ap.valid_regions = valid[ap.id]

    def _check_region_overlap(self):
        # Sanity check, not a full polygon-intersection test: no region may
        # contain another region's centroid or hold one strictly inside it.
        for ra in self.regions:
            for rb in self.regions:
                if ra.id >= rb.id:
                    continue
                d = geometry.polygon_polygon_distance(ra.polygon, rb.polygon)
                if d > 0:
                    continue
                if geometry.point_in_polygon(ra.polygon, rb.centroid) or geometry.point_in_polygon(
                    rb.polygon, ra.centroid
                ):
                    raise ConfigError(f"regions {ra.id} and {rb.id} overlap")

    @property
    def region_count(self) -> int:
        return len(self.regions)

    @property
    def ap_count(self) -> int:
        return len(self.aps)

    @property
    def ap_positions(self) -> np.ndarray:
        return np.array([a.position for a in self.aps])

    def region(self, region_id: int) -> Region:
        return self.regions[region_id - 1]

    def valid_region_matrix(self) -> np.ndarray:
        """(K, D) boolean matrix: entry [k-1, q-1] is True iff k in Z_q."""
        mat = np.zeros((self.region_count, self.ap_count), dtype=bool)
        for ap in self.aps:
            for k in ap.valid_regions:
                mat[k - 1, ap.id - 1] = True
        return mat


def point_in_region(env: Environment, point) -> int | None:
    """Containing region id, or None. Boundary points go to the lowest id."""
    p = np.asarray(point, dtype=float)
    for region in env.regions:  # regions are sorted by id
        if geometry.point_in_polygon(region.polygon, p):
            return region.id
    return None


def compute_valid_regions(env: Environment) -> dict[int, frozenset[int]]:
    """Valid-region set Z_q per AP: host region plus every region whose
    centroid has wall-free line of sight to the AP."""
    result: dict[int, frozenset[int]] = {}
    for ap in env.aps:
        host = point_in_region(env, ap.position)
        if host is None:
            raise ConfigError(f"AP {ap.id} at {ap.position.tolist()} lies outside all regions")
        valid = {host}
        for region in env.regions:
            blocked = any(
                geometry.segments_intersect(ap.position, region.centroid, w[0], w[1])
                for w in env.walls
            )
            if not blocked:
                valid.add(region.id)
        result[ap.id] = frozenset(valid)
    return result


@dataclass
class RpGrid:
    points: np.ndarray  # (N, 2)
    region_ids: np.ndarray  # (N,) 1-based

    def __len__(self) -> int:
        return self.points.shape[0]

    def region_slice(self, region_id: int) -> np.ndarray:
        return np.where(self.region_ids == region_id)[0]

    def region_centroids(self, region_count: int) -> np.ndarray:
        """(K, 2) mean RP position per region (geometric region centers)."""
        out = np.zeros((region_count, 2))
        for k in range(1, region_count + 1):
            idx = self.region_slice(k)
            out[k - 1] = self.points[idx].mean(axis=0) if idx.size else np.array([np.nan, np.nan])
        return out


def build_rp_grid(env: Environment) -> RpGrid:
    """Regular lattice at rp_spacing clipped to each region, ordered by
    (region id, row, column). Boundary points follow the point_in_region
    tie rule, so no point is duplicated across adjacent regions."""
    spacing = env.rp_spacing
    pts = []
    ids = []
    for region in env.regions:
        xmin, ymin, xmax, ymax = geometry.polygon_bounds(region.polygon)
        nx = int(np.floor((xmax - xmin) / spacing + 1e-9)) + 1
        ny = int(np.floor((ymax - ymin) / spacing + 1e-9)) + 1
        xs = xmin + spacing * np.arange(nx)
        ys = ymin + spacing * np.arange(ny)
        gx, gy = np.meshgrid(xs, ys)
        lattice = np.column_stack([gx.ravel(), gy.ravel()])
        # row-major: y ascending, then x ascending
        order = np.lexsort((lattice[:, 0], lattice[:, 1]))
        lattice = lattice[order]
        keep = np.zeros(lattice.shape[0], dtype=bool)
        inside = geometry.points_in_polygon(region.polygon, lattice)
        for i in np.where(inside)[0]:
            keep[i] = point_in_region(env, lattice[i]) == region.id
        selected = lattice[keep]
        if selected.shape[0] == 0:
            warnings.warn(f"region {region.id} yields no RP grid points at spacing {spacing}")
            continue
        pts.append(selected)
        ids.append(np.full(selected.shape[0], region.id, dtype=int))
    if not pts:
        return RpGrid(points=np.zeros((0, 2)), region_ids=np.zeros(0, dtype=int))
    return RpGrid(points=np.vstack(pts), region_ids=np.concatenate(ids))


def environment_to_dict(env: Environment) -> dict:
    return {
        "regions": [
            {"id": r.id, "polygon": [[round(float(x), 2), round(float(y), 2)] for x, y in r.polygon]}
            for r in env.regions
        ],
        "aps": [
            {"id": a.id, "pos": [round(float(a.position[0]), 2), round(float(a.position[1]), 2)]}
            for a in env.aps
        ],
        "walls": [
            [[round(float(w[0, 0]), 2), round(float(w[0, 1]), 2)],
             [round(float(w[1, 0]), 2), round(float(w[1, 1]), 2)]]
            for w in env.walls
        ],
        "rp_spacing": env.rp_spacing,
    }


def environment_from_dict(doc: dict) -> Environment:
    regions = [Region(id=r["id"], polygon=np.array(r["polygon"], dtype=float)) for r in doc["regions"]]
    aps = [AccessPoint(id=a["id"], position=np.array(a["pos"], dtype=float)) for a in doc["aps"]]
    walls = [np.array(w, dtype=float) for w in doc.get("walls", [])]
    return Environment(regions=regions, aps=aps, walls=walls, rp_spacing=doc.get("rp_spacing", 0.2))


def save_environment(env: Environment, path) -> None:
    with open(path, "w") as fh:
        json.dump(environment_to_dict(env), fh, indent=2)
        fh.write("\n")


def load_environment(path) -> Environment:
    with open(path) as fh:
        return environment_from_dict(json.load(fh))
