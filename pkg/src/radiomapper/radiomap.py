"""RP-indexed fingerprint map construction and KNN localization.

Located samples snap to their nearest same-region reference point within
half a grid-cell diagonal; covered RPs average their samples per AP.
Uncovered entries come from the fitted path-loss model where the region is
in the AP's valid set, and from inverse-distance interpolation over covered
RPs otherwise, falling back to the floor value when nothing is covered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Environment, RpGrid
from .mobility import RSS_FLOOR_DBM
from .propagation import MIN_DISTANCE_M, PropagationModel

PROVENANCE_MEASURED = 0
PROVENANCE_MODEL = 1
PROVENANCE_INTERPOLATED = 2
PROVENANCE_NAMES = {
    PROVENANCE_MEASURED: "measured-average",
    PROVENANCE_MODEL: "model-filled",
    PROVENANCE_INTERPOLATED: "interpolated",
}

IDW_POWER = 2.0
IDW_NEIGHBORS = 4
MIN_SHARED_DIMS = 3


class LocalizationError(RuntimeError):
    """Raised when a query cannot be matched against the radio map."""


@dataclass
class RadioMap:
    points: np.ndarray  # (N, 2) RP coordinates
    region_ids: np.ndarray  # (N,)
    values: np.ndarray  # (N, D) dBm
    provenance: np.ndarray  # (N, D) int8 codes
    floor_dbm: float = RSS_FLOOR_DBM

    @property
    def rp_count(self) -> int:
        return self.points.shape[0]

    @property
    def ap_count(self) -> int:
        return self.values.shape[1]


def build_radio_map(
    grid: RpGrid,
    sample_points: np.ndarray,
    sample_labels: np.ndarray,
    sample_rss: np.ndarray,
    params: PropagationModel,
    env: Environment,
    floor_dbm: float = RSS_FLOOR_DBM,
) -> RadioMap:
    """Assemble the full fingerprint table from located samples plus the
    fitted propagation model."""
    N = len(grid)
    D = env.ap_count
    snap_radius = env.rp_spacing / np.sqrt(2.0)

    sums = np.zeros((N, D))
    counts = np.zeros(N)
    sample_points = np.atleast_2d(np.asarray(sample_points, dtype=float))
    sample_labels = np.asarray(sample_labels, dtype=int)
    sample_rss = np.atleast_2d(np.asarray(sample_rss, dtype=float))

    for k in np.unique(sample_labels):
        rp_idx = grid.region_slice(int(k))
        if rp_idx.size == 0:
            continue
        mask = sample_labels == k
        pts = sample_points[mask]
        rss = sample_rss[mask]
        d = np.linalg.norm(pts[:, None, :] - grid.points[rp_idx][None, :, :], axis=2)
        nearest = np.argmin(d, axis=1)
        dist = d[np.arange(pts.shape[0]), nearest]
        ok = dist <= snap_radius
        for i in np.where(ok)[0]:
            j = rp_idx[nearest[i]]
            sums[j] += rss[i]
            counts[j] += 1.0

    values = np.full((N, D), floor_dbm)
    provenance = np.full((N, D), PROVENANCE_INTERPOLATED, dtype=np.int8)

    covered = counts > 0
    values[covered] = sums[covered] / counts[covered, None]
    provenance[covered] = PROVENANCE_MEASURED

    k_idx = grid.region_ids - 1
    ap_pos = env.ap_positions
    dists = np.maximum(
        np.linalg.norm(grid.points[:, None, :] - ap_pos[None, :, :], axis=2), MIN_DISTANCE_M
    )
    model_vals = params.beta[k_idx, :] + params.alpha[k_idx, :] * np.log10(dists)
    valid = params.valid[k_idx, :] & np.isfinite(model_vals)

    uncovered = ~covered
    use_model = uncovered[:, None] & valid
    values[use_model] = model_vals[use_model]
    provenance[use_model] = PROVENANCE_MODEL

    # inverse-distance interpolation for uncovered out-of-valid entries
    need_interp = uncovered[:, None] & ~valid
    if need_interp.any():
        cov_idx = np.where(covered)[0]
        rows = np.where(need_interp.any(axis=1))[0]
        if cov_idx.size > 0:
            for i in rows:
                d = np.linalg.norm(grid.points[cov_idx] - grid.points[i], axis=1)
                order = np.argsort(d, kind="stable")[:IDW_NEIGHBORS]
                nn = cov_idx[order]
                w = 1.0 / np.maximum(d[order], 1e-9) ** IDW_POWER
                interp = w @ values[nn] / w.sum()
                cols = need_interp[i]
                values[i, cols] = interp[cols]
        # with no covered RP at all the floor default stands

    np.maximum(values, floor_dbm, out=values)
    return RadioMap(
        points=grid.points.copy(),
        region_ids=grid.region_ids.copy(),
        values=values,
        provenance=provenance,
        floor_dbm=floor_dbm,
    )


def knn_localize(query_rss: np.ndarray, radio_map: RadioMap, k: int = 5) -> np.ndarray:
    """Mean position of the K reference points nearest in RSS space.

    The distance per RP uses only dimensions where both the query and the
    fingerprint exceed the floor; RPs sharing fewer than 3 such dimensions
    are excluded. Distance ties resolve by RP order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query_rss, dtype=float).ravel()
    if q.shape[0] != radio_map.ap_count:
        raise ValueError("query dimension does not match the map")
    shared = (q[None, :] > radio_map.floor_dbm) & (radio_map.values > radio_map.floor_dbm)
    n_shared = shared.sum(axis=1)
    eligible = n_shared >= MIN_SHARED_DIMS
    if not eligible.any():
        raise LocalizationError(
            f"query shares fewer than {MIN_SHARED_DIMS} valid dimensions with every reference point"
        )
    diff = np.where(shared, radio_map.values - q[None, :], 0.0)
    dist = np.sqrt(np.sum(diff**2, axis=1))
    dist[~eligible] = np.inf
    order = np.argsort(dist, kind="stable")[: min(k, int(eligible.sum()))]
    return radio_map.points[order].mean(axis=0)


def save_radio_map(radio_map: RadioMap, path) -> None:
    D = radio_map.ap_count
    header = (
        ["rp_x", "rp_y", "region"]
        + [f"ap_{q}" for q in range(1, D + 1)]
        + [f"provenance_{q}" for q in range(1, D + 1)]
    )
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(radio_map.rp_count):
            row = [
                f"{radio_map.points[i, 0]:.3f}",
                f"{radio_map.points[i, 1]:.3f}",
                str(int(radio_map.region_ids[i])),
            ]
            row += [f"{v:.2f}" for v in radio_map.values[i]]
            row += [PROVENANCE_NAMES[int(p)] for p in radio_map.provenance[i]]
            fh.write(",".join(row) + "\n")


def load_radio_map(path) -> RadioMap:
    name_to_code = {v: k for k, v in PROVENANCE_NAMES.items()}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        D = sum(1 for h in header if h.startswith("ap_"))
        pts, regions, values, prov = [], [], [], []
        for line in fh:
            parts = line.strip().split(",")
            pts.append([float(parts[0]), float(parts[1])])
            regions.append(int(parts[2]))
            values.append([float(v) for v in parts[3 : 3 + D]])
            prov.append([name_to_code[p] for p in parts[3 + D : 3 + 2 * D]])
    return RadioMap(
        points=np.array(pts),
        region_ids=np.array(regions, dtype=int),
        values=np.array(values),
        provenance=np.array(prov, dtype=np.int8),
    )
