"""Per-region low-rank Gaussian (probabilistic PCA) emission models.

Each region's embedded observations are modeled as mean + basis-projected
coefficients + isotropic noise; the implied covariance is
C = U diag(coeff_var) U^T + noise_var * I. Log densities are always
evaluated through the rank-d decomposition, never a dense D x D inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NOISE_FLOOR = 1e-6


@dataclass
class SubspaceEntry:
    mean: np.ndarray  # (D,)
    basis: np.ndarray  # (D, d) orthonormal columns
    coeff_var: np.ndarray  # (d,) >= 0
    noise_var: float  # > 0
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def covariance(self) -> np.ndarray:
        """Dense covariance, for diagnostics and tests only."""
        D = self.mean.shape[0]
        return self.basis @ np.diag(self.coeff_var) @ self.basis.T + self.noise_var * np.eye(D)


def fit_subspace(data: np.ndarray, dim: int, global_variance: float = 1.0) -> SubspaceEntry:
    """Eigendecompose the cluster scatter: top-dim eigenvectors become the
    basis, the trailing eigenvalue mean becomes the noise variance (floored),
    and coefficient variances are the top eigenvalues minus the noise.

    Clusters with <= dim samples fall back to canonical axes with the global
    variance and are flagged degenerate.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, D = data.shape
    if dim < 1 or dim > D:
        raise ValueError(f"subspace dim must be in [1, {D}], got {dim}")
    if n <= dim:
        mean = data.mean(axis=0) if n else np.zeros(D)
        basis = np.eye(D)[:, :dim]
        return SubspaceEntry(
            mean=mean,
            basis=basis,
            coeff_var=np.zeros(dim),
            noise_var=max(float(global_variance), NOISE_FLOOR),
            degenerate=True,
        )

    mean = data.mean(axis=0)
    centered = data - mean
    scatter = centered.T @ centered / n
    eigvals, eigvecs = np.linalg.eigh(scatter)  # ascending
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    top = eigvals[:dim]
    trailing = eigvals[dim:]
    noise_var = max(float(trailing.mean()) if trailing.size else 0.0, NOISE_FLOOR)
    coeff_var = np.maximum(top - noise_var, 0.0)
    return SubspaceEntry(
        mean=mean,
        basis=eigvecs[:, :dim],
        coeff_var=coeff_var,
        noise_var=noise_var,
        degenerate=False,
    )


def obs_loglik(data: np.ndarray, entry: SubspaceEntry) -> np.ndarray:
    """Gaussian log density of each row under the entry's low-rank model.

    Uses the matrix-inversion lemma: with z = y - mean and w = U^T z,
    the Mahalanobis term is (|z|^2 - sum_i cv_i/(cv_i + s2) * w_i^2) / s2
    and log|C| = sum_i log(cv_i + s2) + (D - d) log s2.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    D = data.shape[1]
    s2 = entry.noise_var
    cv = entry.coeff_var
    z = data - entry.mean
    w = z @ entry.basis  # (n, d)
    shrink = cv / (cv + s2)
    quad = (np.sum(z * z, axis=1) - np.sum(shrink * w * w, axis=1)) / s2
    logdet = float(np.sum(np.log(cv + s2))) + (D - entry.dim) * np.log(s2)
    return -0.5 * (D * np.log(2.0 * np.pi) + logdet + quad)


@dataclass
class RegionSubspaces:
    entries: list[SubspaceEntry]

    @property
    def region_count(self) -> int:
        return len(self.entries)

    def loglik_matrix(self, data: np.ndarray) -> np.ndarray:
        """(T, K) per-slot log densities under every region's model."""
        cols = [obs_loglik(data, e) for e in self.entries]
        return np.column_stack(cols)


def fit_region_subspaces(data: np.ndarray, labels: np.ndarray, region_count: int, dim: int) -> RegionSubspaces:
    """Fit one subspace per region id 1..K from labeled embeddings; empty or
    tiny clusters get the degenerate fallback around the global statistics."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    labels = np.asarray(labels, dtype=int)
    global_var = float(np.var(data)) if data.size else 1.0
    entries = []
    for k in range(1, region_count + 1):
        cluster = data[labels == k]
        if cluster.shape[0] == 0:
            entry = fit_subspace(np.zeros((0, data.shape[1])), dim, global_variance=global_var)
            entry.mean = data.mean(axis=0)
        else:
            entry = fit_subspace(cluster, dim, global_variance=global_var)
        entries.append(entry)
    return RegionSubspaces(entries=entries)
