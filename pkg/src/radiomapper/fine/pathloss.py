"""Closed-form propagation parameter fitting and identifiability checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..environment import Environment
from ..propagation import MIN_DISTANCE_M, PropagationModel

COLLINEARITY_TOL_M = 0.1
FALLBACK_ALPHA = -20.0


@dataclass
class IdentifiabilityReport:
    region_id: int
    ok: bool
    valid_ap_count: int
    reason: str | None = None


def check_identifiability(region_id: int, env: Environment) -> IdentifiabilityReport:
    """A region is identifiable when at least three valid APs exist and they
    are not all collinear (collinear layouts flip-ambiguous across the AP
    axis)."""
    ap_ids = [ap.id for ap in env.aps if region_id in ap.valid_regions]
    n = len(ap_ids)
    if n < 3:
        return IdentifiabilityReport(
            region_id=region_id,
            ok=False,
            valid_ap_count=n,
            reason=f"only {n} valid APs; at least 3 distinct, non-collinear APs required",
        )
    pos = np.array([env.aps[q - 1].position for q in ap_ids])
    diffs = pos[:, None, :] - pos[None, :, :]
    pair_d = np.linalg.norm(diffs, axis=2)
    i, j = np.unravel_index(np.argmax(pair_d), pair_d.shape)
    if pair_d[i, j] < 1e-9:
        max_off = 0.0
    else:
        axis = (pos[j] - pos[i]) / pair_d[i, j]
        rel = pos - pos[i]
        max_off = float(np.max(np.abs(rel[:, 0] * axis[1] - rel[:, 1] * axis[0])))
    if max_off <= COLLINEARITY_TOL_M:
        return IdentifiabilityReport(
            region_id=region_id,
            ok=False,
            valid_ap_count=n,
            reason="valid APs are collinear; flip ambiguities across the AP axis",
        )
    return IdentifiabilityReport(region_id=region_id, ok=True, valid_ap_count=n)


@dataclass
class PropagationFit:
    alpha: float
    beta: float
    sigma2: float
    degenerate: bool = False


def fit_propagation(positions: np.ndarray, rss: np.ndarray, ap_position: np.ndarray) -> PropagationFit:
    """Ordinary least squares of RSS on [log10 distance, 1].

    A rank-deficient design (all sample distances equal) falls back to the
    default exponent with an intercept matching the sample mean, flagged
    degenerate. Distances are clamped at the log singularity.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    rss = np.asarray(rss, dtype=float).ravel()
    if positions.shape[0] != rss.shape[0]:
        raise ValueError("positions and rss must pair up")
    d = np.maximum(np.linalg.norm(positions - np.asarray(ap_position, dtype=float), axis=1), MIN_DISTANCE_M)
    logd = np.log10(d)
    n = rss.shape[0]
    if n < 2 or float(logd.max() - logd.min()) < 1e-12:
        alpha = FALLBACK_ALPHA
        beta = float(np.mean(rss) - alpha * np.mean(logd)) if n else 0.0
        resid = rss - (beta + alpha * logd) if n else np.zeros(0)
        sigma2 = float(np.mean(resid**2)) if n else 0.0
        return PropagationFit(alpha=alpha, beta=beta, sigma2=sigma2, degenerate=True)
    design = np.column_stack([logd, np.ones(n)])
    coef, _, rank, _ = np.linalg.lstsq(design, rss, rcond=None)
    if rank < 2:
        alpha = FALLBACK_ALPHA
        beta = float(np.mean(rss) - alpha * np.mean(logd))
        resid = rss - (beta + alpha * logd)
        return PropagationFit(alpha=alpha, beta=beta, sigma2=float(np.mean(resid**2)), degenerate=True)
    alpha, beta = float(coef[0]), float(coef[1])
    resid = rss - design @ coef
    return PropagationFit(alpha=alpha, beta=beta, sigma2=float(np.mean(resid**2)), degenerate=False)


def fit_all_propagation(
    points: np.ndarray,
    labels: np.ndarray,
    rss: np.ndarray,
    env: Environment,
    sigma2_floor: float = 1e-12,
) -> PropagationModel:
    """Fit every valid (region, AP) pair from located samples. Regions with
    no samples keep default parameters (degenerate fallback values)."""
    K, D = env.region_count, env.ap_count
    model = PropagationModel.empty(K, D, env.valid_region_matrix())
    labels = np.asarray(labels, dtype=int)
    for k in range(1, K + 1):
        mask = labels == k
        for q in range(1, D + 1):
            if not model.valid[k - 1, q - 1]:
                continue
            if not mask.any():
                model.set_entry(k, q, FALLBACK_ALPHA, 0.0, 64.0)
                continue
            fit = fit_propagation(points[mask], rss[mask, q - 1], env.aps[q - 1].position)
            model.set_entry(k, q, fit.alpha, fit.beta, max(fit.sigma2, sigma2_floor))
    return model
