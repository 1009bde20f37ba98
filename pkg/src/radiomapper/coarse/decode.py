"""Segment-level MAP decoding over ordered region visits.

The decoder maximizes, over strictly increasing region orders r and
positive durations n summing to T, the score

    sum_k [ duration log-pmf + per-slot observation log-likelihoods ]
    + sum_k transition log-prior(r_k -> r_{k+1})

with Poisson durations and a skip-aware transition prior. Dynamic
programming is exact up to the duration cap; ties resolve toward fewer
segments, then smaller region indices, then shorter leading durations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


def residence_log_pmf(n, nbar) -> np.ndarray | float:
    """log Poisson(n; nbar) via log-gamma, safe for large n."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise ValueError("residence durations must be >= 1")
    if np.any(np.asarray(nbar) <= 0):
        raise ValueError("mean residence must be positive")
    out = n_arr * np.log(nbar) - np.asarray(nbar, dtype=float) - gammaln(n_arr + 1.0)
    return float(out) if np.isscalar(n) and np.isscalar(nbar) else out


def transition_log_prior(from_region: int, to_region: int, residence_means: np.ndarray) -> float:
    """Skip-aware forward transition score (unnormalized, like the model):
    ln[(nbar_from + nbar_to) / sum_{j=from..to} nbar_j]; backward or
    self transitions are forbidden."""
    nbar = np.asarray(residence_means, dtype=float)
    K = nbar.shape[0]
    if not (1 <= from_region <= K and 1 <= to_region <= K):
        raise ValueError(f"regions must be in 1..{K}")
    if to_region <= from_region:
        return -np.inf
    num = nbar[from_region - 1] + nbar[to_region - 1]
    den = float(np.sum(nbar[from_region - 1 : to_region]))
    return float(np.log(num / den))


def transition_matrix(residence_means: np.ndarray) -> np.ndarray:
    """(K, K) matrix of transition log-priors, -inf at and below the diagonal."""
    nbar = np.asarray(residence_means, dtype=float)
    K = nbar.shape[0]
    mat = np.full((K, K), -np.inf)
    csum = np.concatenate([[0.0], np.cumsum(nbar)])
    for a in range(K):
        for b in range(a + 1, K):
            mat[a, b] = np.log((nbar[a] + nbar[b]) / (csum[b + 1] - csum[a]))
    return mat


@dataclass
class DecodeResult:
    order: list[int]  # visited region ids (1-based), strictly increasing
    durations: list[int]
    labels: np.ndarray  # (T,)
    score: float


def segmentation_score(
    loglik: np.ndarray, residence_means: np.ndarray, order, durations
) -> float:
    """Score of an explicit segmentation under the decoder's objective."""
    loglik = np.atleast_2d(loglik)
    T = loglik.shape[0]
    if sum(durations) != T:
        raise ValueError("durations must sum to the sequence length")
    score = 0.0
    t = 0
    for i, (k, d) in enumerate(zip(order, durations)):
        score += residence_log_pmf(d, residence_means[k - 1])
        score += float(loglik[t : t + d, k - 1].sum())
        if i > 0:
            score += transition_log_prior(order[i - 1], k, residence_means)
        t += d
    return score


def viterbi_decode(loglik: np.ndarray, residence_means: np.ndarray, max_dur: int) -> DecodeResult:
    """Exact MAP segmentation with durations capped at max_dur.

    Backward DP over states (t consumed slots, previous region); the same
    candidate expressions drive both the table and the reconstruction, so
    the returned score is bit-identical to the table optimum.
    """
    loglik = np.atleast_2d(np.asarray(loglik, dtype=float))
    T, K = loglik.shape
    if T < 1:
        raise ValueError("sequence must contain at least one slot")
    if max_dur < 1:
        raise ValueError("max_dur must be >= 1")
    nbar = np.asarray(residence_means, dtype=float)
    if nbar.shape[0] != K:
        raise ValueError("residence_means length must match region count")

    dmax = min(max_dur, T)
    durs = np.arange(1, dmax + 1, dtype=float)
    dur_lp = (
        durs[None, :] * np.log(nbar)[:, None]
        - nbar[:, None]
        - gammaln(durs + 1.0)[None, :]
    )  # (K, dmax)

    trans = transition_matrix(nbar)
    # prev-state row 0 = "no previous region" (uniform initial prior)
    trans_aug = np.vstack([np.zeros(K), trans])  # (K+1, K)

    cum = np.vstack([np.zeros(K), np.cumsum(loglik, axis=0)])  # (T+1, K)

    B = np.full((T + 1, K + 1), -np.inf)
    S = np.zeros((T + 1, K + 1))
    B[T, :] = 0.0
    ptr_k = np.zeros((T, K + 1), dtype=int)
    ptr_d = np.zeros((T, K + 1), dtype=int)

    big = np.inf
    for t in range(T - 1, -1, -1):
        dm = min(dmax, T - t)
        obs_part = (cum[t + 1 : t + dm + 1, :] - cum[t, :]).T  # (K, dm)
        seg_scores = dur_lp[:, :dm] + obs_part + B[t + 1 : t + dm + 1, 1:].T
        seg_counts = 1.0 + S[t + 1 : t + dm + 1, 1:].T

        row_max = seg_scores.max(axis=1)  # (K,)
        tie = seg_scores == row_max[:, None]
        counts_masked = np.where(tie, seg_counts, big)
        d_choice = counts_masked.argmin(axis=1)
        best_count = counts_masked[np.arange(K), d_choice]

        M = trans_aug + row_max[None, :]  # (K+1, K)
        p_max = M.max(axis=1)
        tie2 = M == p_max[:, None]
        counts2 = np.where(tie2, best_count[None, :], big)
        k_choice = counts2.argmin(axis=1)

        B[t, :] = p_max
        S[t, :] = np.where(np.isfinite(p_max), counts2[np.arange(K + 1), k_choice], 0.0)
        ptr_k[t, :] = k_choice
        ptr_d[t, :] = d_choice[k_choice] + 1

    score = float(B[0, 0])
    if not np.isfinite(score):
        raise RuntimeError(
            f"no feasible segmentation: T={T} cannot be covered by <= {K} segments of <= {max_dur} slots"
        )

    order: list[int] = []
    durations: list[int] = []
    t, p = 0, 0
    while t < T:
        k = int(ptr_k[t, p])
        d = int(ptr_d[t, p])
        order.append(k + 1)
        durations.append(d)
        t += d
        p = k + 1
    labels = np.repeat(np.asarray(order, dtype=int), np.asarray(durations, dtype=int))
    return DecodeResult(order=order, durations=durations, labels=labels, score=score)
