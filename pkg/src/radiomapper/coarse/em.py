"""Generalized EM over region labels: Viterbi E-step, parameter M-step.

The loop alternates segment decoding against the current subspace models
with refits of the recurrent embedder (self-supervised order verification),
the per-region mean residence times, and the per-region subspaces, until
the decoded log-posterior stabilizes. Decoded virtual clusters are finally
matched one-to-one to physical regions through signal-weighted anchors and
the Hungarian algorithm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from ..environment import Environment
from .decode import DecodeResult, viterbi_decode
from .embedder import OrderVerifier, build_order_dataset, model_bce, train_order_verifier
from .subspace import RegionSubspaces, fit_region_subspaces


@dataclass
class CoarseConfig:
    subspace_dim: int = 2
    epsilon: float = 1e-3  # relative log-posterior change
    max_iterations: int = 100
    residence_damping: float = 0.5
    embedder_learning_rate: float = 0.1
    embedder_epochs: int = 2
    embedder_hidden: int = 32
    embedder_stop_loss: float = 0.05  # skip the embedder update once learned
    order_samples: int = 16
    order_frame_cap: int = 12
    max_dur_factor: float = 4.0
    kmeans_n_init: int = 10


@dataclass
class CoarseModel:
    embedder: OrderVerifier
    subspaces: RegionSubspaces
    residence_means: np.ndarray  # (K,) over virtual region indices
    matching: np.ndarray  # (K,) virtual index -> physical region id

    def to_dict(self) -> dict:
        return {
            "embedder": self.embedder.to_dict(),
            "subspaces": [
                {
                    "mean": e.mean.tolist(),
                    "basis": e.basis.tolist(),
                    "coeff_var": e.coeff_var.tolist(),
                    "noise_var": e.noise_var,
                    "degenerate": e.degenerate,
                }
                for e in self.subspaces.entries
            ],
            "residence_means": self.residence_means.tolist(),
            "matching": self.matching.tolist(),
        }


@dataclass
class CoarseResult:
    model: CoarseModel
    labels: list[np.ndarray]  # per-user physical region ids per slot
    virtual_labels: list[np.ndarray]
    decodes: list[DecodeResult]  # final per-user virtual decodes
    objective_trace: list[float]
    iterations: int
    converged: bool

    @property
    def visit_orders(self) -> list[list[int]]:
        """Per-user physical visit order implied by the matched decodes."""
        return [[int(self.model.matching[v - 1]) for v in d.order] for d in self.decodes]


def kmeans_init(
    sequences: list[np.ndarray], region_count: int, rng: np.random.Generator, n_init: int = 10
) -> list[np.ndarray]:
    """K-means pseudo-labels over pooled raw frames, relabeled so that
    virtual region 1 has the earliest mean temporal position. (scikit-learn
    re-seeds any empty cluster from the farthest points internally.)"""
    pooled = np.vstack(sequences)
    if pooled.shape[0] < region_count:
        raise ValueError("need at least K frames for K-means initialization")
    km = KMeans(
        n_clusters=region_count,
        n_init=n_init,
        max_iter=300,
        tol=1e-4,
        random_state=int(rng.integers(2**31 - 1)),
    )
    raw = km.fit_predict(pooled)

    t_index = np.concatenate([np.arange(seq.shape[0]) for seq in sequences])
    mean_t = np.full(region_count, np.inf)
    for c in range(region_count):
        mask = raw == c
        if mask.any():
            mean_t[c] = float(t_index[mask].mean())
    relabel = np.empty(region_count, dtype=int)
    relabel[np.argsort(mean_t, kind="stable")] = np.arange(1, region_count + 1)
    virtual = relabel[raw]

    out = []
    start = 0
    for seq in sequences:
        out.append(virtual[start : start + seq.shape[0]])
        start += seq.shape[0]
    return out


def update_residence_means(
    segments_by_user: list[tuple[list[int], list[int]]],
    region_count: int,
    previous: np.ndarray,
) -> np.ndarray:
    """Mean decoded duration per region; regions with no decoded segments
    keep their previous value."""
    sums = np.zeros(region_count)
    counts = np.zeros(region_count)
    for order, durations in segments_by_user:
        for k, d in zip(order, durations):
            sums[k - 1] += d
            counts[k - 1] += 1
    out = np.asarray(previous, dtype=float).copy()
    seen = counts > 0
    out[seen] = sums[seen] / counts[seen]
    return out


def signal_weighted_anchors(rss: np.ndarray, ap_positions: np.ndarray) -> np.ndarray:
    """Per-slot anchor: AP positions weighted by linear-scale power 10^(y/10)."""
    w = np.power(10.0, np.asarray(rss, dtype=float) / 10.0)
    return (w @ ap_positions) / np.sum(w, axis=1, keepdims=True)


def match_virtual_to_physical(
    anchors: np.ndarray, virtual_labels: np.ndarray, env: Environment
) -> np.ndarray:
    """One-to-one map from virtual cluster index to physical region id that
    minimizes the squared distance between cluster anchor centroids and
    region centroids (Hungarian assignment)."""
    K = env.region_count
    centers = np.array([env.region(k).centroid for k in range(1, K + 1)])
    global_mean = anchors.mean(axis=0)
    p_hat = np.empty((K, 2))
    for k in range(1, K + 1):
        mask = virtual_labels == k
        p_hat[k - 1] = anchors[mask].mean(axis=0) if mask.any() else global_mean
    cost = np.sum((p_hat[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    rows, cols = linear_sum_assignment(cost)
    matching = np.empty(K, dtype=int)
    matching[rows] = cols + 1
    return matching


def _max_duration(config: CoarseConfig, residence_means: np.ndarray, T: int, K: int) -> int:
    cap = int(np.ceil(config.max_dur_factor * float(residence_means.max())))
    feasible_floor = int(np.ceil(T / K))  # <= K segments must be able to cover T
    return max(cap, feasible_floor, 1)


def _initial_residence(pseudo_labels: list[np.ndarray], region_count: int) -> np.ndarray:
    counts = np.zeros(region_count)
    users = np.zeros(region_count)
    for lab in pseudo_labels:
        for k in range(1, region_count + 1):
            c = int(np.sum(lab == k))
            if c > 0:
                counts[k - 1] += c
                users[k - 1] += 1
    mean_T = float(np.mean([lab.shape[0] for lab in pseudo_labels]))
    out = np.where(users > 0, counts / np.maximum(users, 1), mean_T / region_count)
    return np.maximum(out, 1.0)


def em_region_inference(
    sequences: list[np.ndarray],
    env: Environment,
    config: CoarseConfig,
    seed: int,
) -> CoarseResult:
    """Run the full coarse stage on raw RSS sequences (one (T, D) array per
    user) and return physically matched per-slot region labels."""
    if not sequences:
        raise ValueError("at least one RSS sequence is required")
    K = env.region_count
    D = sequences[0].shape[1]
    if D != env.ap_count:
        raise ValueError(f"sequences have {D} APs but environment has {env.ap_count}")
    rng = np.random.default_rng([seed, 0x7C0A])

    embedder = OrderVerifier.initialize(D, config.embedder_hidden, rng)
    embedder.fit_normalizer(np.vstack(sequences))

    pseudo = kmeans_init(sequences, K, rng, n_init=config.kmeans_n_init)
    nbar = _initial_residence(pseudo, K)

    embeddings = [embedder.embed(seq) for seq in sequences]
    subspaces = fit_region_subspaces(
        np.vstack(embeddings), np.concatenate(pseudo), K, config.subspace_dim
    )

    def decode_all() -> tuple[list[DecodeResult], float]:
        decodes = []
        total = 0.0
        for emb in embeddings:
            loglik = subspaces.loglik_matrix(emb)
            max_dur = _max_duration(config, nbar, emb.shape[0], K)
            dec = viterbi_decode(loglik, nbar, max_dur)
            decodes.append(dec)
            total += dec.score
        return decodes, total

    decodes, score = decode_all()
    if not np.isfinite(score):
        raise RuntimeError("non-finite decoding objective at initialization")
    trace = [score]
    converged = False
    iterations = 0

    for iterations in range(1, config.max_iterations + 1):
        # M-step
        segments_raw = []
        for seq, dec in zip(sequences, decodes):
            bounds = np.cumsum([0] + dec.durations)
            segments_raw.append([seq[a:b] for a, b in zip(bounds[:-1], bounds[1:])])
        dataset = build_order_dataset(
            segments_raw, rng, n_samples=config.order_samples, max_segment_frames=config.order_frame_cap
        )
        embedder_updated = False
        if dataset and config.embedder_epochs > 0:
            current_loss = float(np.mean([model_bce(embedder, s, y) for s, y in dataset]))
            if current_loss >= config.embedder_stop_loss:
                train_order_verifier(
                    embedder, dataset, config.embedder_learning_rate, config.embedder_epochs, rng
                )
                embedder_updated = True

        seg_pairs = [(d.order, d.durations) for d in decodes]
        nbar_hat = update_residence_means(seg_pairs, K, nbar)
        nbar = (1.0 - config.residence_damping) * nbar + config.residence_damping * nbar_hat

        if embedder_updated:
            embeddings = [embedder.embed(seq) for seq in sequences]
        all_labels = np.concatenate([d.labels for d in decodes])
        subspaces = fit_region_subspaces(np.vstack(embeddings), all_labels, K, config.subspace_dim)

        # E-step
        decodes, score = decode_all()
        if not np.isfinite(score):
            raise RuntimeError(f"non-finite decoding objective at iteration {iterations}")
        prev = trace[-1]
        trace.append(score)
        if abs(score - prev) / max(1.0, abs(prev)) < config.epsilon:
            converged = True
            break

    if not converged:
        warnings.warn(f"coarse EM hit the iteration cap ({config.max_iterations})")

    anchors = np.vstack([signal_weighted_anchors(seq, env.ap_positions) for seq in sequences])
    virtual_all = np.concatenate([d.labels for d in decodes])
    matching = match_virtual_to_physical(anchors, virtual_all, env)

    physical = [matching[d.labels - 1] for d in decodes]
    model = CoarseModel(
        embedder=embedder, subspaces=subspaces, residence_means=nbar, matching=matching
    )
    return CoarseResult(
        model=model,
        labels=physical,
        virtual_labels=[d.labels.copy() for d in decodes],
        decodes=decodes,
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
    )
