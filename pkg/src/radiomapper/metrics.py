"""Evaluation metrics: clustering quality, topology recovery, RSS
reconstruction error, and localization error.

Acc uses the best one-to-one label matching (Hungarian on the contingency
table); NMI uses arithmetic-mean normalization; F1/precision are pairwise.
The classification error rate e_cla is computed against the labels as
given, with no matching freedom. Topology accuracy derives from the
normalized Levenshtein distance between visit orders.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

RSS_EXCLUSION_DBM = -140.0


@dataclass
class ClusteringReport:
    acc: float
    nmi: float
    f1: float
    ari: float
    precision: float
    e_cla: float  # percent


def _contingency(pred: np.ndarray, true: np.ndarray) -> np.ndarray:
    pred_ids = np.unique(pred)
    true_ids = np.unique(true)
    table = np.zeros((pred_ids.size, true_ids.size), dtype=np.int64)
    pred_pos = {v: i for i, v in enumerate(pred_ids)}
    true_pos = {v: i for i, v in enumerate(true_ids)}
    for p, t in zip(pred, true):
        table[pred_pos[p], true_pos[t]] += 1
    return table


def clustering_metrics(predicted, true) -> ClusteringReport:
    pred = np.asarray(predicted).ravel()
    true_arr = np.asarray(true).ravel()
    if pred.shape[0] != true_arr.shape[0] or pred.shape[0] == 0:
        raise ValueError("predicted and true labels must have equal nonzero length")
    n = pred.shape[0]

    table = _contingency(pred, true_arr)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: table.shape[0], : table.shape[1]] = table
    rows, cols = linear_sum_assignment(-padded)
    acc = float(padded[rows, cols].sum()) / n

    nmi = float(normalized_mutual_info_score(true_arr, pred, average_method="arithmetic"))
    ari = float(adjusted_rand_score(true_arr, pred))

    def _comb2(x: np.ndarray) -> float:
        return float(np.sum(x * (x - 1) / 2.0))

    tp = _comb2(table.astype(float))
    pairs_pred = _comb2(table.sum(axis=1).astype(float))
    pairs_true = _comb2(table.sum(axis=0).astype(float))
    precision = tp / pairs_pred if pairs_pred > 0 else 1.0
    recall = tp / pairs_true if pairs_true > 0 else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    e_cla = float(np.mean(pred != true_arr)) * 100.0
    return ClusteringReport(acc=acc, nmi=nmi, f1=f1, ari=ari, precision=precision, e_cla=e_cla)


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two sequences."""
    a = list(a)
    b = list(b)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def topo_acc(inferred_orders: list, true_orders: list) -> float:
    """Mean over users of 100 * (1 - Lev(r_hat, r_true)/max lengths)."""
    if len(inferred_orders) != len(true_orders) or not inferred_orders:
        raise ValueError("need one inferred order per true order, at least one pair")
    scores = []
    for r_hat, r_true in zip(inferred_orders, true_orders):
        m = max(len(r_hat), len(r_true))
        if m == 0:
            scores.append(1.0)  # two empty orders are identical
            continue
        scores.append(1.0 - levenshtein(r_hat, r_true) / m)
    return float(np.mean(scores)) * 100.0


def rss_error_metrics(estimated, measured) -> tuple[float, float, float]:
    """(RMSE, MAE, NRMSE%) over pairs whose measured value is usable
    (at or above the exclusion threshold); NRMSE normalizes by the dynamic
    range of the retained measured values."""
    est = np.asarray(estimated, dtype=float).ravel()
    mea = np.asarray(measured, dtype=float).ravel()
    if est.shape != mea.shape:
        raise ValueError("estimated and measured shapes differ")
    keep = mea >= RSS_EXCLUSION_DBM
    if not keep.any():
        raise ValueError("all pairs excluded by the RSS threshold; metrics undefined")
    diff = est[keep] - mea[keep]
    rmse = float(np.sqrt(np.mean(diff**2)))
    mae = float(np.mean(np.abs(diff)))
    rng = float(mea[keep].max() - mea[keep].min())
    nrmse = rmse / rng * 100.0 if rng > 0 else 0.0
    return rmse, mae, nrmse


def localization_report(estimates, truths) -> tuple[float, np.ndarray]:
    """Mean Euclidean error and the (error, cumulative fraction) CDF."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    tru = np.atleast_2d(np.asarray(truths, dtype=float))
    if est.shape != tru.shape:
        raise ValueError("estimates and truths shapes differ")
    errors = np.linalg.norm(est - tru, axis=1)
    e_loc = float(errors.mean())
    sorted_err = np.sort(errors)
    fractions = np.arange(1, errors.size + 1) / errors.size
    return e_loc, np.column_stack([sorted_err, fractions])


@dataclass
class EvalReport:
    acc: float | None = None
    nmi: float | None = None
    f1: float | None = None
    ari: float | None = None
    precision: float | None = None
    e_cla: float | None = None
    topo_acc: float | None = None
    e_rmse: float | None = None
    e_mae: float | None = None
    e_nrmse: float | None = None
    e_loc: float | None = None

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def save_cdf(cdf: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("error_m,fraction\n")
        for err, frac in cdf:
            fh.write(f"{err:.4f},{frac:.6f}\n")
