"""Region-specific log-distance propagation parameters.

Each valid (region k, AP q) pair carries {alpha, beta, sigma2}: RSS in dBm
is beta + alpha * log10(distance) plus zero-mean Gaussian shadowing with
variance sigma2. Parameters exist exactly for pairs with k in Z_q.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MIN_DISTANCE_M = 0.01  # clamp at the log singularity


@dataclass
class PropagationModel:
    alpha: np.ndarray  # (K, D) dB per decade, NaN where invalid
    beta: np.ndarray  # (K, D) dBm at 1 m
    sigma2: np.ndarray  # (K, D) dB^2
    valid: np.ndarray  # (K, D) bool, True iff k in Z_q

    @classmethod
    def empty(cls, region_count: int, ap_count: int, valid: np.ndarray) -> "PropagationModel":
        shape = (region_count, ap_count)
        nan = np.full(shape, np.nan)
        return cls(alpha=nan.copy(), beta=nan.copy(), sigma2=nan.copy(), valid=valid.copy())

    def set_entry(self, region_id: int, ap_id: int, alpha: float, beta: float, sigma2: float):
        if not self.valid[region_id - 1, ap_id - 1]:
            raise ValueError(f"(region {region_id}, AP {ap_id}) is not a valid pair")
        self.alpha[region_id - 1, ap_id - 1] = alpha
        self.beta[region_id - 1, ap_id - 1] = beta
        self.sigma2[region_id - 1, ap_id - 1] = sigma2

    def predict(self, region_id: int, ap_id: int, distances) -> np.ndarray:
        """Mean RSS at the given distances for one (region, AP) pair."""
        d = np.maximum(np.asarray(distances, dtype=float), MIN_DISTANCE_M)
        k, q = region_id - 1, ap_id - 1
        return self.beta[k, q] + self.alpha[k, q] * np.log10(d)


def propagation_to_dict(model: PropagationModel) -> dict:
    entries = []
    K, D = model.valid.shape
    for k in range(K):
        for q in range(D):
            if model.valid[k, q] and np.isfinite(model.alpha[k, q]):
                entries.append(
                    {
                        "region": k + 1,
                        "ap": q + 1,
                        "alpha": float(model.alpha[k, q]),
                        "beta": float(model.beta[k, q]),
                        "sigma2": float(model.sigma2[k, q]),
                    }
                )
    return {"region_count": K, "ap_count": D, "entries": entries}


def propagation_from_dict(doc: dict, valid: np.ndarray) -> PropagationModel:
    model = PropagationModel.empty(doc["region_count"], doc["ap_count"], valid)
    for e in doc["entries"]:
        model.alpha[e["region"] - 1, e["ap"] - 1] = e["alpha"]
        model.beta[e["region"] - 1, e["ap"] - 1] = e["beta"]
        model.sigma2[e["region"] - 1, e["ap"] - 1] = e["sigma2"]
    return model


def save_propagation(model: PropagationModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(propagation_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_propagation(path, valid: np.ndarray) -> PropagationModel:
    with open(path) as fh:
        return propagation_from_dict(json.load(fh), valid)
