"""Recurrent feature embedder with a sequence-order verification head.

A single tanh recurrent cell maps each D-dim RSS frame to a hidden state;
a linear read-out produces the per-slot D-dim embedding and a separate
sigmoid head scores whether a (possibly shuffled) concatenation of decoded
segments is in chronological order. Only the recurrent weights and the
order head receive gradients from the binary cross-entropy loss, via
backpropagation through time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

GRAD_CLIP_NORM = 5.0


def _xavier(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_out, n_in))


@dataclass
class OrderVerifier:
    """Recurrent embedder + order-verdict classifier.

    Input frames are standardized by (input_shift, input_scale), which are
    data statistics fixed at initialization and treated as part of the
    parameter set.
    """

    input_dim: int
    hidden_dim: int = 32
    w_xh: np.ndarray = field(init=False)
    w_hh: np.ndarray = field(init=False)
    b_h: np.ndarray = field(init=False)
    w_out: np.ndarray = field(init=False)
    b_out: np.ndarray = field(init=False)
    w_cls: np.ndarray = field(init=False)
    b_cls: float = field(init=False)
    input_shift: np.ndarray = field(init=False)
    input_scale: np.ndarray = field(init=False)

    def __post_init__(self):
        self.input_shift = np.zeros(self.input_dim)
        self.input_scale = np.ones(self.input_dim)

    @classmethod
    def initialize(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> "OrderVerifier":
        model = cls(input_dim=input_dim, hidden_dim=hidden_dim)
        model.w_xh = _xavier(rng, hidden_dim, input_dim)
        model.w_hh = _xavier(rng, hidden_dim, hidden_dim)
        model.b_h = np.zeros(hidden_dim)
        model.w_out = _xavier(rng, input_dim, hidden_dim)
        model.b_out = np.zeros(input_dim)
        model.w_cls = _xavier(rng, 1, hidden_dim)[0]
        model.b_cls = 0.0
        return model

    def fit_normalizer(self, frames: np.ndarray) -> None:
        """Fix the input standardization from raw frame statistics."""
        frames = np.atleast_2d(frames)
        self.input_shift = frames.mean(axis=0)
        self.input_scale = np.maximum(frames.std(axis=0), 1e-6)

    def _normalize(self, seq: np.ndarray) -> np.ndarray:
        return (seq - self.input_shift) / self.input_scale

    def _hidden_states(self, seq: np.ndarray) -> np.ndarray:
        x = self._normalize(np.atleast_2d(seq))
        T = x.shape[0]
        h = np.zeros((T, self.hidden_dim))
        prev = np.zeros(self.hidden_dim)
        for t in range(T):
            prev = np.tanh(self.w_xh @ x[t] + self.w_hh @ prev + self.b_h)
            h[t] = prev
        return h

    def embed(self, seq: np.ndarray) -> np.ndarray:
        """Causal per-slot embeddings: slot t depends only on frames 1..t.

        The read-out uses einsum so the result is bit-identical whether a
        sequence is embedded whole or prefix by prefix (gemm kernels round
        differently across shapes).
        """
        h = self._hidden_states(seq)
        return np.einsum("th,dh->td", h, self.w_out) + self.b_out

    def order_logit(self, seq: np.ndarray) -> float:
        # the verdict head reads the temporal mean of the hidden states:
        # gradients then reach every step, which a last-state read-out
        # cannot deliver through long tanh recurrences
        h = self._hidden_states(seq)
        return float(self.w_cls @ h.mean(axis=0) + self.b_cls)

    def order_probability(self, seq: np.ndarray) -> float:
        z = self.order_logit(seq)
        return float(1.0 / (1.0 + np.exp(-z)))

    def loss_and_gradients(self, seq: np.ndarray, label: int) -> tuple[float, dict[str, np.ndarray]]:
        """Binary cross-entropy of the order verdict and its exact gradients
        with respect to every parameter the loss depends on."""
        x = self._normalize(np.atleast_2d(seq))
        T = x.shape[0]
        h = np.zeros((T, self.hidden_dim))
        prev = np.zeros(self.hidden_dim)
        for t in range(T):
            prev = np.tanh(self.w_xh @ x[t] + self.w_hh @ prev + self.b_h)
            h[t] = prev

        h_mean = h.mean(axis=0)
        z = float(self.w_cls @ h_mean + self.b_cls)
        # stable BCE: log(1 + e^z) - y*z
        loss = float(np.logaddexp(0.0, z) - label * z)
        p = 1.0 / (1.0 + np.exp(-z))
        dz = p - label

        grads = {
            "w_xh": np.zeros_like(self.w_xh),
            "w_hh": np.zeros_like(self.w_hh),
            "b_h": np.zeros_like(self.b_h),
            "w_cls": dz * h_mean,
            "b_cls": np.array(dz),
        }
        dh_pool = dz * self.w_cls / T  # mean-pool contribution at every step
        dh = np.zeros(self.hidden_dim)
        for t in range(T - 1, -1, -1):
            da = (dh + dh_pool) * (1.0 - h[t] * h[t])
            grads["w_xh"] += np.outer(da, x[t])
            h_prev = h[t - 1] if t > 0 else np.zeros(self.hidden_dim)
            grads["w_hh"] += np.outer(da, h_prev)
            grads["b_h"] += da
            dh = self.w_hh.T @ da
        return loss, grads

    def apply_gradients(self, grads: dict[str, np.ndarray], learning_rate: float, clip_norm: float = GRAD_CLIP_NORM):
        total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        scale = learning_rate if total <= clip_norm else learning_rate * clip_norm / total
        self.w_xh -= scale * grads["w_xh"]
        self.w_hh -= scale * grads["w_hh"]
        self.b_h -= scale * grads["b_h"]
        self.w_cls -= scale * grads["w_cls"]
        self.b_cls -= scale * float(grads["b_cls"])

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "w_xh": self.w_xh.tolist(),
            "w_hh": self.w_hh.tolist(),
            "b_h": self.b_h.tolist(),
            "w_out": self.w_out.tolist(),
            "b_out": self.b_out.tolist(),
            "w_cls": self.w_cls.tolist(),
            "b_cls": self.b_cls,
            "input_shift": self.input_shift.tolist(),
            "input_scale": self.input_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "OrderVerifier":
        model = cls(input_dim=doc["input_dim"], hidden_dim=doc["hidden_dim"])
        model.w_xh = np.array(doc["w_xh"])
        model.w_hh = np.array(doc["w_hh"])
        model.b_h = np.array(doc["b_h"])
        model.w_out = np.array(doc["w_out"])
        model.b_out = np.array(doc["b_out"])
        model.w_cls = np.array(doc["w_cls"])
        model.b_cls = float(doc["b_cls"])
        model.input_shift = np.array(doc["input_shift"])
        model.input_scale = np.array(doc["input_scale"])
        return model


def _thin_segment(segment: np.ndarray, max_frames: int) -> np.ndarray:
    if segment.shape[0] <= max_frames:
        return segment
    idx = np.linspace(0, segment.shape[0] - 1, max_frames).round().astype(int)
    return segment[idx]


def build_order_dataset(
    segments_by_user: list[list[np.ndarray]],
    rng: np.random.Generator,
    n_samples: int = 16,
    max_segment_frames: int = 20,
) -> list[tuple[np.ndarray, int]]:
    """Balanced order-verification samples: positives concatenate a user's
    decoded segments chronologically, negatives apply a random non-identity
    permutation to the same segments. Long segments are thinned to
    max_segment_frames evenly spaced frames to bound sequence length."""
    eligible = [segs for segs in segments_by_user if len(segs) >= 2]
    if not eligible:
        warnings.warn("no user has >= 2 decoded segments; order dataset is empty")
        return []
    dataset: list[tuple[np.ndarray, int]] = []
    n_pairs = max(1, n_samples // 2)
    for i in range(n_pairs):
        segs = [_thin_segment(s, max_segment_frames) for s in eligible[i % len(eligible)]]
        J = len(segs)
        dataset.append((np.vstack(segs), 1))
        perm = rng.permutation(J)
        while np.array_equal(perm, np.arange(J)):
            perm = rng.permutation(J)
        dataset.append((np.vstack([segs[j] for j in perm]), 0))
    return dataset


def train_order_verifier(
    model: OrderVerifier,
    dataset: list[tuple[np.ndarray, int]],
    learning_rate: float,
    epochs: int,
    rng: np.random.Generator,
) -> float:
    """Per-sample SGD on the order-verification BCE; returns the mean loss
    of the final epoch. Aborts on a non-finite loss."""
    if not dataset:
        raise ValueError("order-verification dataset is empty")
    mean_loss = np.nan
    for _ in range(max(epochs, 0)):
        order = rng.permutation(len(dataset))
        losses = []
        for i in order:
            seq, label = dataset[i]
            loss, grads = model.loss_and_gradients(seq, label)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite order-verification loss ({loss}); lower the learning rate"
                )
            model.apply_gradients(grads, learning_rate)
            losses.append(loss)
        mean_loss = float(np.mean(losses))
    if np.isnan(mean_loss):  # epochs == 0: evaluate without updating
        mean_loss = float(np.mean([model_bce(model, s, y) for s, y in dataset]))
    return mean_loss


def model_bce(model: OrderVerifier, seq: np.ndarray, label: int) -> float:
    z = model.order_logit(seq)
    return float(np.logaddexp(0.0, z) - label * z)
