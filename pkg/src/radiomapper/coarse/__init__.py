"""Coarse stage: unsupervised per-slot region label inference."""

from .decode import (
    DecodeResult,
    residence_log_pmf,
    segmentation_score,
    transition_log_prior,
    transition_matrix,
    viterbi_decode,
)
from .em import (
    CoarseConfig,
    CoarseModel,
    CoarseResult,
    em_region_inference,
    kmeans_init,
    match_virtual_to_physical,
    signal_weighted_anchors,
    update_residence_means,
)
from .embedder import OrderVerifier, build_order_dataset, train_order_verifier
from .subspace import (
    RegionSubspaces,
    SubspaceEntry,
    fit_region_subspaces,
    fit_subspace,
    obs_loglik,
)

__all__ = [
    "CoarseConfig",
    "CoarseModel",
    "CoarseResult",
    "DecodeResult",
    "OrderVerifier",
    "RegionSubspaces",
    "SubspaceEntry",
    "build_order_dataset",
    "em_region_inference",
    "fit_region_subspaces",
    "fit_subspace",
    "kmeans_init",
    "match_virtual_to_physical",
    "obs_loglik",
    "residence_log_pmf",
    "segmentation_score",
    "signal_weighted_anchors",
    "train_order_verifier",
    "transition_log_prior",
    "transition_matrix",
    "update_residence_means",
    "viterbi_decode",
]
