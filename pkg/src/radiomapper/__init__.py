"""Survey-free indoor radio map construction from unlabeled RSS sequences.

The package simulates corridor-style pedestrian RSS collection, infers
per-slot region labels with a duration-aware HMM inside a Generalized EM
loop, recovers coordinates by alternating closed-form path-loss fits with
a region-constrained genetic trajectory search, builds an RP-indexed
fingerprint map, and localizes queries with KNN matching.
"""

__version__ = "0.1.0"

from .environment import (
    AccessPoint,
    ConfigError,
    Environment,
    Region,
    RpGrid,
    build_rp_grid,
    compute_valid_regions,
    load_environment,
    point_in_region,
    save_environment,
)
from .mobility import (
    MobilityConfig,
    RssSequence,
    Trajectory,
    generate_rss,
    labels_from_segments,
    sample_region_sequence,
    sample_residence_times,
    sample_walk,
    segments_from_labels,
    simulate_trajectory,
)
from .propagation import PropagationModel
from .radiomap import LocalizationError, RadioMap, build_radio_map, knn_localize

__all__ = [
    "AccessPoint",
    "ConfigError",
    "Environment",
    "LocalizationError",
    "MobilityConfig",
    "PropagationModel",
    "RadioMap",
    "Region",
    "RpGrid",
    "RssSequence",
    "Trajectory",
    "build_radio_map",
    "build_rp_grid",
    "compute_valid_regions",
    "generate_rss",
    "knn_localize",
    "labels_from_segments",
    "load_environment",
    "point_in_region",
    "sample_region_sequence",
    "sample_residence_times",
    "sample_walk",
    "save_environment",
    "segments_from_labels",
    "simulate_trajectory",
]
