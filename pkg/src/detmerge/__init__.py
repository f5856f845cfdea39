"""Merge stochastic object-detection samples into observations with
classification and spatial uncertainty, and evaluate the merge strategies."""

from .affinity import AffinityKind, Semantic, Spatial, composite_affinity, eac, iou, kl_semantic, pac, same_label
from .assignment import hungarian_solve
from .clustering import Cluster, ClusterConfig, Method, bsas, bsas_exclusive, cluster_sample_set, hungarian_cluster
from .hdbscan import Embedding, HdbscanConfig, hdbscan_cluster
from .metrics import (Correctness, EvalRecord, GroundTruthObject, aupr, auroc, average_precision,
                      label_correctness, mean_average_precision, min_uncertainty_error, uncertainty_error)
from .model import BoundingBox, Detection, Observation, Regime, SampleSet, canonical_order, validate_sample_set
from .observation import (UncertaintyKind, accept_reject, entropy, form_observations,
                          passthrough_observations, spatial_variance)

__version__ = "0.1.0"
