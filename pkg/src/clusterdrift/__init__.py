"""Cluster-level concept drift detection for imbalanced data streams."""
import logging

from .chunk import (
    Chunk,
    ClusterPartition,
    DegenerateGeometryError,
    InvalidInputError,
    Normalizer,
    SubClusterPartition,
    apply_normalizer,
    fit_normalizer,
    load_stream,
)
from .competitive import LearnConfig, PrototypeSet, learn_prototypes
from .density import density_stats, seed_prototypes
from .detector import (
    ConceptModel,
    DetectorConfig,
    DriftReport,
    StreamResult,
    detect,
    process_stream,
    train_model,
)
from .fusion import FusionResult, fuse, select_k_star
from .kernels import BACKEND
from .occ import Descriptor, DescriptorConfig, fit_descriptor
from .streamgen import StreamSpec, build_stream, two_gaussian_spec

__version__ = "0.1.0"

# silent unless the application configures logging
logging.getLogger(__name__).addHandler(logging.NullHandler())
