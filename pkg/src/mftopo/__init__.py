"""Topological distances between multi-fields on simplicial meshes.

Pipeline: quantize the fields, build the Joint Contour Net, decompose it
into the multi-dimensional Reeb graph hierarchy, compute persistence
diagrams per component graph, and compare hierarchies with bottleneck
based distances. Spectral eigenfunction descriptors and retrieval metrics
support the shape-comparison workflow.
"""

from .distance import (
    DistanceReport,
    bottleneck,
    bottleneck_assignment,
    generalized_distance,
    hungarian,
    mdrg_distance,
    optimal_bijection,
    shape_distance,
    total_distance,
)
from .errors import ConfigError, InputDataError, MFTopoError
from .evaluate import LabeledDistanceMatrix, retrieval_metrics, timeseries_peaks
from .jcn import JointContourNet, Quantization, build_jcn, make_quantization
from .mdrg import MDRG, ReebGraph, build_mdrg, morseify, reeb_of_dimension1, restrict_and_reeb
from .mesh import (
    MultiFieldMesh,
    RegularGrid,
    attach_field,
    grid_to_mesh,
    load_field,
    load_mesh,
    load_volume,
    write_mesh,
)
from .persistence import (
    PersistenceDiagram,
    compute_exdg1,
    compute_pd0,
    compute_pd0_neg,
)
from .spectral import (
    EigenDescriptorSet,
    LaplaceOperator,
    cotangent_laplacian,
    descriptors,
    solve_eigen,
)

__version__ = "0.1.0"

__all__ = [
    "MultiFieldMesh",
    "RegularGrid",
    "load_mesh",
    "write_mesh",
    "attach_field",
    "grid_to_mesh",
    "load_volume",
    "load_field",
    "Quantization",
    "make_quantization",
    "JointContourNet",
    "build_jcn",
    "MDRG",
    "ReebGraph",
    "build_mdrg",
    "morseify",
    "reeb_of_dimension1",
    "restrict_and_reeb",
    "PersistenceDiagram",
    "compute_pd0",
    "compute_pd0_neg",
    "compute_exdg1",
    "bottleneck",
    "hungarian",
    "bottleneck_assignment",
    "optimal_bijection",
    "mdrg_distance",
    "total_distance",
    "generalized_distance",
    "shape_distance",
    "DistanceReport",
    "LaplaceOperator",
    "EigenDescriptorSet",
    "cotangent_laplacian",
    "solve_eigen",
    "descriptors",
    "LabeledDistanceMatrix",
    "retrieval_metrics",
    "timeseries_peaks",
    "MFTopoError",
    "InputDataError",
    "ConfigError",
    "__version__",
]
