"""Volumetric grid CRF refinement with extended Gaussian neighbourhood kernels."""

from .gfilter import Gaussian1D, MaskVolume, filter_volume, gaussian_kernel_1d, make_label_mask
from .kernel import (
    KernelSpec,
    KernelTable,
    NeighborhoodMode,
    NeighborOffset,
    build_kernel_table,
    kernel_components,
    neighborhood_offsets,
    truncation_weight,
)
from .meanfield import (
    CompatibilityMatrix,
    ConvergenceReport,
    InferenceConfig,
    add_unary,
    argmax_labels,
    compatibility_transform,
    init_beliefs,
    message_pass,
    run_inference,
    softmax_normalize,
    weighted_filter,
)
from .metrics import (
    ConfusionCounts,
    WeightVolume,
    combined_loss,
    masked_cross_entropy,
    precision_metrics,
    weighted_label_image,
)
from .oracle import ExactMarginals, config_energy, exact_marginals, map_config
from .volume import (
    BeliefField,
    GridDims,
    LabelVolume,
    ScalarVolume,
    Sphere,
    UnaryField,
    load_volume,
    make_synthetic_nodule,
    save_volume,
    unary_from_intensity,
    voxel_index,
)

__version__ = "0.1.0"
