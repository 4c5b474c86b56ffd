"""Edge-masked self-similarity graphs and the loss built on them.

The pipeline: threshold the Laplacian of a ground-truth image into an edge
mask, build per-edge-pixel distributions of patch similarities over a strided
search area (the self-similarity graph), compare the graphs of ground truth
and reconstruction with KL + L1, and backpropagate the result analytically to
every reconstruction pixel. A brute-force oracle defines the reference
numbers; a parallel kernel reproduces them fast.
"""

from .edge_mask import EdgeMask, compute_edge_mask, laplacian, load_mask, precompute_mask_dir
from .errors import (
    BoundsError,
    ConfigMismatch,
    DimensionError,
    FormatError,
    GraphMismatch,
    InvalidCenter,
    IoError,
    ShapeMismatch,
    SsgLossError,
)
from .fast_kernel import (
    BenchRow,
    KernelPlan,
    bench,
    compute_ssg_fast,
    rows_to_csv,
    ssl_backward_fast,
)
from .image_io import (
    Image,
    ImageU8,
    from_unit,
    image_from_array,
    image_u8_from_array,
    load_image,
    read_field,
    save_image,
    to_unit,
    write_field,
)
from .loss import (
    CompositeWeights,
    GradientField,
    LossReport,
    composite_total,
    mean_abs_diff,
    ssl_backward,
    ssl_forward,
    toy_optimize,
)
from .ssg import (
    Ssg,
    SsgConfig,
    compute_ssg_oracle,
    estimate_cost,
    patch_distance,
    sample_offsets,
    similarity,
)

__version__ = "0.1.0"

__all__ = [
    "BenchRow",
    "BoundsError",
    "CompositeWeights",
    "ConfigMismatch",
    "DimensionError",
    "EdgeMask",
    "FormatError",
    "GradientField",
    "GraphMismatch",
    "Image",
    "ImageU8",
    "InvalidCenter",
    "IoError",
    "KernelPlan",
    "LossReport",
    "ShapeMismatch",
    "Ssg",
    "SsgConfig",
    "SsgLossError",
    "bench",
    "composite_total",
    "compute_edge_mask",
    "compute_ssg_fast",
    "compute_ssg_oracle",
    "estimate_cost",
    "from_unit",
    "image_from_array",
    "image_u8_from_array",
    "laplacian",
    "load_image",
    "load_mask",
    "mean_abs_diff",
    "patch_distance",
    "precompute_mask_dir",
    "read_field",
    "rows_to_csv",
    "sample_offsets",
    "save_image",
    "similarity",
    "ssl_backward",
    "ssl_backward_fast",
    "ssl_forward",
    "to_unit",
    "toy_optimize",
    "write_field",
]
