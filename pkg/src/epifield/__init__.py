"""Dense light field reconstruction from sparse sampling via EPI inpainting."""

from .lightfield import (
    EPI,
    CameraModel,
    LightField,
    Manifest,
    ManifestError,
    assemble_lightfield,
    extract_epi,
    load_lightfield,
    merge_lightfields,
    save_lightfield,
    write_epi_png,
)
from .metrics import EvalReport, evaluate_reconstruction, l1_error_map, psnr, ssim
from .network import EpiResNet, NetworkConfig, build_network, load_weights, save_weights
from .reconstruct import (
    nearest_copy_lightfield,
    network_reconstruct_lightfield,
    shear_reconstruct_lightfield,
    zero_fill_lightfield,
)
from .sampling import (
    EPIWindow,
    SamplingPattern,
    SparseLightField,
    apply_pattern,
    build_training_set,
    windows,
)
from .shear import DisparityMap, shear_reconstruct
from .synth import (
    SceneLayer,
    ScenePoint,
    SceneSpec,
    Translation,
    disparity_slope,
    epi_slope,
    project_point,
    render_dense_lightfield,
)
from .training import TrainConfig, TrainResult, augment_pair, lr_at, mse_loss, train

__version__ = "0.1.0"

__all__ = [
    "EPI",
    "CameraModel",
    "DisparityMap",
    "EpiResNet",
    "EPIWindow",
    "EvalReport",
    "LightField",
    "Manifest",
    "ManifestError",
    "NetworkConfig",
    "SamplingPattern",
    "SceneLayer",
    "ScenePoint",
    "SceneSpec",
    "SparseLightField",
    "TrainConfig",
    "TrainResult",
    "Translation",
    "apply_pattern",
    "assemble_lightfield",
    "augment_pair",
    "build_network",
    "build_training_set",
    "disparity_slope",
    "epi_slope",
    "evaluate_reconstruction",
    "extract_epi",
    "l1_error_map",
    "load_lightfield",
    "load_weights",
    "lr_at",
    "merge_lightfields",
    "mse_loss",
    "nearest_copy_lightfield",
    "network_reconstruct_lightfield",
    "project_point",
    "psnr",
    "render_dense_lightfield",
    "save_lightfield",
    "save_weights",
    "shear_reconstruct",
    "shear_reconstruct_lightfield",
    "ssim",
    "train",
    "windows",
    "write_epi_png",
    "zero_fill_lightfield",
]
