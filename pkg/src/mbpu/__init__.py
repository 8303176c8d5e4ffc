"""Point-cloud upsampling by midpoint interpolation and learned distance-field refinement.

Everything runs on numpy float64 with a small tape-based autodiff engine:
a Mamba-style feature extractor and distance/shift regressor, a
differentiable multi-view depth renderer, losses, metrics, and a training
loop over synthetic parametric shapes.
"""

from .autodiff import Tape, Tensor, finite_diff_check
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, format_config, load_config, parse_config
from .geometry import (
    NormalizationTransform,
    PointCloud,
    add_gaussian_noise,
    farthest_point_sample,
    knn,
    load_cloud,
    normalize_unit_sphere,
    save_cloud,
)
from .losses import LossConfig, chamfer_distance, l1_refinement_loss, total_loss
from .metrics import Metrics, metrics
from .network import NetworkConfig, NetworkParams, init_network
from .optim import AdamState, optimizer_step
from .renderer import CameraRig, RenderConfig, make_camera_rig, read_pfm, render_depth, render_views, view_loss, write_pfm
from .ssm import selective_scan
from .training import TrainConfig, evaluate_heldout, train
from .upsampler import RefinementConfig, interpolate_only, midpoint_interpolate, refine, upsample

__all__ = [
    "AdamState",
    "CameraRig",
    "LossConfig",
    "Metrics",
    "NetworkConfig",
    "NetworkParams",
    "NormalizationTransform",
    "PointCloud",
    "RefinementConfig",
    "RenderConfig",
    "RunConfig",
    "Tape",
    "Tensor",
    "TrainConfig",
    "add_gaussian_noise",
    "chamfer_distance",
    "evaluate_heldout",
    "farthest_point_sample",
    "finite_diff_check",
    "format_config",
    "init_network",
    "interpolate_only",
    "knn",
    "l1_refinement_loss",
    "load_checkpoint",
    "load_cloud",
    "load_config",
    "make_camera_rig",
    "metrics",
    "midpoint_interpolate",
    "normalize_unit_sphere",
    "optimizer_step",
    "parse_config",
    "read_pfm",
    "refine",
    "render_depth",
    "render_views",
    "save_checkpoint",
    "save_cloud",
    "selective_scan",
    "total_loss",
    "train",
    "upsample",
    "view_loss",
    "write_pfm",
]
