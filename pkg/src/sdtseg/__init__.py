"""Volumetric segmentation via signed-distance regression.

Core pieces: exact signed distance transforms with threshold recovery,
an exponentially weighted MSE loss with analytic gradients, STAPLE
consensus fusion, surface-distance metrics, mask post-processing, and a
small CPU encoder-decoder that ties them into a train/infer pipeline.
"""

__version__ = "0.1.0"

from .volume import (Mask, Volume, VolumeKind, downsample2, downsample2_mask,
                     normalize_intensities, upsample2_trilinear)
from .sdt import SDTVolume, boundary_voxels, edt_squared, signed_distance, threshold_to_mask
from .loss import LossConfig, LossReport, sdt_loss, sdt_weights, soft_dice_loss
from .staple import RaterStack, StapleResult, staple_fuse
from .morphology import fill_holes, largest_component
from .metrics import MetricsReport, assd, dice, evaluate_pair, hd95, surface_distances
from .model import NetConfig, TrainState, backward, forward, infer, load_checkpoint, \
    param_count, save_checkpoint, train
from .phantom import PhantomSpec, corrupt_rater, generate
from .nifti import read_mask, read_volume, write_volume

__all__ = [
    "Mask", "Volume", "VolumeKind", "SDTVolume",
    "normalize_intensities", "downsample2", "downsample2_mask", "upsample2_trilinear",
    "edt_squared", "boundary_voxels", "signed_distance", "threshold_to_mask",
    "LossConfig", "LossReport", "sdt_weights", "sdt_loss", "soft_dice_loss",
    "RaterStack", "StapleResult", "staple_fuse",
    "largest_component", "fill_holes",
    "MetricsReport", "dice", "surface_distances", "assd", "hd95", "evaluate_pair",
    "NetConfig", "TrainState", "forward", "backward", "train", "infer",
    "save_checkpoint", "load_checkpoint", "param_count",
    "PhantomSpec", "generate", "corrupt_rater",
    "read_volume", "read_mask", "write_volume",
]
