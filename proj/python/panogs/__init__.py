from ._panogs import (
    Camera,
    Scene,
    depth_consistency,
    load_poses,
    psnr,
    render,
    reproject,
    ssim,
    synth_dataset,
    train_files,
)

__all__ = [
    "Camera",
    "Scene",
    "depth_consistency",
    "load_poses",
    "psnr",
    "render",
    "reproject",
    "ssim",
    "synth_dataset",
    "train_files",
]
