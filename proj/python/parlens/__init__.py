"""Parallel lensless-imaging dataset pipeline.

Thin Python surface over the C++ core: forward model, FISTA reconstruction,
PSF metrology, registration geometry, and the capture/packaging drivers.
"""

from ._core import (
    PipelineError,
    autocorrelate,
    convolve,
    distort_points,
    estimate_homography,
    forward,
    load_image,
    package_dataset,
    psf_profile,
    reconstruct,
    reconstruct_manifest,
    register_manifest,
    save_image,
    simulate,
    synth_diffuser_psf,
    synth_lenslet_psf,
    undistort_points,
    warp,
)

__all__ = [
    "PipelineError",
    "autocorrelate",
    "convolve",
    "distort_points",
    "estimate_homography",
    "forward",
    "load_image",
    "package_dataset",
    "psf_profile",
    "reconstruct",
    "reconstruct_manifest",
    "register_manifest",
    "save_image",
    "simulate",
    "synth_diffuser_psf",
    "synth_lenslet_psf",
    "undistort_points",
    "warp",
]
