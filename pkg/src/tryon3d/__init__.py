"""Deterministic 2-D-to-3-D virtual try-on toolkit.

Library layout:
  imgcore    -- image/depth/mask containers, PNG + PFM I/O, sampling
  prealign   -- self-adaptive clothing pre-alignment (scale + translation)
  tpswarp    -- thin-plate-spline fitting and warping, feature correlation
  depthtools -- Sobel gradients, depth losses with gradients, error metrics
  fusion     -- agnostic representation, fusion mask, try-on compositing
  recon      -- unprojection, stitched double-depth meshes, inpainting, PLY
  metrics    -- SSIM and mask IoU
  synth      -- deterministic synthetic sample generator
  pipeline   -- batch orchestration, configuration, dataset validation
  cli        -- command-line front end
"""

from .imgcore import (
    DepthMap,
    GrayImage,
    LabelMap,
    MaskImage,
    RgbImage,
    bilinear_sample,
    load_depth,
    load_image,
    load_labels,
    load_mask,
    save_depth,
    save_image,
    save_labels,
    save_mask,
    to_gray,
)
from .prealign import AffineParams, BBoxStats, apply_affine, compute_prealign, mask_stats, rescale_factor
from .tpswarp import (
    Correspondences,
    CorrelationTensor,
    NumericalError,
    TpsParams,
    contour_correspondences,
    feature_correlation,
    fit_tps,
    tps_apply_points,
    tps_warp_image,
    warping_loss,
)
from .depthtools import (
    DepthMetrics,
    GradPair,
    LossResult,
    depth_gradient_loss,
    depth_metrics,
    drm_loss,
    gradient_image,
    log_l1_loss,
    mpm_depth_loss,
    mpm_total_loss,
    normal_from_depth,
    sobel,
)
from .fusion import (
    AgnosticRep,
    Keypoints,
    build_agnostic,
    coarse_tryon,
    cross_entropy_seg,
    derive_fusion_mask,
    extract_preserved,
    fuse,
    rasterize_pose,
    tfm_losses,
)
from .recon import (
    Mesh,
    PointCloud,
    export_ply,
    import_ply,
    make_back_texture,
    render_depth,
    stitch_mesh,
    synth_depth,
    telea_inpaint,
    unproject,
)
from .metrics import SsimConfig, iou, ssim
from .pipeline import PipelineConfig, PipelineError, SampleRecord, run_pipeline, validate_dataset

__version__ = "0.1.0"
