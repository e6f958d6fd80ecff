"""Foveated image transform with acuity-driven blur and desaturation, plus
scanpath utilities and randomised-smoothing certification."""
from ._validation import ConfigError
from .acuity import (
    AcuityParams,
    AcuityTable,
    acuity_envelope,
    apply_viewing_distance,
    build_acuity_table,
    photopic_acuity,
    scotopic_acuity,
)
from .certify import (
    ABSTAIN,
    CertificationResult,
    CertifyParams,
    ConstantClassifier,
    LinearClassifier,
    NearestCentroidClassifier,
    RBlurClassifier,
    SmoothedClassifier,
    certified_accuracy,
    certify,
    clopper_pearson_lower,
    std_normal_quantile,
)
from .fixation import (
    aggregate_scores,
    any_correct,
    center_bias_heatmap,
    five_fixations,
    fixation_grid,
    mask_heatmap,
    sample_scanpath,
)
from .foveate import (
    RBlur,
    RBlurConfig,
    adaptive_blur,
    add_gaussian_noise,
    blend,
    gaussian_blur_fixed,
    rblur,
    to_grayscale,
)
from .geometry import EccentricityMap, FixationPoint, VisualField, eccentricity, eccentricity_map

__version__ = "0.1.0"
