"""
Ear SIFT

This package verifies ear images by matching SIFT keypoints taken from color
slice regions:
- Gaussian mixture color modeling (vector quantization + EM)
- KL-divergence gating of slice regions
- SIFT keypoints and descriptors
- Feature-level fusion and NN / ED matching
- Genuine / impostor evaluation with ROC and the prior/after segmentation comparison
- Synthetic ear datasets
"""

from .error_utils import (
    EarSiftError,
    UsageError,
    ConfigError,
    IoFailure,
    ImageFileNotFound,
    DataError,
    UnsupportedFormat,
    CorruptData,
    DimensionMismatch,
    EmptyMask,
    TooFewSamples,
    ImageTooSmall,
    EmptyTemplate,
    ParseFailure,
    OverlapDetected,
    EmptyScores,
    InternalInvariantError,
    SingularCovariance,
)

from .logging_utils import (
    verbosity,
    check,
)

from .system_utils import (
    get_nb_workers,
    parallel_map,
)

from .path_utils import (
    file_exists,
    dir_exists,
    checkfile,
    folder_name_ext,
    resolve_path,
    make_directory,
)

from .hash_utils import (
    hash_string,
    hashfile,
)

from .image_utils import (
    ColorImage,
    GrayImage,
    Mask,
    PixelSet,
    full_mask,
    load_image,
    save_image,
    load_mask,
    save_mask,
    save_label_map,
    to_grayscale,
    equalize_histogram,
    masked_pixels,
)

from .mixture_utils import (
    GaussianComponent,
    MixtureModel,
    Codebook,
    component_density,
    mixture_density,
    vq_codebook,
    fit_gmm,
)

from .divergence_utils import (
    ComponentMatch,
    gaussian_kl,
    nearest_component,
    mixture_kl,
    consistency_gate,
    report_kl,
)

from .segmentation_utils import (
    SliceRegion,
    SegmentationResult,
    classify_pixels,
    extract_regions,
    segment_pixels,
    gate_regions,
    validate_cluster_counts,
    keep_mask,
    label_map,
    fit_global_model,
)

from .sift_utils import (
    SiftParams,
    Keypoint,
    build_scale_space,
    detect_extrema,
    localize_keypoint,
    assign_orientation,
    clamp_descriptor,
    compute_descriptor,
    extract_sift,
    restrict_keypoints,
    write_keypoint_dump,
)

from .matching_utils import (
    MatchParams,
    RegionKeypoints,
    Template,
    MatchResult,
    Decision,
    fuse_template,
    group_keypoints,
    match_nn,
    match_ed,
    match_templates,
    decide,
)

from .config_utils import (
    Config,
    config_from_dict,
    load_config,
    config_fingerprint,
)

from .pipeline_utils import (
    ImageAnalysis,
    Enrollment,
    Verification,
    analyze_image,
    build_template,
    enroll_image,
    verify_image,
)

from .template_utils import (
    TemplateFile,
    save_template,
    load_template,
    save_mixture,
    load_mixture,
)

from .evaluation_utils import (
    Dataset,
    SubjectRecord,
    ScoreSet,
    RocCurve,
    EvalReport,
    load_manifest,
    write_manifest,
    run_protocol,
    compute_roc,
    roc_rates,
    operating_point,
    accuracy_from_rates,
    equal_error_rate,
    calibrate_threshold,
    suggest_tau_kl,
    compare_sessions,
    evaluate_dataset,
)

from .synthetic_utils import (
    ear_mask,
    subject_images,
    generate_synthetic_dataset,
)

__all__ = [
    # error_utils
    "EarSiftError",
    "UsageError",
    "ConfigError",
    "IoFailure",
    "ImageFileNotFound",
    "DataError",
    "UnsupportedFormat",
    "CorruptData",
    "DimensionMismatch",
    "EmptyMask",
    "TooFewSamples",
    "ImageTooSmall",
    "EmptyTemplate",
    "ParseFailure",
    "OverlapDetected",
    "EmptyScores",
    "InternalInvariantError",
    "SingularCovariance",

    # logging_utils
    "verbosity",
    "check",

    # system_utils
    "get_nb_workers",
    "parallel_map",

    # path_utils
    "file_exists",
    "dir_exists",
    "checkfile",
    "folder_name_ext",
    "resolve_path",
    "make_directory",

    # hash_utils
    "hash_string",
    "hashfile",

    # image_utils
    "ColorImage",
    "GrayImage",
    "Mask",
    "PixelSet",
    "full_mask",
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "save_label_map",
    "to_grayscale",
    "equalize_histogram",
    "masked_pixels",

    # mixture_utils
    "GaussianComponent",
    "MixtureModel",
    "Codebook",
    "component_density",
    "mixture_density",
    "vq_codebook",
    "fit_gmm",

    # divergence_utils
    "ComponentMatch",
    "gaussian_kl",
    "nearest_component",
    "mixture_kl",
    "consistency_gate",
    "report_kl",

    # segmentation_utils
    "SliceRegion",
    "SegmentationResult",
    "classify_pixels",
    "extract_regions",
    "segment_pixels",
    "gate_regions",
    "validate_cluster_counts",
    "keep_mask",
    "label_map",
    "fit_global_model",

    # sift_utils
    "SiftParams",
    "Keypoint",
    "build_scale_space",
    "detect_extrema",
    "localize_keypoint",
    "assign_orientation",
    "clamp_descriptor",
    "compute_descriptor",
    "extract_sift",
    "restrict_keypoints",
    "write_keypoint_dump",

    # matching_utils
    "MatchParams",
    "RegionKeypoints",
    "Template",
    "MatchResult",
    "Decision",
    "fuse_template",
    "group_keypoints",
    "match_nn",
    "match_ed",
    "match_templates",
    "decide",

    # config_utils
    "Config",
    "config_from_dict",
    "load_config",
    "config_fingerprint",

    # pipeline_utils
    "ImageAnalysis",
    "Enrollment",
    "Verification",
    "analyze_image",
    "build_template",
    "enroll_image",
    "verify_image",

    # template_utils
    "TemplateFile",
    "save_template",
    "load_template",
    "save_mixture",
    "load_mixture",

    # evaluation_utils
    "Dataset",
    "SubjectRecord",
    "ScoreSet",
    "RocCurve",
    "EvalReport",
    "load_manifest",
    "write_manifest",
    "run_protocol",
    "compute_roc",
    "roc_rates",
    "operating_point",
    "accuracy_from_rates",
    "equal_error_rate",
    "calibrate_threshold",
    "suggest_tau_kl",
    "compare_sessions",
    "evaluate_dataset",

    # synthetic_utils
    "ear_mask",
    "subject_images",
    "generate_synthetic_dataset",
]
