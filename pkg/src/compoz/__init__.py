"""Semantic-agnostic composition toolkit.

Extracts spatial-structure and color-distribution maps from images,
packages them as mask-aware condition bundles for downstream generators,
measures composition distances, and plans composition references for
text themes via embedding filtering plus an LVLM endpoint.
"""

__version__ = "0.1.0"

from .colorspace import srgb_to_lab, lab_to_srgb, load_rgb, save_rgb
from .filtering import GaussianKernel, KernelSchedule, make_kernel, gaussian_blur, box_mean, sample_k
from .structure import SaliencyMap, saliency_global, saliency_local
from .colordist import SlicParams, Segmentation, ColorDistMap, slic_segment, color_distribution_map
from .bundle import (
    ConditionWeights,
    ConditionBundle,
    MaskSynthParams,
    BundleFormatError,
    extract_bundle,
    mix_bundles,
    synth_mask,
    apply_mask,
    save_bundle,
    load_bundle,
)
from .metrics import DistanceReport, ProvenanceError, dis, cycle_consistency
from .planner import (
    DatabaseEntry,
    EmbeddingIndex,
    ExemplarTriplet,
    PlanResult,
    EndpointError,
    build_index,
    semantic_filter,
    assemble_prompt,
    match_response,
    plan_composition,
)
from .estimators import StructureExtractor, ColorDistributionExtractor, CompositionExtractor

__all__ = [
    "srgb_to_lab", "lab_to_srgb", "load_rgb", "save_rgb",
    "GaussianKernel", "KernelSchedule", "make_kernel", "gaussian_blur", "box_mean", "sample_k",
    "SaliencyMap", "saliency_global", "saliency_local",
    "SlicParams", "Segmentation", "ColorDistMap", "slic_segment", "color_distribution_map",
    "ConditionWeights", "ConditionBundle", "MaskSynthParams", "BundleFormatError",
    "extract_bundle", "mix_bundles", "synth_mask", "apply_mask", "save_bundle", "load_bundle",
    "DistanceReport", "ProvenanceError", "dis", "cycle_consistency",
    "DatabaseEntry", "EmbeddingIndex", "ExemplarTriplet", "PlanResult", "EndpointError",
    "build_index", "semantic_filter", "assemble_prompt", "match_response", "plan_composition",
    "StructureExtractor", "ColorDistributionExtractor", "CompositionExtractor",
]
