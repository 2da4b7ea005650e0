"""Composition distances: feature-map RMS distance and cycle consistency.

Distances are root-mean-square over all elements rather than raw L2
sums, so numbers stay comparable across resolutions. Cycle consistency
re-extracts both representations from a generated image using the
reference bundle's recorded parameters, snaps both sides through the
bundle serialization codec (16-bit structure, 8-bit sRGB color), and
reports per-representation distances over the active mask region.
Snapping makes the measurement identical whether a bundle is fresh or
was round-tripped through disk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import ConditionBundle, resize_bilinear, struct_to_u16, u16_to_struct
from .colordist import SlicParams, color_distribution_map
from .colorspace import lab_to_srgb, srgb_to_lab
from .structure import SALIENCY_SCALE, saliency_local
from .validation import check_rgb_image, check_same_shape


class ProvenanceError(Exception):
    """Raised when a bundle's provenance is too incomplete to re-extract."""


@dataclass(frozen=True)
class DistanceReport:
    l_struct: float
    l_color: float
    params: dict

    def lines(self) -> list[str]:
        out = [f"l_struct={self.l_struct!r}", f"l_color={self.l_color!r}"]
        for key in sorted(self.params):
            out.append(f"param.{key}={self.params[key]}")
        return out


def dis(a: np.ndarray, b: np.ndarray) -> float:
    """Root-mean-square difference pooled over all elements."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def _masked_rms(a: np.ndarray, b: np.ndarray, active: np.ndarray) -> float:
    """RMS over the active pixels only; vacuous (no active pixels) is 0."""
    if not active.any():
        return 0.0
    d = a[active] - b[active]
    return float(np.sqrt(np.mean(d * d)))


def _snap_struct(values: np.ndarray, scale: float) -> np.ndarray:
    return u16_to_struct(struct_to_u16(values, scale), scale)


def _snap_color(lab: np.ndarray) -> np.ndarray:
    return srgb_to_lab(lab_to_srgb(lab))


def cycle_consistency(bundle: ConditionBundle, generated: np.ndarray) -> DistanceReport:
    """Distance between a bundle's conditions and conditions re-extracted
    from a generated image with the bundle's recorded parameters.

    The generated image is resampled to the bundle's dimensions when
    needed. Inactive mask pixels are excluded from the mean; an all-false
    mask therefore yields 0 for that representation by convention.
    """
    rgb = check_rgb_image(generated)
    k = bundle.provenance.get("k")
    if k is None:
        raise ProvenanceError("bundle provenance has no kernel size 'k'; cannot re-extract")
    sigma = bundle.provenance.get("sigma")
    slic = bundle.color_map.params

    h, w = bundle.height, bundle.width
    if rgb.shape[:2] != (h, w):
        rgb = np.clip(np.rint(resize_bilinear(rgb.astype(np.float64), h, w)), 0, 255).astype(
            np.uint8
        )
    lab = srgb_to_lab(rgb)
    regen_struct = saliency_local(lab, int(k), sigma)
    regen_color = color_distribution_map(lab, slic)

    scale = 1.0 if bundle.struct_map.normalized else SALIENCY_SCALE
    ref_struct = _snap_struct(bundle.struct_map.values, scale)
    new_struct = _snap_struct(regen_struct.values, scale)
    ref_color = _snap_color(bundle.color_map.values)
    new_color = _snap_color(regen_color.values)

    active_s = bundle.mask_struct if bundle.mask_struct is not None else np.ones((h, w), bool)
    active_c = bundle.mask_color if bundle.mask_color is not None else np.ones((h, w), bool)
    l_struct = _masked_rms(ref_struct, new_struct, active_s)
    l_color = _masked_rms(ref_color, new_color, active_c)
    params = {
        "k": int(k),
        "sigma": sigma,
        "slic_region_size": slic.region_size,
        "slic_iterations": slic.iterations,
        "slic_compactness": slic.compactness,
        "slic_blur_k": slic.blur_k,
    }
    return DistanceReport(l_struct=l_struct, l_color=l_color, params=params)
