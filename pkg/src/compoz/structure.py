"""Spatial-structure maps: frequency-tuned saliency and its localized variant.

Both variants measure, per pixel, the Lab-space distance between a mean
image and a Gaussian-blurred image. The global variant normalizes to
[0, 1]; the localized variant replaces the global mean with a local
window mean and keeps absolute values so maps stay comparable across
images.

The first pixel's Lab value is subtracted from the whole image before
filtering. Constant shifts cancel between two normalized, replicate-
padded filters, so this leaves the result unchanged; it also makes
constant images yield exactly zero maps (x - x is exact in IEEE
arithmetic, and every filter maps all-zero input to all-zero output).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filtering import box_mean, effective_kernel_size, gaussian_blur, make_kernel
from .validation import check_lab_image

# Lab-space diameter for 8-bit inputs: sqrt(100^2 + 256^2 + 256^2) < 377.
# Serialized 16-bit planes are scaled against this bound.
SALIENCY_SCALE = 377.0


@dataclass
class SaliencyMap:
    """Single-channel non-negative structure map plus extraction params."""

    values: np.ndarray
    normalized: bool
    k: int
    sigma: float

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def saliency_global(
    lab: np.ndarray,
    k: int,
    sigma: float | None = None,
    normalize: bool = True,
) -> SaliencyMap:
    """Distance from the global mean color to the blurred image, min-max normalized.

    A degenerate all-equal map (uniform input) normalizes to all zeros.
    normalize=False skips the min-max step and returns raw distances,
    which is what oracle comparisons against the direct formula use.
    """
    lab = check_lab_image(lab)
    k = effective_kernel_size(k, lab.shape[0], lab.shape[1])
    kernel = make_kernel(k, sigma)
    shifted = lab - lab[0, 0]
    mu = shifted.mean(axis=(0, 1))
    diff = mu - gaussian_blur(shifted, kernel)
    values = np.sqrt((diff**2).sum(axis=2))
    if normalize:
        lo, hi = values.min(), values.max()
        if hi > lo:
            values = (values - lo) / (hi - lo)
        else:
            values = np.zeros_like(values)
    return SaliencyMap(values=values, normalized=normalize, k=kernel.k, sigma=kernel.sigma)


def saliency_local(
    lab: np.ndarray,
    k: int,
    sigma: float | None = None,
    local_mean: str = "box",
) -> SaliencyMap:
    """Distance between the local window mean and the blurred image, unnormalized.

    local_mean picks the window weighting for the mean term: "box" is a
    uniform k x k mean (the default reading); "gaussian" swaps in a
    Gaussian window with sigma = k/sqrt(12), variance-matched to the box,
    for comparison experiments.
    """
    lab = check_lab_image(lab)
    k = effective_kernel_size(k, lab.shape[0], lab.shape[1])
    kernel = make_kernel(k, sigma)
    shifted = lab - lab[0, 0]
    if local_mean == "box":
        local = box_mean(shifted, k)
    elif local_mean == "gaussian":
        local = gaussian_blur(shifted, make_kernel(k, k / np.sqrt(12.0)))
    else:
        raise ValueError(f"local_mean must be 'box' or 'gaussian', got {local_mean!r}")
    diff = local - gaussian_blur(shifted, kernel)
    values = np.sqrt((diff**2).sum(axis=2))
    return SaliencyMap(values=values, normalized=False, k=kernel.k, sigma=kernel.sigma)
