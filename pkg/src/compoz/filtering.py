"""Separable Gaussian blur, local box mean, and the dynamic kernel schedule.

Two blur backends sit behind one contract: small kernels go through
scipy's 1-d correlation, large kernels through a banded-matrix matmul
(BLAS turns the O(n) per-pixel cost into something far cheaper than
direct convolution once k is in the hundreds). Both use replicate
border padding and produce float64 results that agree to ~1e-13.

BLAS is pinned to one thread inside the matmul path so results are
bitwise reproducible regardless of the ambient thread configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from threadpoolctl import threadpool_limits

from .validation import check_odd_window

# crossover where the banded-matmul path starts beating direct 1-d correlation
_GEMM_MIN_K = 65


def default_sigma(k: int) -> float:
    """Blur strength tied to the window size: 0.3*((k-1)/2 - 1) + 0.8."""
    return 0.3 * ((k - 1) / 2.0 - 1.0) + 0.8


@dataclass(frozen=True)
class GaussianKernel:
    """Sampled, normalized 1-d Gaussian taps for a k x k separable blur."""

    k: int
    sigma: float
    taps: np.ndarray

    def __post_init__(self):
        if abs(float(self.taps.sum()) - 1.0) > 1e-12:
            raise ValueError("kernel taps must sum to 1")


def make_kernel(k: int, sigma: float | None = None) -> GaussianKernel:
    """Build normalized Gaussian taps of odd length k >= 3."""
    k = check_odd_window(k)
    if sigma is None:
        sigma = default_sigma(k)
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.arange(k, dtype=np.float64) - (k - 1) / 2.0
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    return GaussianKernel(k=k, sigma=sigma, taps=taps)


@dataclass(frozen=True)
class KernelSchedule:
    """Range of window sizes the extractor samples from (inclusive)."""

    min_k: int = 193
    max_k: int = 321
    step: int = 16

    def __post_init__(self):
        if self.min_k > self.max_k:
            raise ValueError("min_k must be <= max_k")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.min_k < 3:
            raise ValueError("min_k must be >= 3")

    def values(self) -> list[int]:
        vals = range(self.min_k, self.max_k + 1, self.step)
        return [v + 1 if v % 2 == 0 else v for v in vals]


def sample_k(schedule: KernelSchedule, rng: np.random.Generator) -> int:
    """Draw one window size uniformly from the schedule, forced odd."""
    vals = schedule.values()
    return vals[int(rng.integers(len(vals)))]


def effective_kernel_size(k: int, height: int, width: int) -> int:
    """Clamp k to at most twice the long image side (kept odd)."""
    cap = 2 * max(height, width)
    if k <= cap:
        return k
    k_eff = cap if cap % 2 == 1 else cap - 1
    return max(k_eff, 3)


def _band_matrix(n: int, taps: np.ndarray) -> np.ndarray:
    """Dense operator for 1-d correlation with index clamping (replicate pad)."""
    k = len(taps)
    r = k // 2
    m = np.zeros((n, n))
    idx = np.arange(n)
    for t in range(k):
        src = np.clip(idx + t - r, 0, n - 1)
        np.add.at(m, (idx, src), taps[t])
    return m


def _blur_gemm(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    h, w = img.shape[0], img.shape[1]
    row_op = _band_matrix(h, taps)
    col_op = _band_matrix(w, taps)
    with threadpool_limits(limits=1):
        if img.ndim == 2:
            return row_op @ img @ col_op.T
        c = img.shape[2]
        out = (row_op @ img.reshape(h, w * c)).reshape(h, w, c)
        return np.einsum("hwc,vw->hvc", out, col_op, optimize=True)


def _blur_correlate(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(img, taps, axis=0, mode="nearest")
    return ndimage.correlate1d(out, taps, axis=1, mode="nearest")


def gaussian_blur(img: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Separable Gaussian blur with replicate borders; dims preserved."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected (H, W) or (H, W, C) array, got shape {arr.shape}")
    h, w = arr.shape[0], arr.shape[1]
    k_eff = effective_kernel_size(kernel.k, h, w)
    if k_eff != kernel.k:
        kernel = make_kernel(k_eff, kernel.sigma)
    if kernel.k >= _GEMM_MIN_K:
        return _blur_gemm(arr, kernel.taps)
    return _blur_correlate(arr, kernel.taps)


def box_mean(img: np.ndarray, k: int) -> np.ndarray:
    """Local k x k arithmetic mean with replicate borders.

    Built on a summed-area table, so the cost does not depend on k.
    """
    k = check_odd_window(k)
    arr = np.asarray(img, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected (H, W) or (H, W, C) array, got shape {img.shape}")
    r = k // 2
    h, w, c = arr.shape
    pad = np.pad(arr, ((r, r), (r, r), (0, 0)), mode="edge")
    sat = np.zeros((h + 2 * r + 1, w + 2 * r + 1, c))
    np.cumsum(np.cumsum(pad, axis=0), axis=1, out=sat[1:, 1:])
    sums = sat[k:, k:] - sat[:-k, k:] - sat[k:, :-k] + sat[:-k, :-k]
    out = sums / float(k * k)
    return out[:, :, 0] if squeeze else out
