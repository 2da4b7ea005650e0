"""Color-distribution maps: heavy blur, SLIC superpixels, dominant-color painting.

SLIC is a localized k-means over joint (L, a, b, x, y) space: centers
start on a regular grid at the region spacing, get nudged to the
lowest-gradient spot in a 3x3 neighborhood, then alternate between
assigning pixels within a 2S x 2S window and recomputing centers as
exact member means. The iteration loop is compiled with numba; it is
strictly sequential so results never depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .filtering import gaussian_blur, make_kernel
from .validation import check_lab_image, check_odd_window


@dataclass(frozen=True)
class SlicParams:
    """Clustering knobs: grid spacing S, rounds, spatial-vs-color weight m."""

    region_size: int = 128
    iterations: int = 20
    compactness: float = 10.0
    blur_k: int = 257
    enforce_connectivity: bool = True

    def __post_init__(self):
        if self.region_size < 2:
            raise ValueError("region_size must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.compactness <= 0:
            raise ValueError("compactness must be positive")
        if self.blur_k != 0:
            check_odd_window(self.blur_k, "blur_k")


@dataclass
class Segmentation:
    """Per-pixel labels, per-cluster (L, a, b, y, x) centers, member counts."""

    labels: np.ndarray
    centers: np.ndarray
    counts: np.ndarray


@dataclass
class ColorDistMap:
    """Three-channel map where every pixel carries its cluster's mean color."""

    values: np.ndarray
    params: SlicParams = field(default_factory=SlicParams)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@njit(cache=True)
def _slic_iterations(lab, centers, S, ratio, iterations, labels, dist, buf):
    h, w = lab.shape[0], lab.shape[1]
    n = centers.shape[0]
    sums = np.empty((n, 5))
    cnt = np.empty(n)
    prev = np.empty_like(labels)
    for _ in range(iterations):
        prev[:] = labels
        for y in range(h):
            for x in range(w):
                dist[y, x] = np.inf
        for i in range(n):
            c0 = centers[i, 0]
            c1 = centers[i, 1]
            c2 = centers[i, 2]
            cy = centers[i, 3]
            cx = centers[i, 4]
            y0 = max(int(round(cy)) - S, 0)
            y1 = min(int(round(cy)) + S + 1, h)
            x0 = max(int(round(cx)) - S, 0)
            x1 = min(int(round(cx)) + S + 1, w)
            for y in range(y0, y1):
                dy2 = (y - cy) * (y - cy) * ratio
                for x in range(x0, x1):
                    dl = lab[y, x, 0] - c0
                    da = lab[y, x, 1] - c1
                    db = lab[y, x, 2] - c2
                    dx = x - cx
                    buf[x] = dl * dl + da * da + db * db + dy2 + dx * dx * ratio
                for x in range(x0, x1):
                    if buf[x] < dist[y, x]:
                        dist[y, x] = buf[x]
                        labels[y, x] = i
        sums[:] = 0.0
        cnt[:] = 0.0
        for y in range(h):
            for x in range(w):
                i = labels[y, x]
                sums[i, 0] += lab[y, x, 0]
                sums[i, 1] += lab[y, x, 1]
                sums[i, 2] += lab[y, x, 2]
                sums[i, 3] += y
                sums[i, 4] += x
                cnt[i] += 1.0
        for i in range(n):
            if cnt[i] > 0.0:
                for j in range(5):
                    centers[i, j] = sums[i, j] / cnt[i]
        # assignments reaching a fixed point means every later round is identical
        converged = True
        for y in range(h):
            for x in range(w):
                if labels[y, x] != prev[y, x]:
                    converged = False
                    break
            if not converged:
                break
        if converged:
            break


def _grid_seeds(lab: np.ndarray, S: int) -> np.ndarray:
    """Grid-spaced seeds nudged to the lowest-gradient spot in a 3x3 patch."""
    h, w, _ = lab.shape
    ys = np.arange(S // 2, h, S, dtype=np.int64)
    xs = np.arange(S // 2, w, S, dtype=np.int64)
    if len(ys) == 0:
        ys = np.array([(h - 1) // 2], dtype=np.int64)
    if len(xs) == 0:
        xs = np.array([(w - 1) // 2], dtype=np.int64)
    if h > 1 and w > 1:
        gy, gx = np.gradient(lab, axis=(0, 1))
        grad = (gy**2).sum(axis=2) + (gx**2).sum(axis=2)
    else:
        grad = np.zeros((h, w))
    seeds = []
    for sy in ys:
        for sx in xs:
            best = (int(sy), int(sx))
            best_g = grad[best]
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    y, x = int(sy) + dy, int(sx) + dx
                    if 0 <= y < h and 0 <= x < w and grad[y, x] < best_g:
                        best, best_g = (y, x), grad[y, x]
            seeds.append(best)
    return np.array(seeds, dtype=np.int64)


def _enforce_connectivity(labels: np.ndarray, min_size: int) -> np.ndarray:
    """Reassign connected components smaller than min_size to the neighbor
    label that dominates their boundary."""
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    out = labels.copy()
    for lid in np.unique(labels):
        comp, ncomp = ndimage.label(out == lid, structure=structure)
        if ncomp == 0:
            continue
        sizes = np.bincount(comp.ravel())
        for cid in range(1, ncomp + 1):
            if sizes[cid] >= min_size:
                continue
            mask = comp == cid
            ring = ndimage.binary_dilation(mask, structure=structure) & ~mask
            neighbors = out[ring]
            neighbors = neighbors[neighbors != lid]
            if neighbors.size == 0:
                continue
            out[mask] = np.bincount(neighbors).argmax()
    return out


def slic_segment(lab: np.ndarray, params: SlicParams = SlicParams()) -> Segmentation:
    """Cluster pixels on joint color and position similarity.

    Distance is sqrt(d_lab^2 + (d_xy/S)^2 * m^2); each pixel only
    considers centers whose 2S x 2S window covers it. Images smaller
    than one region degenerate to a single cluster.
    """
    lab = np.ascontiguousarray(check_lab_image(lab))
    h, w, _ = lab.shape
    S = params.region_size
    seeds = _grid_seeds(lab, S)
    n = len(seeds)
    centers = np.empty((n, 5))
    centers[:, 0:3] = lab[seeds[:, 0], seeds[:, 1]]
    centers[:, 3] = seeds[:, 0]
    centers[:, 4] = seeds[:, 1]

    labels = np.zeros((h, w), dtype=np.int32)
    dist = np.empty((h, w))
    buf = np.empty(w)
    ratio = (params.compactness**2) / float(S * S)
    _slic_iterations(lab, centers, S, ratio, params.iterations, labels, dist, buf)

    if params.enforce_connectivity and n > 1:
        labels = _enforce_connectivity(labels, min_size=S * S // 4)

    counts = np.bincount(labels.ravel(), minlength=n)
    flat = lab.reshape(-1, 3)
    lf = labels.ravel()
    nz = counts > 0
    # Color means are accumulated relative to each cluster's first pixel:
    # a cluster of identical colors then sums exact zeros, so its mean is
    # bit-exactly that color and repainting painted output is a no-op.
    present, first = np.unique(lf, return_index=True)
    anchors = np.zeros((n, 3))
    anchors[present] = flat[first]
    deltas = flat - anchors[lf]
    for ch in range(3):
        ch_sums = np.bincount(lf, weights=deltas[:, ch], minlength=n)
        centers[nz, ch] = anchors[nz, ch] + ch_sums[nz] / counts[nz]
    ys = np.bincount(lf, weights=np.repeat(np.arange(h, dtype=np.float64), w), minlength=n)
    xs = np.bincount(lf, weights=np.tile(np.arange(w, dtype=np.float64), h), minlength=n)
    centers[nz, 3] = ys[nz] / counts[nz]
    centers[nz, 4] = xs[nz] / counts[nz]
    return Segmentation(labels=labels, centers=centers, counts=counts)


def color_distribution_map(lab: np.ndarray, params: SlicParams = SlicParams()) -> ColorDistMap:
    """Blur, cluster, and paint every pixel with its cluster's mean blurred color.

    blur_k=0 skips the pre-blur (useful for clustering tests on sharp
    synthetic inputs).
    """
    lab = check_lab_image(lab)
    if params.blur_k:
        blurred = gaussian_blur(lab, make_kernel(params.blur_k))
    else:
        blurred = lab.astype(np.float64)
    seg = slic_segment(blurred, params)
    painted = seg.centers[:, 0:3][seg.labels]
    return ColorDistMap(values=painted, params=params)
