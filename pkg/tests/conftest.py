"""Shared synthetic inputs for the test suite."""

import numpy as np
import pytest


def random_rgb(seed: int, h: int, w: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, (h, w, 3), dtype=np.uint8)


def random_lab(seed: int, h: int, w: int) -> np.ndarray:
    """Random float image inside the Lab box (L in [0,100], a/b in [-100,100])."""
    rng = np.random.default_rng(seed)
    lab = np.empty((h, w, 3))
    lab[:, :, 0] = rng.uniform(0.0, 100.0, (h, w))
    lab[:, :, 1] = rng.uniform(-100.0, 100.0, (h, w))
    lab[:, :, 2] = rng.uniform(-100.0, 100.0, (h, w))
    return lab


def quadrant_lab(h: int = 16, w: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Four uniform quadrants with well-separated colors + ground-truth labels."""
    colors = np.array(
        [
            [20.0, -60.0, 40.0],
            [50.0, 60.0, -40.0],
            [80.0, 0.0, 60.0],
            [35.0, 30.0, -60.0],
        ]
    )
    lab = np.empty((h, w, 3))
    truth = np.empty((h, w), dtype=int)
    h2, w2 = h // 2, w // 2
    for qi, (ys, xs) in enumerate(
        [(slice(0, h2), slice(0, w2)), (slice(0, h2), slice(w2, w)),
         (slice(h2, h), slice(0, w2)), (slice(h2, h), slice(w2, w))]
    ):
        lab[ys, xs] = colors[qi]
        truth[ys, xs] = qi
    return lab, truth


def smooth_photo(seed: int, h: int = 512, w: int = 512) -> np.ndarray:
    """Photo-like uint8 RGB: a few soft blobs over a gradient background."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.zeros((h, w, 3))
    img[:, :, 0] = 80 + 100 * yy / h
    img[:, :, 1] = 90 + 80 * xx / w
    img[:, :, 2] = 120 + 60 * (yy + xx) / (h + w)
    for _ in range(6):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        radius = rng.uniform(0.08, 0.25) * min(h, w)
        blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * radius**2)))
        for c in range(3):
            img[:, :, c] += rng.uniform(-70, 70) * blob
    return np.clip(img, 0, 255).astype(np.uint8)


@pytest.fixture
def tiny_extraction_params():
    """Small schedule and clustering config that keep per-test extraction fast."""
    from compoz import KernelSchedule, SlicParams

    return {
        "schedule": KernelSchedule(min_k=9, max_k=17, step=8),
        "slic": SlicParams(region_size=16, iterations=5, compactness=10.0, blur_k=9),
    }
