"""Scikit-learn style wrappers around the extraction operators.

These follow the BaseEstimator/TransformerMixin conventions (get_params,
set_params, fit returning self, stateless transform) so extraction can
sit inside pipelines, grid searches, and joblib-parallel batch code.
Each estimator takes a list of (H, W, 3) uint8 RGB arrays, or a single
one, and returns one output object per image.

Per-image randomness is derived from (seed, image position), so
transform is a pure function of its inputs and the constructor params.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .bundle import ConditionBundle, ConditionWeights, extract_bundle
from .colordist import ColorDistMap, SlicParams, color_distribution_map
from .colorspace import srgb_to_lab
from .filtering import KernelSchedule, sample_k
from .structure import SaliencyMap, saliency_global, saliency_local
from .validation import check_rgb_image


def _as_image_list(X) -> list[np.ndarray]:
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [check_rgb_image(X)]
    return [check_rgb_image(img) for img in X]


class StructureExtractor(BaseEstimator, TransformerMixin):
    """Extract spatial-structure saliency maps from RGB images.

    k=None draws a window size per image from the schedule, seeded by
    (seed, image index).
    """

    def __init__(self, k=None, sigma=None, variant="local", min_k=193, max_k=321,
                 step=16, seed=0):
        self.k = k
        self.sigma = sigma
        self.variant = variant
        self.min_k = min_k
        self.max_k = max_k
        self.step = step
        self.seed = seed

    def _schedule(self) -> KernelSchedule:
        return KernelSchedule(min_k=self.min_k, max_k=self.max_k, step=self.step)

    def fit(self, X=None, y=None):
        if self.variant not in ("local", "global"):
            raise ValueError(f"variant must be 'local' or 'global', got {self.variant!r}")
        self._schedule()
        return self

    def transform(self, X) -> list[SaliencyMap]:
        if self.variant not in ("local", "global"):
            raise ValueError(f"variant must be 'local' or 'global', got {self.variant!r}")
        schedule = self._schedule()
        out = []
        for i, img in enumerate(_as_image_list(X)):
            k = self.k
            if k is None:
                k = sample_k(schedule, np.random.default_rng((self.seed, i)))
            lab = srgb_to_lab(img)
            if self.variant == "local":
                out.append(saliency_local(lab, k, self.sigma))
            else:
                out.append(saliency_global(lab, k, self.sigma))
        return out


class ColorDistributionExtractor(BaseEstimator, TransformerMixin):
    """Extract superpixel-painted color-distribution maps from RGB images."""

    def __init__(self, region_size=128, iterations=20, compactness=10.0, blur_k=257,
                 enforce_connectivity=True):
        self.region_size = region_size
        self.iterations = iterations
        self.compactness = compactness
        self.blur_k = blur_k
        self.enforce_connectivity = enforce_connectivity

    def _params(self) -> SlicParams:
        return SlicParams(
            region_size=self.region_size,
            iterations=self.iterations,
            compactness=self.compactness,
            blur_k=self.blur_k,
            enforce_connectivity=self.enforce_connectivity,
        )

    def fit(self, X=None, y=None):
        self._params()
        return self

    def transform(self, X) -> list[ColorDistMap]:
        params = self._params()
        return [color_distribution_map(srgb_to_lab(img), params) for img in _as_image_list(X)]


class CompositionExtractor(BaseEstimator, TransformerMixin):
    """Extract complete condition bundles (structure + color + provenance)."""

    def __init__(self, min_k=193, max_k=321, step=16, region_size=128, iterations=20,
                 compactness=10.0, blur_k=257, enforce_connectivity=True,
                 w_struct=1.0, w_color=1.0, seed=0):
        self.min_k = min_k
        self.max_k = max_k
        self.step = step
        self.region_size = region_size
        self.iterations = iterations
        self.compactness = compactness
        self.blur_k = blur_k
        self.enforce_connectivity = enforce_connectivity
        self.w_struct = w_struct
        self.w_color = w_color
        self.seed = seed

    def fit(self, X=None, y=None):
        KernelSchedule(min_k=self.min_k, max_k=self.max_k, step=self.step)
        SlicParams(
            region_size=self.region_size,
            iterations=self.iterations,
            compactness=self.compactness,
            blur_k=self.blur_k,
            enforce_connectivity=self.enforce_connectivity,
        )
        ConditionWeights(self.w_struct, self.w_color)
        return self

    def transform(self, X) -> list[ConditionBundle]:
        schedule = KernelSchedule(min_k=self.min_k, max_k=self.max_k, step=self.step)
        slic = SlicParams(
            region_size=self.region_size,
            iterations=self.iterations,
            compactness=self.compactness,
            blur_k=self.blur_k,
            enforce_connectivity=self.enforce_connectivity,
        )
        weights = ConditionWeights(self.w_struct, self.w_color)
        out = []
        for i, img in enumerate(_as_image_list(X)):
            # scalar per-image seed keeps provenance JSON-serializable
            sub_seed = int(np.random.SeedSequence((self.seed, i)).generate_state(1)[0])
            out.append(extract_bundle(img, schedule, slic, seed=sub_seed, weights=weights))
        return out
