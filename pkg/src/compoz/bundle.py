"""Condition bundles: assemble, mask, mix, and serialize extraction outputs.

A bundle is the transfer currency between extraction and any downstream
generator: one structure plane, one color plane, optional per-plane
masks, re-weighting coefficients, and enough provenance to re-extract
bit-identically.

On-disk layout (one directory per bundle, format_version 1):
    struct.png       16-bit grayscale, values scaled by meta struct.scale
    color.png        8-bit sRGB rendering of the color plane
    mask_struct.png  optional 8-bit 0/255
    mask_color.png   optional 8-bit 0/255
    meta.json        dims, scale factors, weights, params, seeds, hashes

Every file is written to a temp name and renamed, so partially written
bundles are never visible.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__ as _tool_version
from .colordist import ColorDistMap, SlicParams, color_distribution_map
from .colorspace import lab_to_srgb, srgb_to_lab
from .filtering import KernelSchedule, sample_k
from .structure import SALIENCY_SCALE, SaliencyMap, saliency_local
from .validation import check_mask, check_rgb_image

FORMAT_VERSION = 1


class BundleFormatError(Exception):
    """Raised when a bundle directory is missing, corrupt, or inconsistent."""


@dataclass(frozen=True)
class ConditionWeights:
    """Downstream re-weighting coefficients; this toolkit only carries them."""

    w_struct: float = 1.0
    w_color: float = 1.0

    def __post_init__(self):
        for name, v in (("w_struct", self.w_struct), ("w_color", self.w_color)):
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class MaskSynthParams:
    """Random mask recipe: one filled ellipse or rectangle, maybe inverted."""

    shape: str = "random"  # "ellipse", "rectangle", or "random"
    min_frac: float = 0.10
    max_frac: float = 0.60
    invert_prob: float = 0.5

    def __post_init__(self):
        if self.shape not in ("ellipse", "rectangle", "random"):
            raise ValueError(f"shape must be ellipse/rectangle/random, got {self.shape!r}")
        if not (0.0 < self.min_frac <= self.max_frac <= 1.0):
            raise ValueError("size fractions must satisfy 0 < min <= max <= 1")
        if not (0.0 <= self.invert_prob <= 1.0):
            raise ValueError("invert_prob must be in [0, 1]")


@dataclass(eq=False)
class ConditionBundle:
    struct_map: SaliencyMap
    color_map: ColorDistMap
    mask_struct: np.ndarray | None = None
    mask_color: np.ndarray | None = None
    weights: ConditionWeights = field(default_factory=ConditionWeights)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def height(self) -> int:
        return self.struct_map.height

    @property
    def width(self) -> int:
        return self.struct_map.width

    def validate(self) -> None:
        """Dimensional coherence across all planes and masks."""
        h, w = self.struct_map.height, self.struct_map.width
        if self.color_map.values.shape[:2] != (h, w):
            raise ValueError(
                f"color plane {self.color_map.values.shape[:2]} does not match struct plane {(h, w)}"
            )
        if self.mask_struct is not None:
            self.mask_struct = check_mask(self.mask_struct, h, w)
        if self.mask_color is not None:
            self.mask_color = check_mask(self.mask_color, h, w)

    def conditioning_planes(self) -> dict:
        """Planes as a downstream consumer sees them: maps plus explicit
        mask channels (all-true when no mask was applied)."""
        h, w = self.height, self.width
        ms = self.mask_struct if self.mask_struct is not None else np.ones((h, w), bool)
        mc = self.mask_color if self.mask_color is not None else np.ones((h, w), bool)
        return {
            "struct": self.struct_map.values.copy(),
            "struct_mask": ms.astype(np.float64),
            "color": self.color_map.values.copy(),
            "color_mask": mc.astype(np.float64),
        }


def _hash_image(rgb: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.asarray(rgb.shape, dtype=np.int64).tobytes())
    digest.update(np.ascontiguousarray(rgb).tobytes())
    return digest.hexdigest()


def extract_bundle(
    img: np.ndarray,
    schedule: KernelSchedule = KernelSchedule(),
    slic: SlicParams = SlicParams(),
    seed: int = 0,
    k: int | None = None,
    sigma: float | None = None,
    weights: ConditionWeights | None = None,
    timings: dict | None = None,
) -> ConditionBundle:
    """Run the full extraction on an 8-bit RGB image.

    Draws the structure window size from the schedule (unless k pins it),
    computes the localized structure map and the color-distribution map,
    and records provenance sufficient for bit-identical re-extraction.
    Pass a dict as `timings` to receive per-operator wall times; they are
    deliberately not part of the bundle so outputs stay byte-stable.
    """
    rgb = check_rgb_image(img)
    rng = np.random.default_rng(seed)
    drawn_k = int(k) if k is not None else sample_k(schedule, rng)
    lab = srgb_to_lab(rgb)

    t0 = time.perf_counter()
    struct_map = saliency_local(lab, drawn_k, sigma)
    t1 = time.perf_counter()
    color_map = color_distribution_map(lab, slic)
    t2 = time.perf_counter()
    if timings is not None:
        timings["struct_s"] = t1 - t0
        timings["color_s"] = t2 - t1

    provenance = {
        "source_sha256": _hash_image(rgb),
        "k": struct_map.k,
        "sigma": struct_map.sigma,
        "seed": int(seed),
        "schedule": asdict(schedule),
        "slic": asdict(slic),
        "tool_version": _tool_version,
    }
    return ConditionBundle(
        struct_map=struct_map,
        color_map=color_map,
        weights=weights or ConditionWeights(),
        provenance=provenance,
    )


def resize_bilinear(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resampling with half-pixel-centered sampling and clamped edges."""
    src = np.asarray(arr, dtype=np.float64)
    h, w = src.shape[0], src.shape[1]
    if (h, w) == (height, width):
        return src.copy()
    ys = (np.arange(height) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width) + 0.5) * (w / width) - 0.5
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(np.int64)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)
    wx = np.clip(xs - x0, 0.0, 1.0)
    if src.ndim == 2:
        top = src[y0][:, x0] * (1 - wx) + src[y0][:, x1] * wx
        bot = src[y1][:, x0] * (1 - wx) + src[y1][:, x1] * wx
        return top * (1 - wy)[:, None] + bot * wy[:, None]
    top = src[y0][:, x0] * (1 - wx)[None, :, None] + src[y0][:, x1] * wx[None, :, None]
    bot = src[y1][:, x0] * (1 - wx)[None, :, None] + src[y1][:, x1] * wx[None, :, None]
    return top * (1 - wy)[:, None, None] + bot * wy[:, None, None]


def mix_bundles(struct_src: ConditionBundle, color_src: ConditionBundle) -> ConditionBundle:
    """Combine the structure planes of one bundle with the color planes of another.

    When dimensions differ, the color source is resampled bilinearly to
    the structure source's dimensions (masks via 0.5-thresholded bilinear).
    """
    h, w = struct_src.height, struct_src.width
    color_values = resize_bilinear(color_src.color_map.values, h, w)
    mask_color = color_src.mask_color
    if mask_color is not None and mask_color.shape != (h, w):
        mask_color = resize_bilinear(mask_color.astype(np.float64), h, w) >= 0.5
    provenance = {
        "mixed": True,
        # the structure plane defines the bundle's re-extraction recipe
        "k": struct_src.struct_map.k,
        "sigma": struct_src.struct_map.sigma,
        "struct_parent": dict(struct_src.provenance),
        "color_parent": dict(color_src.provenance),
        "tool_version": _tool_version,
    }
    return ConditionBundle(
        struct_map=SaliencyMap(
            values=struct_src.struct_map.values.copy(),
            normalized=struct_src.struct_map.normalized,
            k=struct_src.struct_map.k,
            sigma=struct_src.struct_map.sigma,
        ),
        color_map=ColorDistMap(values=color_values, params=color_src.color_map.params),
        mask_struct=None if struct_src.mask_struct is None else struct_src.mask_struct.copy(),
        mask_color=mask_color if mask_color is None else mask_color.copy(),
        weights=ConditionWeights(struct_src.weights.w_struct, color_src.weights.w_color),
        provenance=provenance,
    )


def synth_mask(
    width: int,
    height: int,
    params: MaskSynthParams = MaskSynthParams(),
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Draw one randomly sized, randomly placed filled shape, maybe inverted.

    Side lengths are uniform fractions of each image dimension within the
    configured range; the shape always lies fully inside the image.
    """
    if width < 1 or height < 1:
        raise ValueError("mask dimensions must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    shape = params.shape
    if shape == "random":
        shape = "ellipse" if rng.integers(2) == 0 else "rectangle"
    frac_w = rng.uniform(params.min_frac, params.max_frac)
    frac_h = rng.uniform(params.min_frac, params.max_frac)
    rw = max(1, int(round(frac_w * width)))
    rh = max(1, int(round(frac_h * height)))
    rw, rh = min(rw, width), min(rh, height)
    x0 = int(rng.integers(0, width - rw + 1))
    y0 = int(rng.integers(0, height - rh + 1))
    mask = np.zeros((height, width), dtype=bool)
    if shape == "rectangle":
        mask[y0 : y0 + rh, x0 : x0 + rw] = True
    else:
        cy, cx = y0 + (rh - 1) / 2.0, x0 + (rw - 1) / 2.0
        ry, rx = max(rh / 2.0, 0.5), max(rw / 2.0, 0.5)
        yy, xx = np.mgrid[0:height, 0:width]
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    if rng.uniform() < params.invert_prob:
        mask = ~mask
    return mask


def apply_mask(bundle: ConditionBundle, mask: np.ndarray, target: str = "both") -> ConditionBundle:
    """Attach a mask to the chosen plane(s) and zero the gated values.

    The mask rides along as an explicit extra channel, and values under
    inactive regions are zeroed so the planes stay safe for consumers
    that ignore masks. Idempotent for a fixed mask.
    """
    if target not in ("struct", "color", "both"):
        raise ValueError(f"target must be struct/color/both, got {target!r}")
    mask = check_mask(mask, bundle.height, bundle.width)
    struct_values = bundle.struct_map.values.copy()
    color_values = bundle.color_map.values.copy()
    mask_struct = bundle.mask_struct
    mask_color = bundle.mask_color
    if target in ("struct", "both"):
        struct_values[~mask] = 0.0
        mask_struct = mask.copy()
    if target in ("color", "both"):
        color_values[~mask] = 0.0
        mask_color = mask.copy()
    return ConditionBundle(
        struct_map=SaliencyMap(
            values=struct_values,
            normalized=bundle.struct_map.normalized,
            k=bundle.struct_map.k,
            sigma=bundle.struct_map.sigma,
        ),
        color_map=ColorDistMap(values=color_values, params=bundle.color_map.params),
        mask_struct=mask_struct,
        mask_color=mask_color,
        weights=bundle.weights,
        provenance=dict(bundle.provenance),
    )


def struct_to_u16(values: np.ndarray, scale: float) -> np.ndarray:
    return np.clip(np.rint(np.clip(values, 0.0, scale) / scale * 65535.0), 0, 65535).astype(
        np.uint16
    )


def u16_to_struct(raw: np.ndarray, scale: float) -> np.ndarray:
    return raw.astype(np.float64) / 65535.0 * scale


def _write_atomic(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _save_png(path: Path, arr: np.ndarray) -> None:
    _write_atomic(path, lambda p: Image.fromarray(arr).save(p, format="PNG"))


def save_bundle(bundle: ConditionBundle, path) -> None:
    """Write a bundle directory; meta.json goes last so readers never see
    a complete-looking bundle with missing planes."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    scale = 1.0 if bundle.struct_map.normalized else SALIENCY_SCALE
    _save_png(out / "struct.png", struct_to_u16(bundle.struct_map.values, scale))
    _save_png(out / "color.png", lab_to_srgb(bundle.color_map.values))
    if bundle.mask_struct is not None:
        _save_png(out / "mask_struct.png", bundle.mask_struct.astype(np.uint8) * 255)
    if bundle.mask_color is not None:
        _save_png(out / "mask_color.png", bundle.mask_color.astype(np.uint8) * 255)
    meta = {
        "format_version": FORMAT_VERSION,
        "width": bundle.width,
        "height": bundle.height,
        "struct": {
            "normalized": bundle.struct_map.normalized,
            "k": bundle.struct_map.k,
            "sigma": bundle.struct_map.sigma,
            "scale": scale,
        },
        "slic": asdict(bundle.color_map.params),
        "weights": {"w_struct": bundle.weights.w_struct, "w_color": bundle.weights.w_color},
        "masks": {
            "struct": bundle.mask_struct is not None,
            "color": bundle.mask_color is not None,
        },
        "provenance": bundle.provenance,
    }
    text = json.dumps(meta, indent=2, sort_keys=True)
    _write_atomic(out / "meta.json", lambda p: p.write_text(text + "\n"))


def _load_png(path: Path) -> np.ndarray:
    if not path.is_file():
        raise BundleFormatError(f"missing bundle plane: {path}")
    return np.asarray(Image.open(path))


def load_bundle(path) -> ConditionBundle:
    """Read a bundle directory back; validates version and dimensional coherence."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise BundleFormatError(f"no meta.json under {root}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"unparseable meta.json: {exc}") from exc
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleFormatError(f"unsupported format_version {version!r}")
    try:
        height, width = int(meta["height"]), int(meta["width"])
        struct_meta = meta["struct"]
        scale = float(struct_meta["scale"])
        slic = SlicParams(**meta["slic"])
        weights = ConditionWeights(**meta["weights"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleFormatError(f"bad meta.json contents: {exc}") from exc

    raw = _load_png(root / "struct.png")
    if raw.shape != (height, width):
        raise BundleFormatError(f"struct plane is {raw.shape}, meta says {(height, width)}")
    struct_map = SaliencyMap(
        values=u16_to_struct(raw, scale),
        normalized=bool(struct_meta["normalized"]),
        k=int(struct_meta["k"]),
        sigma=float(struct_meta["sigma"]),
    )
    color_raw = _load_png(root / "color.png")
    if color_raw.shape != (height, width, 3):
        raise BundleFormatError(f"color plane is {color_raw.shape}, meta says {(height, width, 3)}")
    color_map = ColorDistMap(values=srgb_to_lab(color_raw), params=slic)

    masks = {}
    for name, present in meta.get("masks", {}).items():
        if not present:
            masks[name] = None
            continue
        m = _load_png(root / f"mask_{name}.png")
        if m.shape != (height, width):
            raise BundleFormatError(f"mask_{name} plane is {m.shape}, meta says {(height, width)}")
        masks[name] = m > 0
    try:
        return ConditionBundle(
            struct_map=struct_map,
            color_map=color_map,
            mask_struct=masks.get("struct"),
            mask_color=masks.get("color"),
            weights=weights,
            provenance=meta.get("provenance", {}),
        )
    except ValueError as exc:
        raise BundleFormatError(str(exc)) from exc
