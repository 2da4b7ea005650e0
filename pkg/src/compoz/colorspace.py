"""sRGB <-> CIELAB conversion (D65, 2 degree observer).

Pinned convention: IEC 61966-2-1 sRGB companding with the linear segment
below 0.04045, XYZ scaled so that Y(white) = 100, and the D65 white point
(Xn=95.047, Yn=100.0, Zn=108.883). All Lab math is double precision so
downstream norms and means stay stable over ~1e5 pixels.
"""

from __future__ import annotations

import logging

import numpy as np
from PIL import Image

from .validation import check_lab_image, check_rgb_image

log = logging.getLogger(__name__)

WHITE_POINT = (95.047, 100.0, 108.883)

# sRGB D65 linear-RGB -> XYZ. The inverse is computed numerically so the
# round trip closes to machine precision.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)

_DELTA = 6.0 / 29.0


def srgb_to_lab(img: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) uint8 sRGB image to float64 CIELAB.

    L lands in [0, 100]; a and b stay within [-128, 128] for 8-bit input.
    """
    rgb = check_rgb_image(img).astype(np.float64) / 255.0
    linear = np.where(rgb > 0.04045, ((rgb + 0.055) / 1.055) ** 2.4, rgb / 12.92)
    xyz = linear @ _RGB_TO_XYZ.T * 100.0
    t = xyz / WHITE_POINT
    f = np.where(t > _DELTA**3, np.cbrt(t), t / (3.0 * _DELTA**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Convert float CIELAB back to uint8 sRGB, clamping out-of-gamut values."""
    lab = check_lab_image(lab)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f > _DELTA, f**3, 3.0 * _DELTA**2 * (f - 4.0 / 29.0))
    xyz = t * WHITE_POINT
    linear = xyz / 100.0 @ _XYZ_TO_RGB.T
    linear = np.clip(linear, 0.0, 1.0)
    srgb = np.where(linear > 0.0031308, 1.055 * linear ** (1.0 / 2.4) - 0.055, 12.92 * linear)
    return np.clip(np.rint(srgb * 255.0), 0, 255).astype(np.uint8)


def load_rgb(path) -> np.ndarray:
    """Read an 8-bit image file as an (H, W, 3) uint8 RGB array.

    Alpha channels are dropped with a warning; palette and grayscale
    images are expanded to RGB.
    """
    with Image.open(path) as im:
        if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
            log.warning("%s has an alpha channel; dropping it", path)
        rgb = im.convert("RGB")
        return np.asarray(rgb, dtype=np.uint8)


def save_rgb(path, img: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 RGB array as an image file (format by suffix)."""
    Image.fromarray(check_rgb_image(img)).save(path)
