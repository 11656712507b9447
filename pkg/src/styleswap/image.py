"""Image I/O and basic raster ops shared by the whole pipeline.

Conventions used throughout the package:
  * color images are float64 numpy arrays of shape (H, W, 3), values in [0, 1]
  * luminance images are float64 arrays of shape (H, W), values in [0, 1]
  * masks are boolean arrays of shape (H, W); True marks the face/skin region
Only PNG is supported for files (lossless, bit-exact round trips).
"""

from __future__ import annotations

import os

import cv2
import numpy as np

# Rec. 601 luma weights; the single fixed RGB -> luminance map of the package.
REC601_WEIGHTS = (0.299, 0.587, 0.114)


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check the (H, W, 3), finite, [0, 1] contract. Returns img unchanged."""
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) array, got shape {getattr(img, 'shape', None)}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image has a zero dimension")
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite values")
    if float(img.min()) < 0.0 or float(img.max()) > 1.0:
        raise ValueError("image values outside [0, 1]")
    return img


def clamp01(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0)


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load an 8-bit or 16-bit RGB PNG and scale it to float64 [0, 1]."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    if not path.lower().endswith(".png"):
        raise ValueError(f"unsupported format (PNG required): {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"could not decode PNG: {path}")
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise ValueError(f"expected an RGB PNG, got shape {raw.shape}: {path}")
    if raw.shape[0] < 1 or raw.shape[1] < 1:
        raise ValueError(f"zero-dimension image: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValueError(f"unsupported PNG bit depth {raw.dtype}: {path}")
    img = raw[:, :, ::-1].astype(np.float64) / scale  # BGR -> RGB
    return validate_image(img)


def save_image(path: str | os.PathLike, img: np.ndarray, bit_depth: int = 8) -> None:
    """Write img as an RGB PNG with the given bit depth (8 or 16)."""
    validate_image(img)
    path = os.fspath(path)
    if bit_depth == 8:
        raw = np.rint(img * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        raw = np.rint(img * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    if not cv2.imwrite(path, raw[:, :, ::-1]):  # RGB -> BGR
        raise ValueError(f"could not write PNG: {path}")


def to_luminance(img: np.ndarray) -> np.ndarray:
    """Per-pixel Rec. 601 luminance: Y = 0.299 R + 0.587 G + 0.114 B."""
    validate_image(img)
    return img @ np.asarray(REC601_WEIGHTS, dtype=np.float64)


def load_luminance(path: str | os.PathLike) -> np.ndarray:
    """Load a grayscale PNG as a float64 (H, W) map in [0, 1]."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"could not decode PNG: {path}")
    if raw.ndim != 2:
        raise ValueError(f"expected a grayscale PNG, got shape {raw.shape}: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValueError(f"unsupported PNG bit depth {raw.dtype}: {path}")
    return raw.astype(np.float64) / scale


def save_luminance(path: str | os.PathLike, lum: np.ndarray,
                   bit_depth: int = 16) -> None:
    """Write an (H, W) map in [0, 1] as a grayscale PNG."""
    lum = np.asarray(lum)
    if lum.ndim != 2:
        raise ValueError(f"expected an (H, W) map, got shape {lum.shape}")
    if not np.isfinite(lum).all() or lum.min() < 0 or lum.max() > 1:
        raise ValueError("luminance values must be finite and within [0, 1]")
    if bit_depth == 8:
        raw = np.rint(lum * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        raw = np.rint(lum * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    if not cv2.imwrite(os.fspath(path), raw):
        raise ValueError(f"could not write PNG: {path}")


def downsample(img: np.ndarray, factor: int) -> np.ndarray:
    """Average-pool factor x factor blocks; factor must be a power of two.

    Works on (H, W, 3) and (H, W) arrays. H and W must be divisible by factor.
    """
    if factor < 1 or (factor & (factor - 1)) != 0:
        raise ValueError(f"factor must be a power of two, got {factor}")
    if img.ndim not in (2, 3):
        raise ValueError(f"expected a 2D or 3D array, got shape {img.shape}")
    h, w = img.shape[:2]
    if h % factor or w % factor:
        raise ValueError(f"dimensions {h}x{w} not divisible by factor {factor}")
    if factor == 1:
        return img.copy()
    shape = (h // factor, factor, w // factor, factor) + img.shape[2:]
    return img.reshape(shape).mean(axis=(1, 3))


def validate_mask(mask: np.ndarray) -> np.ndarray:
    if not isinstance(mask, np.ndarray) or mask.ndim != 2:
        raise ValueError(f"expected an (H, W) mask, got shape {getattr(mask, 'shape', None)}")
    if mask.dtype != np.bool_:
        vals = np.unique(mask)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError("mask values must be 0/1")
        mask = mask.astype(bool)
    return mask


def load_mask(path: str | os.PathLike) -> np.ndarray:
    """Load a single-channel PNG with 0/255 encoding as a boolean mask."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"could not decode PNG: {path}")
    if raw.ndim != 2:
        raise ValueError(f"expected a single-channel mask PNG, got shape {raw.shape}: {path}")
    vals = np.unique(raw)
    if not np.isin(vals, (0, 255)).all():
        raise ValueError(f"mask PNG must use 0/255 encoding, found values {vals[:8]}: {path}")
    return raw == 255


def save_mask(path: str | os.PathLike, mask: np.ndarray) -> None:
    mask = validate_mask(mask)
    raw = np.where(mask, 255, 0).astype(np.uint8)
    if not cv2.imwrite(os.fspath(path), raw):
        raise ValueError(f"could not write PNG: {path}")
