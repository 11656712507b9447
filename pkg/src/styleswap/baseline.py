"""Nearest-landmark comparison method.

Runs the same align/realign/blend pipeline as the network swap, but the
"generated" face is simply the style image whose landmarks sit closest to the
input's in the reference frame. Selection never looks at pixel values.
"""

from __future__ import annotations

import numpy as np

from .compositing import composite_swap
from .geometry import LandmarkSet, align_to_reference, invert_affine
from .image import validate_image, validate_mask
from .losses import select_style_subset
from .trainer import StyleSet


def baseline_swap(input_img: np.ndarray, input_landmarks: LandmarkSet,
                  styles: StyleSet, mask: np.ndarray) -> np.ndarray:
    """Swap using the landmark-nearest style face instead of a network."""
    validate_image(input_img)
    validate_mask(mask)
    if mask.shape != input_img.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {input_img.shape[:2]}")
    if len(styles) == 0:
        raise ValueError("empty style set")
    _, lm_aligned, t = align_to_reference(input_img, input_landmarks, styles.reference)
    chosen = select_style_subset(lm_aligned, styles.landmarks, 1)[0]
    return composite_swap(input_img, styles.images[chosen], invert_affine(t), mask)


def select_baseline_index(input_landmarks_aligned: LandmarkSet, styles: StyleSet) -> int:
    """Index of the nearest style face; exposed for inspection and tests."""
    return select_style_subset(input_landmarks_aligned, styles.landmarks, 1)[0]
