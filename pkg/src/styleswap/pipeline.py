"""End-to-end single-image swap: align, transform, realign, blend.

Landmarks and mask arrive as inputs; anything that locates faces lives behind
the LandmarkDetector protocol so a real detector can be plugged in without
touching the core. Style images are never read here: identity is baked into
the network weights at training time.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .compositing import composite_swap
from .geometry import (LandmarkSet, ReferenceFace, align_to_reference,
                       invert_affine)
from .image import validate_image, validate_mask


class LandmarkDetector(Protocol):
    """Boundary for optional detector integration; fixtures satisfy it too."""

    def detect(self, img: np.ndarray) -> LandmarkSet: ...


class PassthroughNet:
    """Identity stand-in for a trained net; used by tests and dry runs."""

    def __init__(self, resolution: int):
        self.resolution = int(resolution)

    def transform(self, img: np.ndarray) -> np.ndarray:
        validate_image(img)
        if img.shape[0] != self.resolution or img.shape[1] != self.resolution:
            raise ValueError(f"expected {self.resolution}px input, got {img.shape[:2]}")
        return img.copy()


def swap(input_img: np.ndarray, landmarks: LandmarkSet, mask: np.ndarray,
         net, reference: ReferenceFace) -> np.ndarray:
    """Swap the identity of the masked face in input_img using the net.

    The output has the input's shape, equals it exactly outside the mask, and
    carries the realigned network output blended in via seamless cloning.
    """
    validate_image(input_img)
    validate_mask(mask)
    if mask.shape != input_img.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {input_img.shape[:2]}")
    if net.resolution != reference.resolution:
        raise ValueError(
            f"net resolution {net.resolution} != reference resolution {reference.resolution}")
    aligned, _, t = align_to_reference(input_img, landmarks, reference)
    generated = net.transform(aligned)
    return composite_swap(input_img, generated, invert_affine(t), mask)
