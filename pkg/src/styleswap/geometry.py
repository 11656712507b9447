"""Facial landmark geometry: affine alignment to a reference face and warping.

All faces are described by 68 ordered (x, y) landmarks in pixel coordinates
(x grows right, y grows down). Alignment maps a face to the frontal reference
frame with a plain affine transform fit by least squares over all 68 points.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .image import clamp01

N_LANDMARKS = 68

# Index permutation applied alongside a horizontal mirror so flipped landmarks
# keep the canonical 68-point ordering (jaw, brows, nose, eyes, mouth).
_FLIP_PAIRS = (
    # jawline
    (0, 16), (1, 15), (2, 14), (3, 13), (4, 12), (5, 11), (6, 10), (7, 9),
    # brows
    (17, 26), (18, 25), (19, 24), (20, 23), (21, 22),
    # nostrils
    (31, 35), (32, 34),
    # eyes
    (36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46),
    # outer mouth
    (48, 54), (49, 53), (50, 52), (55, 59), (56, 58),
    # inner mouth
    (60, 64), (61, 63), (65, 67),
)

FLIP_PERMUTATION = np.arange(N_LANDMARKS)
for _a, _b in _FLIP_PAIRS:
    FLIP_PERMUTATION[_a], FLIP_PERMUTATION[_b] = _b, _a


@dataclass(frozen=True)
class LandmarkSet:
    """68 ordered (x, y) facial keypoints, float64 array of shape (68, 2)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValueError(f"expected {N_LANDMARKS} (x, y) pairs, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("landmarks contain non-finite coordinates")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "LandmarkSet":
        with open(path) as f:
            data = json.load(f)
        return cls(np.asarray(data, dtype=np.float64))

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as f:
            json.dump(self.points.tolist(), f)

    def flipped(self, width: int) -> "LandmarkSet":
        """Mirror around the vertical axis of a width-pixel image and reorder."""
        pts = self.points.copy()
        pts[:, 0] = (width - 1) - pts[:, 0]
        return LandmarkSet(pts[FLIP_PERMUTATION])


@dataclass(frozen=True)
class AffineTransform:
    """p -> A @ p + t on (x, y) points; A must be invertible."""

    matrix: np.ndarray  # (2, 2)
    offset: np.ndarray  # (2,)

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=np.float64)
        t = np.asarray(self.offset, dtype=np.float64)
        if a.shape != (2, 2) or t.shape != (2,):
            raise ValueError("affine transform needs a 2x2 matrix and a 2-vector")
        if not (np.isfinite(a).all() and np.isfinite(t).all()):
            raise ValueError("affine transform has non-finite entries")
        if abs(np.linalg.det(a)) < 1e-12:
            raise ValueError("affine matrix is singular")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "offset", t)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.eye(2), np.zeros(2))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + self.offset

    def compose(self, other: "AffineTransform") -> "AffineTransform":
        """Returns self o other (apply other first)."""
        return AffineTransform(self.matrix @ other.matrix,
                               self.matrix @ other.offset + self.offset)

    def to_dict(self) -> dict:
        return {"A": self.matrix.tolist(), "t": self.offset.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineTransform":
        return cls(np.asarray(d["A"]), np.asarray(d["t"]))


@dataclass(frozen=True)
class ReferenceFace:
    """Frontal landmark template in a square frame of side `resolution`."""

    landmarks: LandmarkSet
    resolution: int

    def __post_init__(self):
        if self.resolution < 8:
            raise ValueError(f"reference resolution too small: {self.resolution}")
        pts = self.landmarks.points
        if pts.min() < 0 or pts.max() >= self.resolution:
            raise ValueError("reference landmarks must lie inside the frame")

    def scaled(self, resolution: int) -> "ReferenceFace":
        """Rescale the template linearly to another square resolution."""
        if resolution == self.resolution:
            return self
        s = resolution / self.resolution
        return ReferenceFace(LandmarkSet(self.landmarks.points * s), resolution)

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ReferenceFace":
        with open(path) as f:
            data = json.load(f)
        return cls(LandmarkSet(np.asarray(data["points"])), int(data["resolution"]))

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as f:
            json.dump({"resolution": self.resolution,
                       "points": self.landmarks.points.tolist()}, f)


def default_reference(resolution: int = 128) -> ReferenceFace:
    """The packaged reference face; honors the STYLESWAP_DATA_DIR override."""
    root = os.environ.get("STYLESWAP_DATA_DIR")
    if root is None:
        root = os.path.join(os.path.dirname(__file__), "data")
    ref = ReferenceFace.from_json(os.path.join(root, "reference_face_128.json"))
    return ref.scaled(resolution)


def estimate_affine(src: LandmarkSet, dst: LandmarkSet) -> AffineTransform:
    """Least-squares (A, t) minimizing sum_i ||A src_i + t - dst_i||^2.

    Solved through the 3x3 normal equations; raises on collinear/degenerate
    source points, where the system is singular.
    """
    x = np.hstack([src.points, np.ones((N_LANDMARKS, 1))])  # (68, 3)
    gram = x.T @ x
    if np.linalg.matrix_rank(gram) < 3:
        raise ValueError("singular system: source landmarks are collinear or degenerate")
    params = np.linalg.solve(gram, x.T @ dst.points)  # (3, 2)
    return AffineTransform(params[:2].T, params[2])


def invert_affine(transform: AffineTransform) -> AffineTransform:
    a_inv = np.linalg.inv(transform.matrix)
    return AffineTransform(a_inv, -a_inv @ transform.offset)


def transform_landmarks(transform: AffineTransform, landmarks: LandmarkSet) -> LandmarkSet:
    return LandmarkSet(transform.apply(landmarks.points))


def warp_image(img: np.ndarray, transform: AffineTransform,
               out_h: int, out_w: int) -> np.ndarray:
    """Apply `transform` to an image via inverse-mapped bilinear sampling.

    The transform maps input pixel coordinates to output coordinates; samples
    falling outside the input are filled with 0. Works on (H, W) and (H, W, C).
    """
    inv = invert_affine(transform)
    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    src = inv.apply(np.stack([xs.ravel(), ys.ravel()], axis=1))
    coords = np.stack([src[:, 1], src[:, 0]])  # map_coordinates wants (row, col)
    if img.ndim == 2:
        out = map_coordinates(img.astype(np.float64), coords, order=1,
                              mode="constant", cval=0.0)
        return out.reshape(out_h, out_w)
    planes = [map_coordinates(img[:, :, c].astype(np.float64), coords, order=1,
                              mode="constant", cval=0.0).reshape(out_h, out_w)
              for c in range(img.shape[2])]
    return np.stack(planes, axis=2)


def landmark_distance(a: LandmarkSet, b: LandmarkSet) -> float:
    """Euclidean norm of the 136-dimensional landmark difference vector."""
    return float(np.linalg.norm(a.points - b.points))


def align_to_reference(img: np.ndarray, landmarks: LandmarkSet,
                       reference: ReferenceFace):
    """Warp a face into the reference frame; returns (image, landmarks, T).

    T maps input coordinates to reference coordinates; the returned landmarks
    are the input landmarks carried through T.
    """
    t = estimate_affine(landmarks, reference.landmarks)
    r = reference.resolution
    aligned = clamp01(warp_image(img, t, r, r))
    return aligned, LandmarkSet(t.apply(landmarks.points)), t
