"""Procedural face and lighting data.

Everything here is synthetic and seeded: a canonical 68-point landmark
template, jittered identities rendered as smooth shaded images, posed scene
fixtures with masks, and a Lambertian relighting corpus for the lighting
embedding. Tests and the toy CLI corpus are built from these generators, so
the whole pipeline can run without any real face data.

The template is laid out on a 128x128 frame, symmetric about x = 63.5, and
its mirror image equals its own flip permutation exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import AffineTransform, LandmarkSet, ReferenceFace
from .image import clamp01, downsample
from .lightnet import LightingPair

TEMPLATE_RESOLUTION = 128


def template_landmarks_128() -> np.ndarray:
    """Canonical (68, 2) landmark template on a 128x128 frame, (x, y) order."""
    pts = np.zeros((68, 2))
    cx = 63.5
    # jaw 0-16: ellipse arc, left ear -> chin -> right ear
    i = np.arange(17)
    pts[0:17, 0] = cx - 42.0 * np.cos(i * np.pi / 16)
    pts[0:17, 1] = 62.0 + 52.0 * np.sin(i * np.pi / 16)
    # brows 17-21 (left) and 22-26 (right, mirrored)
    j = np.arange(5)
    bx = 30.0 + 6.25 * j
    by = 42.0 - 4.0 * np.sin(j * np.pi / 4)
    pts[17:22, 0], pts[17:22, 1] = bx, by
    pts[22:27, 0], pts[22:27, 1] = (127.0 - bx)[::-1], by[::-1]
    # nose bridge 27-30 and nostril line 31-35
    pts[27:31, 0] = cx
    pts[27:31, 1] = 50.0 + 7.0 * np.arange(4)
    pts[31:36, 0] = np.array([55.0, 59.25, cx, 67.75, 72.0])
    pts[31:36, 1] = np.array([78.0, 80.0, 81.0, 80.0, 78.0])
    # eyes 36-41 (left) and 42-47 (right, mirrored)
    left_eye = np.array([[36.0, 52.0], [41.0, 49.4], [47.0, 49.4],
                         [52.0, 52.0], [47.0, 54.6], [41.0, 54.6]])
    pts[36:42] = left_eye
    right_eye = left_eye.copy()
    right_eye[:, 0] = 127.0 - right_eye[:, 0]
    pts[42:48] = right_eye[[3, 2, 1, 0, 5, 4]]
    # outer mouth 48-59, inner mouth 60-67
    pts[48:60] = np.array([
        [46.5, 90.0], [52.0, 85.5], [58.0, 83.5], [cx, 84.5], [69.0, 83.5],
        [75.0, 85.5], [80.5, 90.0], [75.0, 94.5], [69.0, 97.0], [cx, 97.5],
        [58.0, 97.0], [52.0, 94.5]])
    pts[60:68] = np.array([
        [50.5, 90.0], [57.0, 87.5], [cx, 88.0], [70.0, 87.5],
        [76.5, 90.0], [70.0, 92.5], [cx, 93.0], [57.0, 92.5]])
    return pts


def canonical_landmarks(resolution: int = TEMPLATE_RESOLUTION) -> LandmarkSet:
    pts = template_landmarks_128() * (resolution / TEMPLATE_RESOLUTION)
    return LandmarkSet(points=pts)


def make_reference(resolution: int = TEMPLATE_RESOLUTION) -> ReferenceFace:
    """The packaged reference fixture is generated from this."""
    return ReferenceFace(landmarks=canonical_landmarks(resolution), resolution=resolution)


# ---------------------------------------------------------------------------
# identity jitter and rendering


def jitter_landmarks(rng: np.random.Generator, pts: np.ndarray,
                     strength: float = 1.0) -> np.ndarray:
    """Identity-like deformation of the template: parametric plus noise."""
    out = pts.copy()
    cx = np.mean(pts[0:17, 0])
    jaw_w = 1.0 + strength * rng.uniform(-0.08, 0.08)
    face_h = 1.0 + strength * rng.uniform(-0.06, 0.06)
    out[0:17, 0] = cx + (out[0:17, 0] - cx) * jaw_w
    out[0:17, 1] = pts[8, 1] + (out[0:17, 1] - pts[8, 1]) * face_h
    eye_spread = strength * rng.uniform(-2.5, 2.5)
    out[36:42, 0] -= eye_spread
    out[42:48, 0] += eye_spread
    mouth_w = 1.0 + strength * rng.uniform(-0.1, 0.1)
    mcx = np.mean(pts[48:68, 0])
    out[48:68, 0] = mcx + (out[48:68, 0] - mcx) * mouth_w
    out[17:27, 1] += strength * rng.uniform(-2.0, 2.0)
    out[27:36, 1] += strength * rng.uniform(-1.5, 1.5)
    out += rng.normal(0.0, 0.7 * strength, size=out.shape)
    return out


def _grid(shape):
    yy, xx = np.mgrid[0: shape[0], 0: shape[1]].astype(np.float64)
    return xx, yy


def _blob(xx, yy, cx, cy, sx, sy):
    return np.exp(-(((xx - cx) / sx) ** 2 + ((yy - cy) / sy) ** 2) / 2.0)


@dataclass(frozen=True)
class FaceStyle:
    """Per-identity colors and lighting for the renderer."""

    skin: tuple[float, float, float]
    lip: tuple[float, float, float]
    iris: float
    light: tuple[float, float, float]

    @classmethod
    def sample(cls, rng: np.random.Generator) -> "FaceStyle":
        skin = np.array([0.80, 0.62, 0.52]) + rng.uniform(-0.10, 0.10, 3)
        lip = np.array([0.62, 0.28, 0.30]) + rng.uniform(-0.08, 0.08, 3)
        az = rng.uniform(-1.2, 1.2)
        el = rng.uniform(0.5, 1.1)
        light = np.array([np.sin(az) * np.cos(el), -np.abs(np.sin(el)) * 0.6, np.cos(az) * np.cos(el) + 0.8])
        light = light / np.linalg.norm(light)
        return cls(skin=tuple(np.clip(skin, 0.3, 0.95)),
                   lip=tuple(np.clip(lip, 0.1, 0.9)),
                   iris=float(rng.uniform(0.1, 0.45)),
                   light=tuple(light))


def render_face(lm: np.ndarray, shape: tuple[int, int],
                style: FaceStyle) -> np.ndarray:
    """Shaded smooth face image from landmark positions.

    All features are placed relative to the landmarks, so the rendered face
    follows whatever pose or identity deformation the landmarks carry.
    """
    xx, yy = _grid(shape)
    jaw = lm[0:17]
    fcx, fcy = np.mean(jaw[:, 0]), np.mean(jaw[:, 1]) - 0.25 * (jaw[:, 1].max() - jaw[:, 1].min())
    fsx = max((jaw[:, 0].max() - jaw[:, 0].min()) * 0.42, 4.0)
    fsy = max((jaw[:, 1].max() - lm[17:27, 1].min()) * 0.52, 4.0)

    height = 1.1 * _blob(xx, yy, fcx, fcy, fsx, fsy)
    # nose ridge along the bridge, eye sockets, lip bump
    for p in lm[27:31]:
        height += 0.22 * _blob(xx, yy, p[0], p[1], fsx * 0.10, fsx * 0.16)
    eye_l, eye_r = lm[36:42].mean(axis=0), lm[42:48].mean(axis=0)
    eye_w = max(np.linalg.norm(lm[39] - lm[36]), 2.0)
    height -= 0.18 * _blob(xx, yy, eye_l[0], eye_l[1], eye_w * 0.7, eye_w * 0.5)
    height -= 0.18 * _blob(xx, yy, eye_r[0], eye_r[1], eye_w * 0.7, eye_w * 0.5)
    mouth = lm[48:68].mean(axis=0)
    mouth_w = max(np.linalg.norm(lm[54] - lm[48]), 2.0)
    height += 0.12 * _blob(xx, yy, mouth[0], mouth[1], mouth_w * 0.6, mouth_w * 0.35)

    scale = max(fsx, 1.0)
    gy, gx = np.gradient(height * scale * 0.9)
    nz = 1.0 / np.sqrt(gx * gx + gy * gy + 1.0)
    lx, ly, lz = style.light
    shade = np.clip(-gx * nz * lx - gy * nz * ly + nz * lz, 0.0, None)
    shade = 0.25 + 0.75 * shade / max(shade.max(), 1e-9)

    img = np.asarray(style.skin)[None, None, :] * shade[..., None]

    def tint(mask2d, color, amount):
        nonlocal img
        img = img * (1 - amount * mask2d[..., None]) + \
            np.asarray(color)[None, None, :] * (amount * mask2d[..., None])

    for c, pts in ((eye_l, lm[36:42]), (eye_r, lm[42:48])):
        sclera = _blob(xx, yy, c[0], c[1], eye_w * 0.55, eye_w * 0.30)
        tint(sclera, (0.92, 0.92, 0.90), 0.85)
        iris = _blob(xx, yy, c[0], c[1], eye_w * 0.16, eye_w * 0.16)
        tint(iris, (style.iris, style.iris * 0.8, style.iris * 0.6), 0.95)
    for brow in (lm[17:22], lm[22:27]):
        bc = brow.mean(axis=0)
        blen = max(np.linalg.norm(brow[-1] - brow[0]), 2.0)
        tint(_blob(xx, yy, bc[0], bc[1], blen * 0.45, blen * 0.10),
             (0.25, 0.17, 0.12), 0.7)
    tint(_blob(xx, yy, mouth[0], mouth[1], mouth_w * 0.52, mouth_w * 0.30),
         style.lip, 0.8)
    for p in (lm[31], lm[35]):
        tint(_blob(xx, yy, p[0], p[1], eye_w * 0.10, eye_w * 0.08), (0.15, 0.10, 0.10), 0.6)
    return clamp01(img)


def face_hull(lm: np.ndarray) -> np.ndarray:
    """Closed polygon around the face: jaw line plus raised brow line."""
    brows = lm[17:27].copy()
    brows[:, 1] -= 6.0  # keep the forehead inside the polygon
    return np.vstack([lm[0:17], brows[::-1]])


def face_mask(lm: np.ndarray, shape: tuple[int, int], erode: int = 2) -> np.ndarray:
    """Bool mask of the face interior, eroded to stay clear of the outline."""
    poly = np.rint(face_hull(lm)).astype(np.int32)
    m = np.zeros(shape, dtype=np.uint8)
    cv2.fillPoly(m, [poly], 255)
    if erode > 0:
        kernel = np.ones((3, 3), dtype=np.uint8)
        m = cv2.erode(m, kernel, iterations=erode)
    m = m > 0
    m[0, :] = m[-1, :] = False
    m[:, 0] = m[:, -1] = False
    return m


def make_aligned_face(rng: np.random.Generator, resolution: int,
                      jitter: float = 1.0):
    """One already-aligned face crop: (image, LandmarkSet) at `resolution`."""
    pts = jitter_landmarks(rng, template_landmarks_128(), strength=jitter)
    pts *= resolution / TEMPLATE_RESOLUTION
    pts = np.clip(pts, 1.0, resolution - 2.0)
    style = FaceStyle.sample(rng)
    img = render_face(pts, (resolution, resolution), style)
    return img, LandmarkSet(points=pts)


def make_face_corpus(seed: int, n: int, resolution: int, jitter: float = 1.0):
    """n aligned faces with landmarks, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    return [make_aligned_face(rng, resolution, jitter=jitter) for _ in range(n)]


@dataclass(frozen=True)
class SceneFixture:
    """A face posed into a larger canvas: what a detector would hand us."""

    image: np.ndarray
    landmarks: LandmarkSet
    mask: np.ndarray


def _background(rng: np.random.Generator, shape) -> np.ndarray:
    coarse = rng.uniform(0.15, 0.75, size=(shape[0] // 8 + 2, shape[1] // 8 + 2, 3))
    bg = np.kron(coarse, np.ones((8, 8, 1)))[: shape[0], : shape[1]]
    return clamp01(gaussian_filter(bg, sigma=(6, 6, 0)))


def make_scene(rng: np.random.Generator, shape: tuple[int, int],
               face_scale: tuple[float, float] = (0.55, 0.8),
               max_rotation: float = 0.3, blur: float = 1.5) -> SceneFixture:
    """Random pose of a jittered face inside a textured canvas.

    The composite is blurred by `blur` pixels so the fixture is smooth at
    the pixel scale; sub-pixel detail cannot survive warp resampling, and
    fixtures are meant to exercise the pipeline, not the renderer.
    """
    h, w = shape
    pts128 = jitter_landmarks(rng, template_landmarks_128())
    margin = 6.0
    for attempt in range(60):
        s = rng.uniform(*face_scale) * min(h, w) / TEMPLATE_RESOLUTION
        theta = rng.uniform(-max_rotation, max_rotation)
        c, si = s * np.cos(theta), s * np.sin(theta)
        matrix = np.array([[c, -si], [si, c]])
        center = matrix @ np.array([63.5, 66.0])
        offset = np.array([w / 2, h / 2]) - center + rng.uniform(-0.08, 0.08, 2) * min(h, w)
        t = AffineTransform(matrix=matrix, offset=offset)
        pts = t.apply(pts128)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if lo[0] > margin and lo[1] > margin and hi[0] < w - margin and hi[1] < h - margin:
            break
        face_scale = (face_scale[0] * 0.95, face_scale[1] * 0.95)
    else:
        raise RuntimeError(f"could not fit a face into a {h}x{w} scene")

    style = FaceStyle.sample(rng)
    # render supersampled and area-average down: small faces would otherwise
    # alias, and aliased texture cannot survive a warp round trip
    k = 4
    pts_hi = k * pts + (k - 1) / 2.0
    face = downsample(render_face(pts_hi, (h * k, w * k), style), k)
    bg = _background(rng, shape)
    hull_hi = face_mask(pts_hi, (h * k, w * k), erode=0).astype(np.float64)
    alpha = downsample(gaussian_filter(hull_hi, sigma=2.5 * k), k)[..., None]
    img = bg * (1 - alpha) + face * alpha
    if blur > 0:
        img = gaussian_filter(img, sigma=(blur, blur, 0.0))
    img = clamp01(img)
    mask = face_mask(pts, shape, erode=3)
    return SceneFixture(image=img, landmarks=LandmarkSet(points=pts), mask=mask)


# ---------------------------------------------------------------------------
# relighting corpus


def _height_map(rng: np.random.Generator, resolution: int) -> np.ndarray:
    xx, yy = _grid((resolution, resolution))
    h = np.zeros((resolution, resolution))
    for _ in range(rng.integers(4, 9)):
        cx, cy = rng.uniform(0.15, 0.85, 2) * resolution
        sx, sy = rng.uniform(0.08, 0.3, 2) * resolution
        h += rng.uniform(-1.0, 1.0) * _blob(xx, yy, cx, cy, sx, sy)
    h += rng.uniform(-0.3, 0.3) * (xx / resolution) + rng.uniform(-0.3, 0.3) * (yy / resolution)
    return h * resolution * 0.15


def _light_dirs(rng: np.random.Generator, n: int) -> np.ndarray:
    az = rng.uniform(0.0, 2 * np.pi, n)
    el = rng.uniform(0.45, 1.2, n)
    d = np.stack([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)], axis=1)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def lambert_render(height: np.ndarray, light: np.ndarray) -> np.ndarray:
    """Shade a height map from one light direction; grayscale in [0, 1]."""
    gy, gx = np.gradient(height)
    norm = np.sqrt(gx * gx + gy * gy + 1.0)
    dot = (-gx * light[0] - gy * light[1] + light[2]) / norm
    return clamp01((np.clip(dot, 0.0, None) + 0.15) / 1.15)


@dataclass(frozen=True)
class RelightDataset:
    """images[i, l] is identity i's surface under light l."""

    images: np.ndarray  # (I, L, H, W) float64
    lights: np.ndarray  # (L, 3)
    train_ids: tuple[int, ...]
    holdout_ids: tuple[int, ...]
    seed: int


def make_relight_dataset(seed: int, resolution: int = 64, n_identities: int = 32,
                         n_lights: int = 16, holdout: int = 6) -> RelightDataset:
    if n_identities < 4 or n_lights < 2:
        raise ValueError("need at least 4 identities and 2 lights")
    if not 0 < holdout < n_identities:
        raise ValueError("holdout must leave at least one training identity")
    rng = np.random.default_rng(seed)
    lights = _light_dirs(rng, n_lights)
    images = np.empty((n_identities, n_lights, resolution, resolution))
    for i in range(n_identities):
        height = _height_map(rng, resolution)
        for l in range(n_lights):
            images[i, l] = lambert_render(height, lights[l])
    ids = list(range(n_identities))
    return RelightDataset(images=images, lights=lights,
                          train_ids=tuple(ids[holdout:]),
                          holdout_ids=tuple(ids[:holdout]), seed=seed)


def lighting_pairs(ds: RelightDataset, identities, n_pairs: int,
                   seed: int) -> list[LightingPair]:
    """Balanced same-light / different-light pairs over the given identities.

    Same-light pairs use two different identities under one light, so the only
    shared factor is the illumination; different-light pairs differ in light
    and may or may not differ in identity.
    """
    identities = list(identities)
    if len(identities) < 2:
        raise ValueError("need at least two identities to build pairs")
    rng = np.random.default_rng(seed)
    n_lights = ds.images.shape[1]
    pairs = []
    for p in range(n_pairs):
        if p % 2 == 0:
            l = int(rng.integers(n_lights))
            i, j = rng.choice(identities, size=2, replace=False)
            pairs.append(LightingPair(ds.images[i, l], ds.images[j, l], True))
        else:
            l1, l2 = rng.choice(n_lights, size=2, replace=False)
            i, j = rng.choice(identities, size=2, replace=True)
            pairs.append(LightingPair(ds.images[i, l1], ds.images[j, l2], False))
    return pairs
