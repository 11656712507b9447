"""Loss terms for training the identity-transform network.

All differentiable paths run in float64 torch. Convention for array layouts:
numpy inputs are (H, W, 3) or (H, W); torch inputs are (3, H, W) or (H, W).

The style term matches k x k feature patches of the generated image against
their nearest neighbours (cosine distance) over a pool of patches from the
selected style images. Patch layout: each patch is the C x k x k block
flattened in C order; patch index runs row-major over valid top-left corners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .features import FeatureExtractor, FeatureMap
from .geometry import landmark_distance
from .image import REC601_WEIGHTS

# Added to each norm in the cosine distance so zero patches stay defined.
EPS_NORM = 1e-8


def luminance_tensor(x: torch.Tensor) -> torch.Tensor:
    """Rec. 601 luminance of a (3, H, W) tensor, differentiable."""
    if x.ndim != 3 or x.shape[0] != 3:
        raise ValueError(f"expected (3, H, W), got {tuple(x.shape)}")
    w = torch.tensor(REC601_WEIGHTS, dtype=x.dtype)
    return (x * w.view(3, 1, 1)).sum(dim=0)


def _as_chw(img) -> torch.Tensor:
    """numpy (H, W, 3/none) or torch (3/none, H, W) -> float64 torch."""
    if isinstance(img, torch.Tensor):
        return img.to(torch.float64)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))
    if arr.ndim == 2:
        return torch.from_numpy(np.ascontiguousarray(arr))
    raise ValueError(f"expected an image of 2 or 3 dims, got shape {arr.shape}")


# ---------------------------------------------------------------------------
# content


def content_loss(f_gen: FeatureMap, f_content: FeatureMap) -> torch.Tensor:
    """Mean squared difference over all entries of one layer's activations."""
    if f_gen.shape != f_content.shape:
        raise ValueError(f"feature shape mismatch: {f_gen.shape} vs {f_content.shape}")
    diff = f_gen.data - f_content.data
    return (diff * diff).sum() / diff.numel()


def content_loss_multi(gen, content, layers) -> torch.Tensor:
    """Sum of content_loss over the named layers."""
    if not layers:
        raise ValueError("need at least one content layer")
    total = None
    for name in layers:
        if name not in gen or name not in content:
            raise ValueError(f"layer {name!r} missing from feature dict")
        term = content_loss(gen[name], content[name])
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------
# style


@dataclass
class PatchList:
    """All k x k patches of one feature map, flattened to (M, C*k*k)."""

    data: torch.Tensor
    k: int
    layer_name: str
    grid_h: int
    grid_w: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("patch size must be >= 1")
        if self.data.ndim != 2:
            raise ValueError(f"patch data must be 2-D, got shape {tuple(self.data.shape)}")
        if self.data.shape[0] != self.grid_h * self.grid_w:
            raise ValueError(
                f"patch count {self.data.shape[0]} != grid {self.grid_h}x{self.grid_w}")

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PatchMatch:
    """Per-location nearest style patch: indices[m] in [0, n_styles)."""

    indices: np.ndarray
    n_styles: int

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("match indices must be a nonempty 1-D array")
        if idx.min() < 0 or idx.max() >= self.n_styles:
            raise ValueError("match index out of range")


def extract_patches(f: FeatureMap, k: int) -> PatchList:
    """All k x k patches of f, C-order flattened, row-major over locations."""
    c, h, w = f.shape
    if k < 1 or k > min(h, w):
        raise ValueError(f"patch size {k} invalid for a {h}x{w} feature map")
    # unfold yields (1, C*k*k, M) with exactly the layout documented above
    cols = F.unfold(f.data.unsqueeze(0), kernel_size=k)
    data = cols.squeeze(0).transpose(0, 1)
    return PatchList(data=data, k=k, layer_name=f.layer_name,
                     grid_h=h - k + 1, grid_w=w - k + 1)


def cosine_distance(u, v):
    """1 - cos angle between u and v, with EPS_NORM added to each norm.

    Accepts 1-D torch tensors (differentiable, returns a tensor) or numpy
    arrays (returns a float). Defined everywhere: d(0, 0) is ~1.
    """
    if isinstance(u, torch.Tensor) or isinstance(v, torch.Tensor):
        u = torch.as_tensor(u, dtype=torch.float64)
        v = torch.as_tensor(v, dtype=torch.float64)
        if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
            raise ValueError("cosine_distance wants two 1-D vectors of equal length")
        nu = torch.linalg.vector_norm(u) + EPS_NORM
        nv = torch.linalg.vector_norm(v) + EPS_NORM
        return 1.0 - (u @ v) / (nu * nv)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ValueError("cosine_distance wants two 1-D vectors of equal length")
    nu = np.linalg.norm(u) + EPS_NORM
    nv = np.linalg.norm(v) + EPS_NORM
    return float(1.0 - (u @ v) / (nu * nv))


def _check_patch_pool(gen: PatchList, styles) -> None:
    if len(styles) == 0:
        raise ValueError("empty style patch list")
    for p in styles:
        if p.count != gen.count or p.length != gen.length:
            raise ValueError(
                f"style patches ({p.count}, {p.length}) incompatible with "
                f"generated patches ({gen.count}, {gen.length})")


def _all_distances(gen: PatchList, styles) -> torch.Tensor:
    """(M, N*M) cosine distances from each generated patch to the full pool.

    Every patch of every style image is a candidate for every generated
    location. Kept dense; feature maps sit on pooled layers so M stays small.
    """
    g = gen.data  # (M, D)
    pool = torch.cat([p.data for p in styles], dim=0)  # (N*M, D)
    gn = torch.linalg.vector_norm(g, dim=1) + EPS_NORM
    pn = torch.linalg.vector_norm(pool, dim=1) + EPS_NORM
    sims = (g @ pool.T) / (gn[:, None] * pn[None, :])
    return 1.0 - sims  # (M, N*M)


def nn_select(patches_gen: PatchList, patches_styles) -> PatchMatch:
    """For each generated patch location, index of the nearest pooled patch.

    Ties break toward the lowest index. The index runs over the concatenated
    pool: style j's patch at location m has index j * M + m.
    """
    _check_patch_pool(patches_gen, patches_styles)
    with torch.no_grad():
        d = _all_distances(patches_gen, patches_styles).numpy()
    idx = np.argmin(d, axis=1).astype(np.int64)
    return PatchMatch(indices=idx, n_styles=d.shape[1])


def style_loss(patches_gen: PatchList, patches_styles) -> torch.Tensor:
    """Mean over locations of the distance to the nearest pooled style patch.

    Matching (the argmin) is done without gradient; the distance at the
    matched index is recomputed differentiably, which is exactly the value
    min would give and keeps autograd off the argmin.
    """
    _check_patch_pool(patches_gen, patches_styles)
    d = _all_distances(patches_gen, patches_styles)
    with torch.no_grad():
        idx = torch.argmin(d, dim=1)
    m = torch.arange(d.shape[0])
    return d[m, idx].mean()


def style_loss_multi(patches_gen, patches_styles, layers) -> torch.Tensor:
    """Sum of style_loss over the named layers.

    patches_gen: layer name -> PatchList of the generated image.
    patches_styles: layer name -> sequence of PatchList, one per style image.
    """
    if not layers:
        raise ValueError("need at least one style layer")
    total = None
    for name in layers:
        if name not in patches_gen or name not in patches_styles:
            raise ValueError(f"layer {name!r} missing from patch dict")
        term = style_loss(patches_gen[name], patches_styles[name])
        total = term if total is None else total + term
    return total


def select_style_subset(x_landmarks, style_landmarks, n_best: int):
    """Indices of the n_best styles nearest to x in landmark space.

    Both x and the styles must already live in the reference-aligned frame.
    Returned order is by increasing distance; ties keep the lower index.
    """
    n = len(style_landmarks)
    if n == 0:
        raise ValueError("empty style landmark list")
    if not 1 <= n_best <= n:
        raise ValueError(f"n_best={n_best} out of range for {n} styles")
    d = np.array([landmark_distance(x_landmarks, s) for s in style_landmarks])
    order = np.argsort(d, kind="stable")
    return [int(i) for i in order[:n_best]]


# ---------------------------------------------------------------------------
# lighting and smoothness


def light_loss(gen_lum, content_lum, lightnet) -> torch.Tensor:
    """Mean squared difference of lighting embeddings of two luminance maps."""
    a = _as_chw(gen_lum)
    b = _as_chw(content_lum)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("light_loss wants (H, W) luminance maps")
    if a.shape != b.shape:
        raise ValueError(f"luminance shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    e_a = lightnet.embed_tensor(a)
    e_b = lightnet.embed_tensor(b).detach()
    diff = e_a - e_b
    return (diff * diff).sum() / diff.numel()


def tv_loss(img) -> torch.Tensor:
    """Sum of squared forward differences along both axes, over channels."""
    x = _as_chw(img)
    if x.ndim == 2:
        x = x.unsqueeze(0)
    if x.shape[1] < 2 or x.shape[2] < 2:
        raise ValueError(f"image too small for tv_loss: {tuple(x.shape)}")
    dh = x[:, 1:, :] - x[:, :-1, :]
    dw = x[:, :, 1:] - x[:, :, :-1]
    return (dh * dh).sum() + (dw * dw).sum()


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class LossWeights:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar loss terms of one image (or batch mean), plus the weighted total.

    Invariant: total == content + alpha*style + beta*light + gamma*tv for the
    weights the breakdown was built with, to 1e-10 relative.
    """

    content: float
    style: float
    light: float
    tv: float
    total: float
    weights: LossWeights

    def __post_init__(self):
        parts = (self.content, self.style, self.light, self.tv, self.total)
        if not all(np.isfinite(p) for p in parts):
            raise ValueError("non-finite loss term")
        if min(self.content, self.style, self.light, self.tv) < 0:
            raise ValueError("loss terms must be >= 0")
        w = self.weights
        expect = self.content + w.alpha * self.style + w.beta * self.light + w.gamma * self.tv
        if abs(expect - self.total) > 1e-10 * max(1.0, abs(expect)):
            raise ValueError(f"total {self.total} inconsistent with terms (expected {expect})")

    @classmethod
    def from_terms(cls, content, style, light, tv, weights: LossWeights) -> "LossBreakdown":
        c, s, l, t = (float(v) for v in (content, style, light, tv))
        total = c + weights.alpha * s + weights.beta * l + weights.gamma * t
        return cls(content=c, style=s, light=l, tv=t, total=total, weights=weights)


def total_loss_terms(gen, content, style_patches, weights: LossWeights,
                     extractor: FeatureExtractor, lightnet,
                     content_layers, style_layers, k: int):
    """The four differentiable loss terms and the weighted total, as tensors.

    gen: generated image, numpy (H, W, 3) or torch (3, H, W) carrying grad.
    content: the content image (no gradient is propagated into it).
    style_patches: layer name -> sequence of PatchList from the chosen styles.
    Returns a dict with keys content/style/light/tv/total.
    """
    x_gen = _as_chw(gen)
    x_con = _as_chw(content).detach()
    need = sorted(set(content_layers) | set(style_layers))
    f_gen = extractor.extract(x_gen, need)
    with torch.no_grad():
        f_con = extractor.extract(x_con, list(content_layers))
    c = content_loss_multi(f_gen, f_con, content_layers)
    gen_patches = {name: extract_patches(f_gen[name], k) for name in style_layers}
    s = style_loss_multi(gen_patches, style_patches, style_layers)
    l = light_loss(luminance_tensor(x_gen), luminance_tensor(x_con), lightnet)
    t = tv_loss(x_gen)
    total = c + weights.alpha * s + weights.beta * l + weights.gamma * t
    return {"content": c, "style": s, "light": l, "tv": t, "total": total}


def total_loss(gen, content, style_patches, weights: LossWeights,
               extractor: FeatureExtractor, lightnet,
               content_layers=("relu4_2",), style_layers=("relu3_1", "relu4_1"),
               k: int = 1) -> LossBreakdown:
    """Evaluate every term on one image and fold them into a LossBreakdown."""
    terms = total_loss_terms(gen, content, style_patches, weights, extractor,
                             lightnet, content_layers, style_layers, k)
    return LossBreakdown.from_terms(terms["content"], terms["style"],
                                    terms["light"], terms["tv"], weights)
