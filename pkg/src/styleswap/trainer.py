"""Two-stage training harness.

Stage 1 trains the full net at the base resolution; stage 2 grows one branch
and trains only it. Each iteration samples a content batch, selects the
landmark-nearest style subset per content image, evaluates the weighted loss,
and takes an Adam step with a linearly decaying learning rate. The style
weight ramps linearly from 0 to its target over a warmup fraction.

Style features are extracted once per stage and cached as patch lists; the
cache is keyed on the extractor fingerprint so a changed extractor forces
recomputation. All randomness flows from the config seed.
"""

from __future__ import annotations

import csv
import glob
import json
import os
from dataclasses import dataclass, field

import jsonschema
import numpy as np
import torch

from .features import ExtractorSpec, FeatureExtractor, load_extractor
from .geometry import (LandmarkSet, ReferenceFace, align_to_reference,
                       default_reference)
from .image import load_image, validate_image
from .lightnet import LightNet
from .losses import (content_loss_multi, extract_patches, light_loss,
                     luminance_tensor, select_style_subset, style_loss_multi,
                     tv_loss)
from .transformnet import TransformNet

CURVE_COLUMNS = ("iteration", "content", "style", "light", "tv", "total", "alpha", "lr")

_SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "configs",
                            "train_config.schema.json")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; training aborted."""


def load_schema() -> dict:
    with open(_SCHEMA_PATH) as f:
        return json.load(f)


@dataclass(frozen=True)
class TrainConfig:
    resolution: int
    iterations: int
    batch_size: int
    seed: int = 0
    lr_start: float = 1e-3
    lr_end: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    alpha: float = 20.0
    alpha_warmup_frac: float = 0.3
    beta: float | str = "auto"
    gamma: float = 0.3
    n_best: int = 16
    patch_size: int = 1
    use_flips: bool = True
    content_layers: tuple[str, ...] = ("relu4_2",)
    style_layers: tuple[str, ...] = ("relu3_1", "relu4_1")
    net_widths: tuple[int, ...] | None = None
    net_seed: int = 0
    checkpoint_every: int = 0
    deterministic: bool = True
    extractor: dict | None = None
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch_size must be >= 1")
        if not (self.lr_start >= self.lr_end > 0):
            raise ValueError("need lr_start >= lr_end > 0")
        if self.n_best < 1 or self.patch_size < 1:
            raise ValueError("n_best and patch_size must be >= 1")
        if not 0.0 <= self.alpha_warmup_frac <= 1.0:
            raise ValueError("alpha_warmup_frac must be in [0, 1]")
        if self.alpha < 0 or self.gamma < 0:
            raise ValueError("alpha and gamma must be >= 0")
        if self.beta != "auto" and (not np.isfinite(self.beta) or self.beta < 0):
            raise ValueError("beta must be 'auto' or a finite number >= 0")
        if not self.content_layers or not self.style_layers:
            raise ValueError("need at least one content layer and one style layer")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        try:
            jsonschema.validate(d, load_schema())
        except jsonschema.ValidationError as exc:
            raise ValueError(f"invalid training config: {exc.message}") from None
        opt = d.get("optimizer", {})
        loss = d.get("loss", {})
        style = d.get("style", {})
        layers = d.get("layers", {})
        net = d.get("net", {}) or {}
        widths = net.get("widths")
        return cls(
            resolution=d["resolution"],
            iterations=d["iterations"],
            batch_size=d["batch_size"],
            seed=d.get("seed", 0),
            lr_start=opt.get("lr_start", 1e-3),
            lr_end=opt.get("lr_end", 1e-4),
            adam_beta1=opt.get("beta1", 0.9),
            adam_beta2=opt.get("beta2", 0.999),
            alpha=loss.get("alpha", 20.0),
            alpha_warmup_frac=loss.get("alpha_warmup_frac", 0.3),
            beta=loss.get("beta", "auto"),
            gamma=loss.get("gamma", 0.3),
            n_best=style.get("n_best", 16),
            patch_size=style.get("patch_size", 1),
            use_flips=style.get("use_flips", True),
            content_layers=tuple(layers.get("content", ("relu4_2",))),
            style_layers=tuple(layers.get("style", ("relu3_1", "relu4_1"))),
            net_widths=tuple(widths) if widths else None,
            net_seed=net.get("seed", 0),
            checkpoint_every=d.get("checkpoint_every", 0),
            deterministic=d.get("deterministic", True),
            extractor=d.get("extractor"),
            paths=dict(d.get("paths", {})),
        )

    @classmethod
    def from_json(cls, path: str) -> "TrainConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def style_weight_schedule(iteration: int, config: TrainConfig) -> float:
    """Linear ramp 0 -> alpha over the warmup fraction, constant after."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    warmup = round(config.alpha_warmup_frac * config.iterations)
    if warmup <= 0 or iteration >= warmup:
        return float(config.alpha)
    return float(config.alpha) * iteration / warmup


def _lr_at(iteration: int, config: TrainConfig) -> float:
    if config.iterations == 1:
        return config.lr_start
    frac = iteration / (config.iterations - 1)
    return config.lr_start + (config.lr_end - config.lr_start) * frac


# ---------------------------------------------------------------------------
# data containers


def _check_face_list(images, landmarks, resolution: int) -> None:
    if len(images) != len(landmarks):
        raise ValueError("image and landmark counts differ")
    for img in images:
        validate_image(img)
        if img.shape[0] != resolution or img.shape[1] != resolution:
            raise ValueError(
                f"face image is {img.shape[0]}x{img.shape[1]}, expected {resolution}x{resolution}")


@dataclass
class ContentSet:
    """Aligned content faces with their reference-frame landmarks."""

    images: list
    landmarks: list
    names: list
    resolution: int

    def __post_init__(self):
        _check_face_list(self.images, self.landmarks, self.resolution)

    def __len__(self) -> int:
        return len(self.images)


@dataclass
class StyleSet:
    """Aligned style faces plus (optionally) cached feature patches.

    The cache key ties the patches to one extractor fingerprint, patch size,
    and layer tuple; precompute_style_features refuses to serve stale caches.
    """

    images: list
    landmarks: list
    names: list
    reference: ReferenceFace
    patches: dict | None = None
    cache_key: tuple | None = None

    def __post_init__(self):
        _check_face_list(self.images, self.landmarks, self.reference.resolution)

    def __len__(self) -> int:
        return len(self.images)

    def with_flips(self) -> "StyleSet":
        """Append the horizontal mirror of every face (and its landmarks)."""
        width = self.reference.resolution
        images = list(self.images) + [np.ascontiguousarray(img[:, ::-1]) for img in self.images]
        lms = list(self.landmarks) + [lm.flipped(width) for lm in self.landmarks]
        names = list(self.names) + [f"{n}#flip" for n in self.names]
        return StyleSet(images=images, landmarks=lms, names=names, reference=self.reference)


def _load_face_dir(dirpath: str, reference: ReferenceFace):
    pngs = sorted(glob.glob(os.path.join(dirpath, "*.png")))
    if not pngs:
        raise ValueError(f"no .png images found in {dirpath}")
    images, lms, names = [], [], []
    for p in pngs:
        sidecar = os.path.splitext(p)[0] + ".json"
        if not os.path.exists(sidecar):
            raise ValueError(f"missing landmark file for {p}")
        img = load_image(p)
        lm = LandmarkSet.from_json(sidecar)
        aligned, lm_aligned, _ = align_to_reference(img, lm, reference)
        images.append(aligned)
        lms.append(lm_aligned)
        names.append(os.path.splitext(os.path.basename(p))[0])
    return images, lms, names


def load_content_dir(dirpath: str, reference: ReferenceFace) -> ContentSet:
    images, lms, names = _load_face_dir(dirpath, reference)
    return ContentSet(images=images, landmarks=lms, names=names,
                      resolution=reference.resolution)


def load_style_dir(dirpath: str, reference: ReferenceFace,
                   use_flips: bool = True) -> StyleSet:
    images, lms, names = _load_face_dir(dirpath, reference)
    styles = StyleSet(images=images, landmarks=lms, names=names, reference=reference)
    return styles.with_flips() if use_flips else styles


@dataclass
class TrainData:
    content: ContentSet
    styles: StyleSet
    extractor: FeatureExtractor
    lightnet: LightNet


def extractor_from_config(spec: dict) -> FeatureExtractor:
    kind = spec.get("kind")
    if kind == "vgg19":
        return load_extractor(ExtractorSpec.vgg19(spec["path"]))
    if kind == "random":
        return load_extractor(ExtractorSpec(
            stage_widths=tuple(spec["stage_widths"]),
            convs_per_stage=tuple(spec["convs_per_stage"]),
            source="random", seed=spec.get("seed", 0)))
    raise ValueError(f"unknown extractor kind {kind!r}")


def load_train_data(config: TrainConfig) -> TrainData:
    paths = config.paths
    for key in ("content_dir", "style_dir", "lightnet"):
        if key not in paths:
            raise ValueError(f"config paths must include {key!r}")
    if config.extractor is None:
        raise ValueError("config must include an extractor spec")
    if "reference" in paths:
        reference = ReferenceFace.from_json(paths["reference"]).scaled(config.resolution)
    else:
        reference = default_reference(config.resolution)
    content = load_content_dir(paths["content_dir"], reference)
    styles = load_style_dir(paths["style_dir"], reference, use_flips=config.use_flips)
    extractor = extractor_from_config(config.extractor)
    lightnet = LightNet.load(paths["lightnet"])
    return TrainData(content=content, styles=styles, extractor=extractor,
                     lightnet=lightnet)


# ---------------------------------------------------------------------------
# feature caching


def precompute_style_features(styles: StyleSet, extractor: FeatureExtractor,
                              layers, k: int) -> StyleSet:
    """Fill the per-layer patch cache; a hit with the same key is a no-op."""
    key = (extractor.fingerprint, int(k), tuple(layers))
    if styles.cache_key == key and styles.patches is not None:
        return styles
    patches: dict = {layer: [] for layer in layers}
    with torch.no_grad():
        for img in styles.images:
            feats = extractor.extract(img, list(layers))
            for layer in layers:
                patches[layer].append(extract_patches(feats[layer], k))
    styles.patches = patches
    styles.cache_key = key
    return styles


# ---------------------------------------------------------------------------
# training loop


def _to_chw(img: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))


def _calibrate_beta(config: TrainConfig, net: TransformNet, content_t, f_con,
                    lum_con, extractor, lightnet) -> float:
    """Pick beta so the weighted lighting term starts at the content scale."""
    take = min(config.batch_size, len(content_t))
    c_vals, l_vals = [], []
    with torch.no_grad():
        for i in range(take):
            gen = net(content_t[i])
            f_gen = extractor.extract(gen, list(config.content_layers))
            c_vals.append(float(content_loss_multi(f_gen, f_con[i], config.content_layers)))
            l_vals.append(float(light_loss(luminance_tensor(gen), lum_con[i], lightnet)))
    c_m, l_m = float(np.mean(c_vals)), float(np.mean(l_vals))
    if l_m < 1e-30:
        return 1.0
    return c_m / l_m


def train_stage(config: TrainConfig, net: TransformNet,
                data: TrainData | None = None):
    """Run one training stage.

    Returns (net, curves, info): curves is one dict per iteration with the
    CURVE_COLUMNS fields; info records the resolved beta and checkpoint paths.
    When data is None it is loaded from the config paths.
    """
    if data is None:
        data = load_train_data(config)
    content, styles = data.content, data.styles
    extractor, lightnet = data.extractor, data.lightnet
    if len(content) == 0:
        raise ValueError("empty content corpus")
    if len(styles) == 0:
        raise ValueError("empty style set")
    if net.resolution != config.resolution:
        raise ValueError(f"net resolution {net.resolution} != config resolution {config.resolution}")
    if styles.reference.resolution != config.resolution:
        raise ValueError("style set not aligned at the config resolution")
    if content.resolution != config.resolution:
        raise ValueError("content corpus not at the config resolution")
    if lightnet.resolution != config.resolution:
        raise ValueError(f"lighting net resolution {lightnet.resolution} != {config.resolution}")

    if config.deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    for p in lightnet.parameters():
        p.requires_grad_(False)

    precompute_style_features(styles, extractor, config.style_layers, config.patch_size)
    need_layers = sorted(set(config.content_layers) | set(config.style_layers))
    content_t = [_to_chw(img) for img in content.images]
    f_con, lum_con = [], []
    with torch.no_grad():
        for x in content_t:
            f_con.append(extractor.extract(x, list(config.content_layers)))
            lum_con.append(luminance_tensor(x))
    # the per-image style subset is a pure function of static landmarks
    n_best = min(config.n_best, len(styles))
    subsets = [select_style_subset(content.landmarks[i], styles.landmarks, n_best)
               for i in range(len(content))]

    if config.beta == "auto":
        beta = _calibrate_beta(config, net, content_t, f_con, lum_con, extractor, lightnet)
    else:
        beta = float(config.beta)
    gamma = float(config.gamma)

    out_dir = config.paths.get("out_dir")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    params = net.trainable_parameters()
    if not params:
        raise ValueError("net has no trainable parameters")
    opt = torch.optim.Adam(params, lr=config.lr_start,
                           betas=(config.adam_beta1, config.adam_beta2))

    rows = []
    checkpoints = []
    for t in range(config.iterations):
        alpha = style_weight_schedule(t, config)
        lr = _lr_at(t, config)
        for group in opt.param_groups:
            group["lr"] = lr
        idx = rng.integers(0, len(content), config.batch_size)
        gen = net(torch.stack([content_t[i] for i in idx]))
        c_sum = s_sum = l_sum = tv_sum = None
        for b, i in enumerate(idx):
            g = gen[b]
            f_gen = extractor.extract(g, need_layers)
            c = content_loss_multi(f_gen, f_con[i], config.content_layers)
            gen_patches = {ly: extract_patches(f_gen[ly], config.patch_size)
                           for ly in config.style_layers}
            pool = {ly: [styles.patches[ly][j] for j in subsets[i]]
                    for ly in config.style_layers}
            s = style_loss_multi(gen_patches, pool, config.style_layers)
            l = light_loss(luminance_tensor(g), lum_con[i], lightnet)
            v = tv_loss(g)
            c_sum = c if c_sum is None else c_sum + c
            s_sum = s if s_sum is None else s_sum + s
            l_sum = l if l_sum is None else l_sum + l
            tv_sum = v if tv_sum is None else tv_sum + v
        nb = float(config.batch_size)
        c_m, s_m, l_m, tv_m = c_sum / nb, s_sum / nb, l_sum / nb, tv_sum / nb
        total = c_m + alpha * s_m + beta * l_m + gamma * tv_m
        if not torch.isfinite(total):
            raise TrainingDiverged(
                f"non-finite loss at iteration {t}: "
                f"content={float(c_m.detach())} style={float(s_m.detach())} "
                f"light={float(l_m.detach())} tv={float(tv_m.detach())}")
        opt.zero_grad()
        total.backward()
        opt.step()
        rows.append({"iteration": t, "content": float(c_m.detach()),
                     "style": float(s_m.detach()), "light": float(l_m.detach()),
                     "tv": float(tv_m.detach()), "total": float(total.detach()),
                     "alpha": alpha, "lr": lr})
        if out_dir and config.checkpoint_every and (t + 1) % config.checkpoint_every == 0:
            path = os.path.join(out_dir, f"checkpoint_{t + 1:06d}.sstb")
            net.save(path)
            checkpoints.append(path)

    info = {"beta": beta, "checkpoints": checkpoints}
    if out_dir:
        final = os.path.join(out_dir, "final.sstb")
        net.save(final)
        write_curves(os.path.join(out_dir, "curves.csv"), rows)
        with open(os.path.join(out_dir, "run_meta.json"), "w") as f:
            json.dump({"beta": beta, "iterations": config.iterations,
                       "alpha": config.alpha, "gamma": gamma,
                       "seed": config.seed, "final_checkpoint": final}, f, indent=2)
        info["final_checkpoint"] = final
    return net, rows, info


def write_curves(path: str, rows) -> None:
    """Loss curves as CSV, one row per iteration, full float precision."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CURVE_COLUMNS)
        for row in rows:
            writer.writerow([row["iteration"]] +
                            [f"{row[k]:.17g}" for k in CURVE_COLUMNS[1:]])


def read_curves(path: str) -> list:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames) != CURVE_COLUMNS:
            raise ValueError(f"unexpected curve columns in {path}: {reader.fieldnames}")
        rows = []
        for rec in reader:
            row = {k: float(rec[k]) for k in CURVE_COLUMNS[1:]}
            row["iteration"] = int(rec["iteration"])
            rows.append(row)
    return rows
