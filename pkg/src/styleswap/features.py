"""Convolutional feature extractor behind the content and style losses.

The extractor is a VGG-style stack of 3x3 convolution + ReLU stages separated
by 2x average pooling; activations are exposed under conventional layer names
("relu3_1", "relu4_2", ...). Weights come either from a pretrained bundle file
or from a seeded random initialization with the same topology, so every loss
can be exercised without a large pretrained download. Loss code never cares
which source is in use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from . import tensorio

_LAYER_RE = re.compile(r"^relu(\d+)_(\d+)$")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    channels: int
    factor: int  # cumulative spatial downsampling, power of two


@dataclass(frozen=True)
class ExtractorSpec:
    """Topology plus weight source for a feature extractor.

    stage_widths[s] is the channel count of every conv in stage s;
    convs_per_stage[s] the number of conv+ReLU blocks. Stage s (1-based) runs
    at downsampling factor 2**(s-1); a 2x average pool sits between stages.
    """

    stage_widths: tuple[int, ...]
    convs_per_stage: tuple[int, ...]
    source: str = "random"  # "random" | "file"
    seed: int = 0
    path: str | None = None
    padding: str = "same"  # "valid" gives the padding-free variant used in tests

    def __post_init__(self):
        if len(self.stage_widths) != len(self.convs_per_stage):
            raise ValueError("stage_widths and convs_per_stage must have equal length")
        if any(w < 1 for w in self.stage_widths) or any(n < 1 for n in self.convs_per_stage):
            raise ValueError("stage widths and conv counts must be >= 1")
        if self.source not in ("random", "file"):
            raise ValueError(f"unknown weight source {self.source!r}")
        if self.source == "file" and not self.path:
            raise ValueError("file-sourced extractor needs a path")
        if self.padding not in ("same", "valid"):
            raise ValueError(f"padding must be 'same' or 'valid', got {self.padding!r}")

    @property
    def layers(self) -> dict[str, LayerSpec]:
        """Exposed layer names with their channel counts and factors."""
        out = {}
        for s, (width, n) in enumerate(zip(self.stage_widths, self.convs_per_stage), start=1):
            for i in range(1, n + 1):
                name = f"relu{s}_{i}"
                out[name] = LayerSpec(name, width, 2 ** (s - 1))
        return out

    @classmethod
    def test_small(cls, seed: int = 0, padding: str = "same") -> "ExtractorSpec":
        """Tiny seeded-random stack exposing relu1_1 ... relu4_2."""
        return cls(stage_widths=(4, 8, 16, 16), convs_per_stage=(2, 2, 2, 2),
                   source="random", seed=seed, padding=padding)

    @classmethod
    def vgg19(cls, path: str) -> "ExtractorSpec":
        """Topology of the 19-layer VGG prefix through relu4_2, file weights."""
        return cls(stage_widths=(64, 128, 256, 512), convs_per_stage=(2, 2, 4, 2),
                   source="file", path=path)


@dataclass(frozen=True)
class FeatureMap:
    """Activations of one layer: a (C, H, W) float64 tensor."""

    data: torch.Tensor
    layer_name: str

    def __post_init__(self):
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValueError(f"feature map must be (C, H, W) with dims >= 1, got {tuple(self.data.shape)}")
        if not torch.isfinite(self.data).all():
            raise ValueError(f"non-finite values in feature map {self.layer_name}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.data.shape)


class FeatureExtractor:
    """Immutable handle: weights fixed at load time, extract() is pure."""

    def __init__(self, spec: ExtractorSpec,
                 weights: dict[str, torch.Tensor] | None = None):
        self.spec = spec
        if weights is None:
            if spec.source == "file":
                weights = _load_weight_file(spec)
            else:
                weights = _random_weights(spec)
        self.weights = {k: v.detach().to(torch.float64) for k, v in weights.items()}
        for v in self.weights.values():
            v.requires_grad_(False)
        self.fingerprint = tensorio.fingerprint(
            {k: v.numpy() for k, v in self.weights.items()})

    def save_weights(self, path: str) -> None:
        """Write the weights as a float32 bundle loadable via source='file'."""
        tensors = {k: v.numpy() for k, v in self.weights.items()}
        meta = {"stage_widths": list(self.spec.stage_widths),
                "convs_per_stage": list(self.spec.convs_per_stage)}
        tensorio.save_bundle(path, tensors, meta=meta, dtype="<f4")

    def extract(self, img, layers) -> dict[str, FeatureMap]:
        """Run the stack and return the requested layers as FeatureMaps.

        `img` is either an (H, W, 3) numpy image or a (3, H, W) torch tensor
        (the latter keeps autograd intact for the training path).
        """
        known = self.spec.layers
        for name in layers:
            if name not in known:
                raise ValueError(f"unknown layer {name!r}; available: {sorted(known)}")
        if isinstance(img, torch.Tensor):
            x = img.to(torch.float64)
            if x.ndim != 3 or x.shape[0] != 3:
                raise ValueError(f"expected a (3, H, W) tensor, got {tuple(x.shape)}")
        else:
            img = np.asarray(img)
            if img.ndim != 3 or img.shape[2] != 3:
                raise ValueError(f"expected an (H, W, 3) image, got {img.shape}")
            x = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1))).to(torch.float64)
        max_factor = max(known[name].factor for name in layers)
        if x.shape[1] % max_factor or x.shape[2] % max_factor:
            raise ValueError(
                f"input {x.shape[1]}x{x.shape[2]} not divisible by max layer factor {max_factor}")

        wanted = set(layers)
        out: dict[str, FeatureMap] = {}
        deepest = max((_layer_depth(self.spec, n) for n in layers))
        h = x.unsqueeze(0)
        depth = 0
        for s, (width, n) in enumerate(zip(self.spec.stage_widths, self.spec.convs_per_stage), start=1):
            if s > 1:
                if h.shape[2] % 2 or h.shape[3] % 2:
                    raise ValueError("odd spatial size before pooling (padding='valid' shrank too far)")
                h = F.avg_pool2d(h, 2)
            for i in range(1, n + 1):
                w = self.weights[f"conv{s}_{i}.weight"]
                b = self.weights[f"conv{s}_{i}.bias"]
                pad = 0 if self.spec.padding == "valid" else w.shape[2] // 2
                h = F.relu(F.conv2d(h, w, b, padding=pad))
                depth += 1
                name = f"relu{s}_{i}"
                if name in wanted:
                    out[name] = FeatureMap(h.squeeze(0), name)
                if depth >= deepest:
                    return out
        return out


def load_extractor(spec: ExtractorSpec) -> FeatureExtractor:
    return FeatureExtractor(spec)


def _layer_depth(spec: ExtractorSpec, name: str) -> int:
    m = _LAYER_RE.match(name)
    s, i = int(m.group(1)), int(m.group(2))
    return sum(spec.convs_per_stage[: s - 1]) + i


def _conv_shapes(spec: ExtractorSpec) -> dict[str, tuple[int, ...]]:
    shapes = {}
    in_ch = 3
    for s, (width, n) in enumerate(zip(spec.stage_widths, spec.convs_per_stage), start=1):
        for i in range(1, n + 1):
            shapes[f"conv{s}_{i}.weight"] = (width, in_ch, 3, 3)
            shapes[f"conv{s}_{i}.bias"] = (width,)
            in_ch = width
    return shapes


def _random_weights(spec: ExtractorSpec) -> dict[str, torch.Tensor]:
    # He-normal kernels, zero biases: keeps activation scale stable through
    # the ReLU stack and makes the zero-input -> zero-features identity exact.
    rng = np.random.default_rng(spec.seed)
    weights = {}
    for name, shape in _conv_shapes(spec).items():
        if name.endswith(".bias"):
            weights[name] = torch.zeros(shape, dtype=torch.float64)
        else:
            fan_in = shape[1] * shape[2] * shape[3]
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            weights[name] = torch.from_numpy(w)
    return weights


def _load_weight_file(spec: ExtractorSpec) -> dict[str, torch.Tensor]:
    tensors, _ = tensorio.load_bundle(spec.path)
    expected = _conv_shapes(spec)
    weights = {}
    for name, shape in expected.items():
        if name not in tensors:
            raise ValueError(f"weight file {spec.path} is missing tensor {name}")
        arr = tensors[name]
        if tuple(arr.shape) != shape:
            raise ValueError(
                f"channel mismatch for {name}: file has {tuple(arr.shape)}, spec wants {shape}")
        weights[name] = torch.from_numpy(np.ascontiguousarray(arr))
    return weights
