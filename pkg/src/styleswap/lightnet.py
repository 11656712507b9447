"""Siamese lighting-direction embedding.

A small strided conv stack maps a luminance image to a fixed-length embedding.
Training pulls together embeddings of pairs lit the same way and pushes apart
pairs lit differently (margin hinge), so the embedding distance responds to
illumination while staying blind to identity. The trained net then supplies a
penalty that keeps a generated face lit like the input face.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import tensorio

CHECKPOINT_FORMAT = "lightnet-v1"


@dataclass(frozen=True)
class LightNetConfig:
    resolution: int = 128
    channels: tuple[int, ...] = (8, 16, 32, 64)
    embed_dim: int = 64
    kernel: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.resolution < 8 or self.resolution % (2 ** len(self.channels)):
            raise ValueError(
                f"resolution {self.resolution} not divisible by the conv stride product "
                f"{2 ** len(self.channels)}")
        if len(self.channels) < 1 or any(c < 1 for c in self.channels):
            raise ValueError("need at least one conv channel, all >= 1")
        if self.embed_dim < 8:
            raise ValueError("embedding dimension must be >= 8")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel must be odd and >= 1")


class LightNet(nn.Module):
    """Stride-2 conv + ReLU stack, flatten, linear projection to the embedding."""

    def __init__(self, config: LightNetConfig):
        super().__init__()
        self.config = config
        k, pad = config.kernel, config.kernel // 2
        convs = []
        in_ch = 1
        for ch in config.channels:
            convs.append(nn.Conv2d(in_ch, ch, k, stride=2, padding=pad))
            in_ch = ch
        self.convs = nn.ModuleList(convs)
        side = config.resolution // (2 ** len(config.channels))
        self.fc = nn.Linear(in_ch * side * side, config.embed_dim)
        self.double()
        rng = np.random.default_rng(config.seed)
        with torch.no_grad():
            for m in self.modules():
                if isinstance(m, (nn.Conv2d, nn.Linear)):
                    fan_in = m.weight.shape[1] if isinstance(m, nn.Linear) else int(
                        np.prod(m.weight.shape[1:]))
                    w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=tuple(m.weight.shape))
                    m.weight.copy_(torch.from_numpy(w))
                    m.bias.zero_()

    @property
    def resolution(self) -> int:
        return self.config.resolution

    @property
    def embed_dim(self) -> int:
        return self.config.embed_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 1, R, R) luminance batch -> (B, D) embeddings."""
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (B, 1, H, W), got {tuple(x.shape)}")
        if x.shape[2] != self.resolution or x.shape[3] != self.resolution:
            raise ValueError(
                f"net built for {self.resolution}x{self.resolution}, got {x.shape[2]}x{x.shape[3]}")
        h = x.to(torch.float64)
        for conv in self.convs:
            h = F.relu(conv(h))
        return self.fc(h.flatten(1))

    def embed_tensor(self, lum: torch.Tensor) -> torch.Tensor:
        """(H, W) luminance tensor -> (D,) embedding, differentiable."""
        if lum.ndim != 2:
            raise ValueError(f"expected an (H, W) tensor, got {tuple(lum.shape)}")
        return self.forward(lum.unsqueeze(0).unsqueeze(0)).squeeze(0)

    def embed(self, lum: np.ndarray) -> np.ndarray:
        """(H, W) numpy luminance in [0, 1] -> (D,) float64 embedding."""
        arr = np.asarray(lum, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected an (H, W) luminance map, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("non-finite values in luminance map")
        with torch.no_grad():
            e = self.embed_tensor(torch.from_numpy(np.ascontiguousarray(arr)))
        return e.numpy()

    def save(self, path: str) -> None:
        tensors = {name: p.detach().numpy() for name, p in self.named_parameters()}
        meta = {"format": CHECKPOINT_FORMAT,
                "resolution": self.config.resolution,
                "channels": list(self.config.channels),
                "embed_dim": self.config.embed_dim,
                "kernel": self.config.kernel,
                "seed": self.config.seed}
        tensorio.save_bundle(path, tensors, meta=meta, dtype="<f8")

    @classmethod
    def load(cls, path: str) -> "LightNet":
        tensors, meta = tensorio.load_bundle(path)
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a lighting-net checkpoint "
                             f"(format={meta.get('format')!r})")
        config = LightNetConfig(resolution=int(meta["resolution"]),
                                channels=tuple(meta["channels"]),
                                embed_dim=int(meta["embed_dim"]),
                                kernel=int(meta["kernel"]),
                                seed=int(meta.get("seed", 0)))
        net = cls(config)
        expected = {name for name, _ in net.named_parameters()}
        if expected != set(tensors):
            raise ValueError(f"checkpoint tensors in {path} do not match architecture")
        with torch.no_grad():
            for name, p in net.named_parameters():
                if tuple(tensors[name].shape) != tuple(p.shape):
                    raise ValueError(f"shape mismatch for {name} in {path}")
                p.copy_(torch.from_numpy(tensors[name]))
        return net


@dataclass(frozen=True)
class LightingPair:
    """Two luminance images plus whether they share a light direction."""

    img_a: np.ndarray
    img_b: np.ndarray
    same_light: bool

    def __post_init__(self):
        for name, img in (("img_a", self.img_a), ("img_b", self.img_b)):
            arr = np.asarray(img)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be (H, W), got shape {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"non-finite values in {name}")
        if self.img_a.shape != self.img_b.shape:
            raise ValueError("pair images must share a shape")


def contrastive_loss(e_a: torch.Tensor, e_b: torch.Tensor, same_light,
                     margin: float = 1.0) -> torch.Tensor:
    """Margin hinge on embedding distance.

    Batched: e_a, e_b are (B, D), same_light a length-B bool sequence.
    Same-light pairs pay d^2; different-light pairs pay max(0, margin - d)^2.
    Returns the batch mean.
    """
    if margin <= 0:
        raise ValueError("margin must be > 0")
    if e_a.ndim == 1:
        e_a, e_b = e_a.unsqueeze(0), e_b.unsqueeze(0)
        same_light = [bool(same_light)]
    if e_a.shape != e_b.shape or e_a.shape[0] != len(same_light):
        raise ValueError("embedding batch and label length mismatch")
    d = torch.linalg.vector_norm(e_a - e_b, dim=1)
    same = torch.tensor([bool(s) for s in same_light])
    per_pair = torch.where(same, d * d, F.relu(margin - d) ** 2)
    return per_pair.mean()


@dataclass(frozen=True)
class LightTrainConfig:
    epochs: int = 8
    batch_size: int = 32
    lr: float = 1e-3
    margin: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0 or self.margin <= 0:
            raise ValueError("lr and margin must be > 0")


def train_lightnet(pairs, train_config: LightTrainConfig,
                   net_config: LightNetConfig | None = None,
                   net: LightNet | None = None):
    """Train a lighting embedding on labelled pairs.

    Returns (net, curve) where curve is one dict per epoch with the mean
    contrastive loss. Deterministic for a fixed seed and thread count.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty training set")
    labels = {p.same_light for p in pairs}
    if labels != {True, False}:
        raise ValueError("training set needs both same-light and different-light pairs")
    if net is None:
        if net_config is None:
            res = pairs[0].img_a.shape[0]
            net_config = LightNetConfig(resolution=res)
        net = LightNet(net_config)
    for p in pairs:
        if p.img_a.shape != (net.resolution, net.resolution):
            raise ValueError(
                f"pair image shape {p.img_a.shape} does not match net resolution {net.resolution}")

    torch.set_num_threads(1)
    rng = np.random.default_rng(train_config.seed)
    a_all = torch.from_numpy(np.stack([np.ascontiguousarray(p.img_a, dtype=np.float64)
                                       for p in pairs])[:, None])
    b_all = torch.from_numpy(np.stack([np.ascontiguousarray(p.img_b, dtype=np.float64)
                                       for p in pairs])[:, None])
    same_all = np.array([p.same_light for p in pairs])

    opt = torch.optim.Adam(net.parameters(), lr=train_config.lr)
    curve = []
    for epoch in range(train_config.epochs):
        order = rng.permutation(len(pairs))
        total, seen = 0.0, 0
        for start in range(0, len(pairs), train_config.batch_size):
            idx = order[start: start + train_config.batch_size]
            opt.zero_grad()
            e_a = net(a_all[idx])
            e_b = net(b_all[idx])
            loss = contrastive_loss(e_a, e_b, same_all[idx], margin=train_config.margin)
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite contrastive loss at epoch {epoch}")
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
            seen += len(idx)
        curve.append({"epoch": epoch, "loss": total / seen})
    return net, curve
