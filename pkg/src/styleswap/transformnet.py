"""Multi-scale feed-forward transform network.

The net is a stack of branches, one per octave. Branch i sees the input
average-pooled to R / 2**(B-1-i) and runs a few zero-padded 3x3 conv + ReLU
blocks; its output is merged with the upsampled (nearest, 2x) running map by
channel concatenation followed by more conv + ReLU blocks. A final 1x1 conv
and a sigmoid map the full-resolution features to a 3-channel image in (0, 1).

Growing doubles the working resolution by stacking one new branch on top and
freezing every parameter that existed before the grow; the old output head is
kept (frozen) so checkpoints remain loadable and parameter counts honest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import tensorio
from .image import validate_image

# Branch widths for the default configuration, keyed by branch resolution.
DEFAULT_WIDTHS = {8: 32, 16: 48, 32: 64, 64: 80, 128: 104, 256: 152, 512: 216}
BASE_RESOLUTION = 8
MIN_RESOLUTION = 16
MAX_RESOLUTION = 1024

CHECKPOINT_FORMAT = "transformnet-v1"


@dataclass(frozen=True)
class BranchSpec:
    """Widths (coarsest branch first) and block counts of a transform net."""

    widths: tuple[int, ...]
    blocks_per_branch: int = 3
    merge_blocks: int = 2
    kernel: int = 3

    def __post_init__(self):
        if len(self.widths) < 1 or any(w < 3 for w in self.widths):
            raise ValueError("need at least one branch and widths >= 3")
        if self.blocks_per_branch < 1 or self.merge_blocks < 1:
            raise ValueError("block counts must be >= 1")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel must be odd and >= 1")


def _check_resolution(resolution: int, n_branches: int) -> None:
    r = int(resolution)
    if r < MIN_RESOLUTION or r > MAX_RESOLUTION or r & (r - 1):
        raise ValueError(
            f"resolution must be a power of two in [{MIN_RESOLUTION}, {MAX_RESOLUTION}], got {resolution}")
    base = r >> (n_branches - 1)
    if base < 4:
        raise ValueError(
            f"{n_branches} branches at resolution {r} would drop the coarsest branch below 4 px")


def default_branch_spec(resolution: int) -> BranchSpec:
    """Width table for the standard configuration: branches from 8 px up."""
    r = int(resolution)
    if r not in DEFAULT_WIDTHS or r < 32:
        raise ValueError(f"no default widths for resolution {resolution}")
    widths = []
    s = BASE_RESOLUTION
    while s <= r:
        widths.append(DEFAULT_WIDTHS[s])
        s *= 2
    return BranchSpec(widths=tuple(widths))


def _orthogonal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Conv weight with orthonormal rows (or columns if out > fan-in)."""
    out = shape[0]
    fan = int(np.prod(shape[1:]))
    g = rng.normal(size=(max(out, fan), min(out, fan)))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))  # fix the QR sign ambiguity for determinism
    w = q if out >= fan else q.T
    return np.ascontiguousarray(w.reshape(shape))


def _init_conv(conv: nn.Conv2d, rng: np.random.Generator) -> None:
    w = _orthogonal(rng, tuple(conv.weight.shape))
    with torch.no_grad():
        conv.weight.copy_(torch.from_numpy(w))
        conv.bias.zero_()


class _Branch(nn.Module):
    def __init__(self, width: int, prev_width: int | None, spec: BranchSpec):
        super().__init__()
        k = spec.kernel
        pad = k // 2
        pre = []
        in_ch = 3
        for _ in range(spec.blocks_per_branch):
            pre.append(nn.Conv2d(in_ch, width, k, padding=pad))
            in_ch = width
        self.pre = nn.ModuleList(pre)
        merge = []
        if prev_width is not None:
            in_ch = prev_width + width
            for _ in range(spec.merge_blocks):
                merge.append(nn.Conv2d(in_ch, width, k, padding=pad))
                in_ch = width
        self.merge = nn.ModuleList(merge)

    def run_pre(self, x: torch.Tensor) -> torch.Tensor:
        for conv in self.pre:
            x = F.relu(conv(x))
        return x

    def run_merge(self, x: torch.Tensor) -> torch.Tensor:
        for conv in self.merge:
            x = F.relu(conv(x))
        return x


class TransformNet(nn.Module):
    """See the module docstring. Construct via build() or load()."""

    def __init__(self, spec: BranchSpec, resolution: int, seed: int = 0):
        super().__init__()
        _check_resolution(resolution, len(spec.widths))
        self.spec = spec
        self.resolution = int(resolution)
        branches = []
        prev = None
        for w in spec.widths:
            branches.append(_Branch(w, prev, spec))
            prev = w
        self.branches = nn.ModuleList(branches)
        top = len(spec.widths) - 1
        self.heads = nn.ModuleDict({str(top): nn.Conv2d(spec.widths[-1], 3, 1)})
        self._active_head = top
        self._frozen = [False] * len(spec.widths)
        self.double()
        rng = np.random.default_rng(seed)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                _init_conv(m, rng)

    # -- structure ---------------------------------------------------------

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def frozen_branches(self) -> tuple[bool, ...]:
        return tuple(self._frozen)

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def frozen_param_count(self) -> int:
        return sum(p.numel() for p in self.parameters() if not p.requires_grad)

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]

    def _apply_freeze(self) -> None:
        for i, br in enumerate(self.branches):
            for p in br.parameters():
                p.requires_grad_(not self._frozen[i])
        for key, head in self.heads.items():
            active = int(key) == self._active_head and not self._frozen[int(key)]
            for p in head.parameters():
                p.requires_grad_(active)

    # -- forward -----------------------------------------------------------

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeeze = x.ndim == 3
        if squeeze:
            x = x.unsqueeze(0)
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) input, got {tuple(x.shape)}")
        if x.shape[2] != self.resolution or x.shape[3] != self.resolution:
            raise ValueError(
                f"net built for {self.resolution}x{self.resolution}, got {x.shape[2]}x{x.shape[3]}")
        x = x.to(torch.float64)
        m = None
        n = self.n_branches
        for i, br in enumerate(self.branches):
            factor = 1 << (n - 1 - i)
            xi = F.avg_pool2d(x, factor) if factor > 1 else x
            h = br.run_pre(xi)
            if m is None:
                m = h
            else:
                up = F.interpolate(m, scale_factor=2, mode="nearest")
                m = br.run_merge(torch.cat([up, h], dim=1))
        y = torch.sigmoid(self.heads[str(self._active_head)](m))
        return y.squeeze(0) if squeeze else y

    def transform(self, img: np.ndarray) -> np.ndarray:
        """Apply the net to one (R, R, 3) image, numpy in / numpy out."""
        validate_image(img)
        if img.shape[0] != self.resolution or img.shape[1] != self.resolution:
            raise ValueError(
                f"net built for {self.resolution}x{self.resolution}, got {img.shape[0]}x{img.shape[1]}")
        x = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))
        with torch.no_grad():
            y = self.forward(x)
        return np.ascontiguousarray(y.numpy().transpose(1, 2, 0))

    # -- growth ------------------------------------------------------------

    def grow(self, new_resolution: int, width: int | None = None,
             seed: int = 0) -> "TransformNet":
        """New net at twice the resolution; existing weights copied and frozen."""
        if int(new_resolution) != 2 * self.resolution:
            raise ValueError(
                f"can only grow to twice the resolution ({2 * self.resolution}), got {new_resolution}")
        if width is None:
            width = DEFAULT_WIDTHS.get(int(new_resolution))
            if width is None:
                raise ValueError(f"no default width for resolution {new_resolution}; pass one")
        spec = BranchSpec(widths=self.spec.widths + (int(width),),
                          blocks_per_branch=self.spec.blocks_per_branch,
                          merge_blocks=self.spec.merge_blocks,
                          kernel=self.spec.kernel)
        new = TransformNet(spec, int(new_resolution), seed=seed)
        with torch.no_grad():
            for i, br in enumerate(self.branches):
                new.branches[i].load_state_dict(br.state_dict())
            for key, head in self.heads.items():
                if key not in new.heads:
                    new.heads[key] = nn.Conv2d(head.in_channels, 3, 1).double()
                new.heads[key].load_state_dict(head.state_dict())
        new._frozen = [True] * self.n_branches + [False]
        new._apply_freeze()
        return new

    # -- persistence -------------------------------------------------------

    def save(self, path: str) -> None:
        tensors = {name: p.detach().numpy() for name, p in self.named_parameters()}
        meta = {
            "format": CHECKPOINT_FORMAT,
            "resolution": self.resolution,
            "widths": list(self.spec.widths),
            "blocks_per_branch": self.spec.blocks_per_branch,
            "merge_blocks": self.spec.merge_blocks,
            "kernel": self.spec.kernel,
            "frozen": list(self._frozen),
            "heads": sorted(int(k) for k in self.heads.keys()),
        }
        tensorio.save_bundle(path, tensors, meta=meta, dtype="<f8")

    @classmethod
    def load(cls, path: str) -> "TransformNet":
        tensors, meta = tensorio.load_bundle(path)
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a transform-net checkpoint "
                             f"(format={meta.get('format')!r})")
        try:
            spec = BranchSpec(widths=tuple(meta["widths"]),
                              blocks_per_branch=meta["blocks_per_branch"],
                              merge_blocks=meta["merge_blocks"],
                              kernel=meta["kernel"])
            resolution = int(meta["resolution"])
            frozen = [bool(b) for b in meta["frozen"]]
            head_keys = [int(k) for k in meta["heads"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed checkpoint metadata in {path}: {exc}") from None
        if len(frozen) != len(spec.widths):
            raise ValueError(f"frozen flags in {path} do not match branch count")
        net = cls(spec, resolution, seed=0)
        for key in head_keys:
            if str(key) not in net.heads:
                if not 0 <= key < len(spec.widths):
                    raise ValueError(f"checkpoint head index {key} out of range")
                net.heads[str(key)] = nn.Conv2d(spec.widths[key], 3, 1).double()
        expected = {name for name, _ in net.named_parameters()}
        if expected != set(tensors):
            missing = sorted(expected - set(tensors))[:3]
            extra = sorted(set(tensors) - expected)[:3]
            raise ValueError(f"checkpoint tensors do not match architecture "
                             f"(missing {missing}, unexpected {extra})")
        with torch.no_grad():
            for name, p in net.named_parameters():
                arr = tensors[name]
                if tuple(arr.shape) != tuple(p.shape):
                    raise ValueError(f"shape mismatch for {name} in {path}")
                p.copy_(torch.from_numpy(arr))
        net._frozen = frozen
        net._apply_freeze()
        return net


def build(resolution: int, spec: BranchSpec | None = None, seed: int = 0) -> TransformNet:
    """Fresh net at the given resolution; default widths unless spec is given."""
    if spec is None:
        spec = default_branch_spec(resolution)
    return TransformNet(spec, resolution, seed=seed)
