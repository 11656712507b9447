"""Gradient-domain compositing of the generated face into the original frame.

poisson_clone solves, per channel, the discrete Poisson equation on the masked
region with Dirichlet boundary values taken from the destination image and the
guidance field taken from the source gradients. Small systems are solved
densely; larger ones by conjugate gradients on the sparse 4-neighbour
Laplacian. Either way the residual is checked before the result is accepted.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .geometry import AffineTransform, warp_image
from .image import clamp01, validate_image, validate_mask

# Dense solve below this many masked pixels; sparse CG above.
DENSE_LIMIT = 4096
RESIDUAL_TOL = 1e-6
CG_TOL = 1e-8


class SolverError(RuntimeError):
    """The linear solve did not reach the required residual."""


def _check_mask_interior(mask: np.ndarray) -> None:
    if mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any():
        raise ValueError("mask must not touch the image border")


def _laplacian_system(mask: np.ndarray):
    """Masked-pixel index map plus the sparse 4-neighbour Laplacian."""
    h, w = mask.shape
    idx = -np.ones((h, w), dtype=np.int64)
    ys, xs = np.nonzero(mask)
    n = ys.size
    idx[ys, xs] = np.arange(n)

    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 4.0)]
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = ys + dy, xs + dx
        inside = idx[ny, nx] >= 0
        rows.append(np.arange(n)[inside])
        cols.append(idx[ny[inside], nx[inside]])
        vals.append(np.full(inside.sum(), -1.0))
    a = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return ys, xs, idx, a


def _rhs(src_ch: np.ndarray, dst_ch: np.ndarray, mask: np.ndarray,
         ys, xs, idx) -> np.ndarray:
    """Source Laplacian inside the mask plus boundary terms from dst."""
    b = 4.0 * src_ch[ys, xs]
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = ys + dy, xs + dx
        b -= src_ch[ny, nx]
        outside = idx[ny, nx] < 0
        b[outside] += dst_ch[ny[outside], nx[outside]]
    return b


def _solve(a, b: np.ndarray, x0: np.ndarray, dense: bool) -> np.ndarray:
    if dense:
        x = np.linalg.solve(a.toarray(), b)
    else:
        x = x0
        rtol = CG_TOL
        for _ in range(4):
            x, info = cg(a, b, x0=x, rtol=rtol, atol=0.0, maxiter=20 * b.size)
            if info != 0:
                raise SolverError(f"conjugate gradients failed to converge (info={info})")
            if np.max(np.abs(a @ x - b)) < RESIDUAL_TOL:
                break
            rtol *= 1e-2  # polish: restart from the current iterate
    resid = np.max(np.abs(a @ x - b))
    if resid >= RESIDUAL_TOL:
        raise SolverError(f"poisson solve residual {resid:.3e} above {RESIDUAL_TOL}")
    return x


def poisson_clone(src: np.ndarray, dst: np.ndarray, mask: np.ndarray,
                  solver: str = "auto") -> np.ndarray:
    """Seamlessly clone src into dst where mask is set.

    Pixels outside the mask are returned bit-identical to dst. solver is
    "auto", "dense", or "cg"; auto picks dense for small masked regions.
    """
    validate_image(src)
    validate_image(dst)
    validate_mask(mask)
    if src.shape != dst.shape or mask.shape != dst.shape[:2]:
        raise ValueError(f"shape mismatch: src {src.shape}, dst {dst.shape}, mask {mask.shape}")
    if solver not in ("auto", "dense", "cg"):
        raise ValueError(f"unknown solver {solver!r}")
    _check_mask_interior(mask)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("mask selects no pixels")
    dense = n < DENSE_LIMIT if solver == "auto" else solver == "dense"
    ys, xs, idx, a = _laplacian_system(mask)
    out = dst.copy()  # unmasked pixels stay bit-identical to dst
    for ch in range(3):
        b = _rhs(src[..., ch], dst[..., ch], mask, ys, xs, idx)
        x = _solve(a, b, x0=dst[ys, xs, ch].copy(), dense=dense)
        out[ys, xs, ch] = np.clip(x, 0.0, 1.0)
    return out


def composite_swap(original: np.ndarray, generated: np.ndarray,
                   to_original: AffineTransform, mask: np.ndarray) -> np.ndarray:
    """Warp the generated aligned face back into the original frame and blend.

    to_original maps aligned-face coordinates to original-image coordinates
    (the inverse of the alignment transform). The mask lives in the original
    frame and selects the region to replace.
    """
    validate_image(original)
    validate_image(generated)
    validate_mask(mask)
    if mask.shape != original.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {original.shape[:2]}")
    warped = warp_image(generated, to_original, original.shape[0], original.shape[1])
    return poisson_clone(clamp01(warped), original, mask)
