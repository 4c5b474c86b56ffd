"""Self-similarity graph construction: the data model and the reference path.

For every admissible edge pixel p the graph stores one probability
distribution over sampled search offsets q: raw similarities
exp(-d2(p, p+q)/h) normalized by their per-center sum, where d2 is the mean
squared intensity difference between the KwxKw windows at the two positions.

``compute_ssg_oracle`` is the reference implementation: plain nested loops,
single-threaded, with a fixed left-to-right summation order. It defines the
numbers the optimized kernel must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numba import njit

from .edge_mask import EdgeMask
from .errors import BoundsError, ConfigMismatch
from .image_io import Image


@dataclass(frozen=True)
class SsgConfig:
    """All similarity-graph and loss hyperparameters in one record.

    Defaults are the GAN-mode settings; ``dm_mode()`` switches the composite
    weights to the diffusion-model convention (beta=1, gamma=0.1).
    """

    ks: int = 25  # search-area side, odd
    kw: int = 9  # sliding-window side, odd, <= ks
    h: float = 0.004  # similarity scale on unit-intensity^2
    stride: int = 3  # search-area sampling step
    t: float = 20.0  # mask threshold, 8-bit scale
    alpha: float = 1.0  # L1 weight inside the SSL objective
    beta: float = 1000.0  # SSL weight in the composite total
    gamma: float = 0.1  # pixel-L1 weight (DM composite / toy optimizer)
    eps_log: float = 1e-12  # floor inside logarithms

    def __post_init__(self):
        if self.ks < 1 or self.ks % 2 == 0:
            raise ValueError(f"ks must be odd and >= 1, got {self.ks}")
        if self.kw < 1 or self.kw % 2 == 0:
            raise ValueError(f"kw must be odd and >= 1, got {self.kw}")
        if self.kw > self.ks:
            raise ValueError(f"kw ({self.kw}) must not exceed ks ({self.ks})")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not self.eps_log > 0:
            raise ValueError(f"eps_log must be positive, got {self.eps_log}")
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("alpha, beta and gamma must be nonnegative")

    def dm_mode(self) -> "SsgConfig":
        return replace(self, beta=1.0, gamma=0.1)

    @property
    def footprint_radius(self) -> int:
        return (self.ks - 1) // 2 + (self.kw - 1) // 2


@dataclass(eq=False)
class Ssg:
    """Normalized similarity distributions for every admissible center."""

    centers: np.ndarray  # int64 (N, 2)
    offsets: np.ndarray  # int64 (M, 2), shared by all centers
    weights: np.ndarray  # float64 (N, M), rows sum to 1
    norm_constants: np.ndarray  # float64 (N,), pre-normalization sums
    ks: int
    kw: int
    h: float
    stride: int

    @property
    def n_centers(self) -> int:
        return int(self.centers.shape[0])

    @property
    def n_offsets(self) -> int:
        return int(self.offsets.shape[0])


def sample_offset_grid(ks: int, stride: int) -> np.ndarray:
    """Stride grid over the search area, anchored so (0,0) is included.

    Offsets are k*stride for k in [-floor(Rs/stride), floor(Rs/stride)] on
    each axis (Rs = (ks-1)/2), listed row-major.
    """
    rs = (ks - 1) // 2
    reach = rs // stride
    axis = np.arange(-reach, reach + 1, dtype=np.int64) * stride
    dr, dc = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([dr.ravel(), dc.ravel()])


def sample_offsets(cfg: SsgConfig) -> np.ndarray:
    return sample_offset_grid(cfg.ks, cfg.stride)


def patch_distance(img: Image, p, q, kw: int) -> float:
    """Mean squared intensity difference between the KwxKw windows at p and q."""
    f = (kw - 1) // 2
    for name, (r, c) in (("p", p), ("q", q)):
        if r - f < 0 or c - f < 0 or r + f >= img.height or c + f >= img.width:
            raise BoundsError(f"window at {name}={(r, c)} exits the {img.height}x{img.width} image")
    a = img.data[p[0] - f : p[0] + f + 1, p[1] - f : p[1] + f + 1, :]
    b = img.data[q[0] - f : q[0] + f + 1, q[1] - f : q[1] + f + 1, :]
    return float(np.mean((a - b) ** 2))


def similarity(d2: float, h: float) -> float:
    """exp(-d2/h); 1 iff the windows are identical, decaying toward 0."""
    if d2 < 0:
        raise ValueError(f"squared distance must be nonnegative, got {d2}")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    return math.exp(-d2 / h)


def check_mask_compatible(img: Image, mask: EdgeMask, cfg: SsgConfig) -> None:
    if (mask.ks, mask.kw) != (cfg.ks, cfg.kw):
        raise ConfigMismatch(
            f"mask footprint (Ks={mask.ks}, Kw={mask.kw}) does not match "
            f"config (Ks={cfg.ks}, Kw={cfg.kw})"
        )
    if (mask.height, mask.width) != (img.height, img.width):
        raise ConfigMismatch(
            f"mask is {mask.height}x{mask.width} but image is {img.height}x{img.width}"
        )


@njit(cache=True)
def _oracle_weights(img, centers, offsets, kw, h):
    n = centers.shape[0]
    m = offsets.shape[0]
    c = img.shape[2]
    f = (kw - 1) // 2
    inv = 1.0 / (c * kw * kw)
    weights = np.empty((n, m), dtype=np.float64)
    norms = np.empty(n, dtype=np.float64)
    for i in range(n):
        pr = centers[i, 0]
        pc = centers[i, 1]
        eps = 0.0
        for k in range(m):
            qr = pr + offsets[k, 0]
            qc = pc + offsets[k, 1]
            acc = 0.0
            for dr in range(-f, f + 1):
                for dc in range(-f, f + 1):
                    for ch in range(c):
                        d = img[pr + dr, pc + dc, ch] - img[qr + dr, qc + dc, ch]
                        acc += d * d
            s = math.exp(-acc * inv / h)
            weights[i, k] = s
            eps += s
        norms[i] = eps
        for k in range(m):
            weights[i, k] /= eps
    return weights, norms


def compute_ssg_oracle(img: Image, mask: EdgeMask, cfg: SsgConfig) -> Ssg:
    """Reference SSG: per center, per offset, full window recomputation."""
    check_mask_compatible(img, mask, cfg)
    offsets = sample_offsets(cfg)
    centers = mask.centers
    if centers.shape[0] == 0:
        weights = np.zeros((0, offsets.shape[0]), dtype=np.float64)
        norms = np.zeros(0, dtype=np.float64)
    else:
        weights, norms = _oracle_weights(img.data, centers, offsets, cfg.kw, cfg.h)
    return Ssg(
        centers=centers.copy(),
        offsets=offsets,
        weights=weights,
        norm_constants=norms,
        ks=cfg.ks,
        kw=cfg.kw,
        h=cfg.h,
        stride=cfg.stride,
    )


def estimate_cost(cfg: SsgConfig, mask: Optional[EdgeMask], channels: int = 3) -> int:
    """Multiply-add count of the per-sample SSG computation.

    Exact for the reference path: every (center, offset) pair touches
    channels * Kw^2 samples. This is the constant-free instantiation of the
    O(edge_fraction * H * W * Ks^2 * Kw^2) cost model.
    """
    n_centers = 0 if mask is None else int(mask.centers.shape[0])
    n_offsets = int(sample_offsets(cfg).shape[0])
    return n_centers * n_offsets * channels * cfg.kw * cfg.kw
