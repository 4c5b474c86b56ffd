"""The self-similarity loss: forward evaluation, analytic gradient, composites.

The objective compares the SSGs of a ground-truth image and a reconstruction:
per center, KL(p || q) + alpha * sum|q - p| where p are the ground-truth
weights and q the reconstruction weights, averaged over centers. The backward
pass pushes d(loss)/dq through the per-center normalization, the exponential
similarity, and the window distance down to reconstruction pixels:

    dq_r/ds_t = (delta_rt - q_r) / eps
    ds_t/dd2  = -s_t / h
    dd2/dx    = 2 * (window difference) / (C * Kw^2)    at both windows

Only the reconstruction receives gradient; the ground truth is data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from .edge_mask import EdgeMask
from .errors import GraphMismatch, ShapeMismatch
from .image_io import Image
from .ssg import Ssg, SsgConfig, check_mask_compatible, sample_offsets


@dataclass(eq=False)
class LossReport:
    kl: float
    l1: float
    ssl: float
    n_centers: int
    alpha: float
    reduction: str = "mean-over-centers"
    per_center: Optional[np.ndarray] = None  # (N, 4): row, col, kl_i, l1_i

    def to_json(self) -> str:
        return json.dumps(
            {
                "kl": self.kl,
                "l1": self.l1,
                "ssl": self.ssl,
                "n_centers": self.n_centers,
                "alpha": self.alpha,
                "reduction": self.reduction,
            }
        )


@dataclass(eq=False)
class GradientField:
    """d(SSL)/d(reconstruction pixel), same shape as the reconstruction."""

    height: int
    width: int
    channels: int
    data: np.ndarray  # float32 (H, W, C)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"{(self.height, self.width, self.channels)}"
            )


@dataclass(frozen=True)
class CompositeWeights:
    mode: str  # "GAN" or "DM"
    beta: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.mode not in ("GAN", "DM"):
            raise ValueError(f"mode must be GAN or DM, got {self.mode!r}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.mode == "DM" and self.gamma < 0:
            raise ValueError("gamma must be nonnegative in DM mode")


def graphs_match(a: Ssg, b: Ssg) -> bool:
    return (
        a.centers.shape == b.centers.shape
        and a.offsets.shape == b.offsets.shape
        and np.array_equal(a.centers, b.centers)
        and np.array_equal(a.offsets, b.offsets)
    )


def ssl_forward(
    ssg_hr: Ssg, ssg_sr: Ssg, cfg: SsgConfig, per_center: bool = False
) -> LossReport:
    """KL + alpha*L1 between two aligned SSGs, averaged over centers."""
    if not graphs_match(ssg_hr, ssg_sr):
        raise GraphMismatch("SSGs do not share centers and offsets")
    n = ssg_hr.n_centers
    if n == 0:
        return LossReport(0.0, 0.0, 0.0, 0, cfg.alpha,
                          per_center=np.zeros((0, 4)) if per_center else None)

    p = np.asarray(ssg_hr.weights, dtype=np.float64)
    q = np.asarray(ssg_sr.weights, dtype=np.float64)
    # Rows are probability vectors by construction; renormalizing here keeps
    # KL nonnegative (within ~1e-15) even for graphs restored from f32 files.
    p = p / p.sum(axis=1, keepdims=True)
    q = q / q.sum(axis=1, keepdims=True)

    q_floored = np.maximum(q, cfg.eps_log)
    kl_terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0) / q_floored), 0.0)
    kl_i = kl_terms.sum(axis=1)
    l1_i = np.abs(q - p).sum(axis=1)

    kl = float(np.mean(kl_i))
    l1 = float(np.mean(l1_i))
    ssl = kl + cfg.alpha * l1
    detail = None
    if per_center:
        detail = np.column_stack(
            [ssg_hr.centers[:, 0], ssg_hr.centers[:, 1], kl_i, l1_i]
        ).astype(np.float64)
    return LossReport(kl, l1, ssl, n, cfg.alpha, per_center=detail)


@njit(cache=True)
def _reference_backward(hr, sr, centers, offsets, kw, h, alpha, eps_log):
    n = centers.shape[0]
    m = offsets.shape[0]
    c = hr.shape[2]
    f = (kw - 1) // 2
    inv = 1.0 / (c * kw * kw)
    grad = np.zeros(hr.shape, dtype=np.float64)
    kl_per = np.empty(n, dtype=np.float64)
    l1_per = np.empty(n, dtype=np.float64)
    s_hr = np.empty(m, dtype=np.float64)
    s_sr = np.empty(m, dtype=np.float64)
    p = np.empty(m, dtype=np.float64)
    q = np.empty(m, dtype=np.float64)
    g = np.empty(m, dtype=np.float64)

    for i in range(n):
        pr = centers[i, 0]
        pc = centers[i, 1]

        eps_hr = 0.0
        eps_sr = 0.0
        for k in range(m):
            qr = pr + offsets[k, 0]
            qc = pc + offsets[k, 1]
            acc_hr = 0.0
            acc_sr = 0.0
            for dr in range(-f, f + 1):
                for dc in range(-f, f + 1):
                    for ch in range(c):
                        d = hr[pr + dr, pc + dc, ch] - hr[qr + dr, qc + dc, ch]
                        acc_hr += d * d
                        d = sr[pr + dr, pc + dc, ch] - sr[qr + dr, qc + dc, ch]
                        acc_sr += d * d
            s_hr[k] = math.exp(-acc_hr * inv / h)
            s_sr[k] = math.exp(-acc_sr * inv / h)
            eps_hr += s_hr[k]
            eps_sr += s_sr[k]
        for k in range(m):
            p[k] = s_hr[k] / eps_hr
            q[k] = s_sr[k] / eps_sr

        kl = 0.0
        l1 = 0.0
        for k in range(m):
            if p[k] > 0.0:
                qf = q[k] if q[k] > eps_log else eps_log
                kl += p[k] * math.log(p[k] / qf)
            l1 += abs(q[k] - p[k])
        kl_per[i] = kl
        l1_per[i] = l1

        # A center whose raw similarity vectors agree bit-for-bit sits at its
        # per-center minimum; both subgradient conventions pick zero there.
        identical = True
        for k in range(m):
            if s_hr[k] != s_sr[k]:
                identical = False
                break
        if identical:
            continue

        big_g = 0.0
        for k in range(m):
            gk = 0.0
            if q[k] > eps_log:
                gk -= p[k] / q[k]
            diff = q[k] - p[k]
            if diff > 0.0:
                gk += alpha
            elif diff < 0.0:
                gk -= alpha
            g[k] = gk
            big_g += gk * q[k]

        for k in range(m):
            u = (g[k] - big_g) / eps_sr
            coef = (-u * s_sr[k] / h) * 2.0 * inv
            if coef == 0.0:
                continue
            qr = pr + offsets[k, 0]
            qc = pc + offsets[k, 1]
            for dr in range(-f, f + 1):
                for dc in range(-f, f + 1):
                    for ch in range(c):
                        w = coef * (sr[pr + dr, pc + dc, ch] - sr[qr + dr, qc + dc, ch])
                        grad[pr + dr, pc + dc, ch] += w
                        grad[qr + dr, qc + dc, ch] -= w

    return grad, kl_per, l1_per


def _check_pair(img_hr: Image, img_sr: Image) -> None:
    if (img_hr.height, img_hr.width, img_hr.channels) != (
        img_sr.height,
        img_sr.width,
        img_sr.channels,
    ):
        raise ShapeMismatch(
            f"ground truth is {img_hr.height}x{img_hr.width}x{img_hr.channels}, "
            f"reconstruction is {img_sr.height}x{img_sr.width}x{img_sr.channels}"
        )


def ssl_backward(
    img_hr: Image, img_sr: Image, mask: EdgeMask, cfg: SsgConfig
) -> tuple[LossReport, GradientField]:
    """Loss plus analytic d(SSL)/d(reconstruction pixel), mean over centers.

    Single-threaded reference path with a fixed accumulation order; the
    optimized kernel is validated against it.
    """
    _check_pair(img_hr, img_sr)
    check_mask_compatible(img_hr, mask, cfg)
    offsets = sample_offsets(cfg)
    n = mask.centers.shape[0]
    shape = (img_sr.height, img_sr.width, img_sr.channels)
    if n == 0:
        return (
            LossReport(0.0, 0.0, 0.0, 0, cfg.alpha),
            GradientField(*shape, np.zeros(shape, dtype=np.float32)),
        )
    grad, kl_per, l1_per = _reference_backward(
        img_hr.data, img_sr.data, mask.centers, offsets, cfg.kw, cfg.h, cfg.alpha, cfg.eps_log
    )
    kl = float(np.mean(kl_per))
    l1 = float(np.mean(l1_per))
    report = LossReport(kl, l1, kl + cfg.alpha * l1, n, cfg.alpha)
    return report, GradientField(*shape, (grad / n).astype(np.float32))


def composite_total(
    original_loss: float, ssl: float, pixel_l1: float, w: CompositeWeights
) -> float:
    """Total training loss: original + beta*SSL (+ gamma*pixel-L1 in DM mode)."""
    if w.mode == "GAN":
        return original_loss + w.beta * ssl
    return original_loss + w.beta * ssl + w.gamma * pixel_l1


def mean_abs_diff(a: Image, b: Image) -> float:
    """Pixel-wise L1 between two images, mean over all samples."""
    _check_pair(a, b)
    if a.data.size == 0:
        return 0.0
    return float(np.mean(np.abs(a.data - b.data)))


def toy_optimize(
    sr_init: Image,
    hr: Image,
    mask: EdgeMask,
    cfg: SsgConfig,
    steps: int,
    lr: float,
    backward: Optional[Callable] = None,
) -> tuple[Image, list[float]]:
    """Plain gradient descent on SSL + gamma * pixel-L1 from sr_init.

    The image is clamped to [0,1] after every step. The trace holds the total
    loss at the start of each executed step (empty when steps=0).
    """
    _check_pair(sr_init, hr)
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if backward is None:
        backward = ssl_backward
    current = sr_init.data.copy()
    n_samples = current.size
    trace: list[float] = []
    for _ in range(steps):
        img = Image(sr_init.height, sr_init.width, sr_init.channels, current)
        report, grad = backward(hr, img, mask, cfg)
        diff = current - hr.data
        total = report.ssl + cfg.gamma * float(np.mean(np.abs(diff)))
        trace.append(total)
        step = grad.data.astype(np.float64) + cfg.gamma * np.sign(diff) / n_samples
        current = np.clip(current - lr * step, 0.0, 1.0)
    out = Image(sr_init.height, sr_init.width, sr_init.channels, current)
    return out, trace


def total_toy_loss(sr: Image, hr: Image, mask: EdgeMask, cfg: SsgConfig,
                   backward: Optional[Callable] = None) -> float:
    """The quantity toy_optimize descends: SSL + gamma * pixel-L1."""
    if backward is None:
        backward = ssl_backward
    report, _ = backward(hr, sr, mask, cfg)
    return report.ssl + cfg.gamma * mean_abs_diff(sr, hr)
