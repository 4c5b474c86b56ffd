"""Optimized SSG and gradient kernels, equivalent to the reference path.

Two interchangeable strategies sit behind one cost-model switch:

* direct: per-center, per-offset window loops (the reference structure)
  parallelized over centers, optionally using a cached prefix table of
  squared intensities so each sample costs one multiply-add.
* offset-map: one difference map per offset pair (+d and -d share a map),
  box-summed through a 2D prefix table, so the window sums of every center
  drop out as four-corner lookups. Roughly O(H*W*n_offsets) instead of
  O(n_centers*n_offsets*C*Kw^2); it wins once centers are dense.

Gradients scatter into row/column tiles with fixed ownership: every output
pixel is owned by exactly one tile and receives its contributions in global
center order, so results are bit-identical for any worker count or tiling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from statistics import median
from typing import Optional

import numpy as np
import numba
from numba import njit, prange

from .edge_mask import EdgeMask, compute_edge_mask
from .image_io import Image
from .loss import GradientField, LossReport, _check_pair
from .ssg import Ssg, SsgConfig, check_mask_compatible, estimate_cost, sample_offsets

EXP_COST = 40  # rough flop-equivalent of exp + bookkeeping per sample


@dataclass(frozen=True)
class KernelPlan:
    """Work partitioning and strategy knobs for the optimized kernels."""

    tile_rows: int = 48  # scatter tile height (rows per owned band)
    tile_cols: int = 0  # scatter tile width; 0 = whole rows
    n_workers: int = 0  # 0 = all available threads
    precompute_sq: bool = True  # cache squared-intensity prefix sums (direct path)
    mode: str = "auto"  # "auto" | "direct" | "offset-map"

    def __post_init__(self):
        if self.tile_rows < 1:
            raise ValueError("tile_rows must be >= 1")
        if self.tile_cols < 0:
            raise ValueError("tile_cols must be >= 0")
        if self.n_workers < 0:
            raise ValueError("n_workers must be >= 0")
        if self.mode not in ("auto", "direct", "offset-map"):
            raise ValueError(f"unknown kernel mode {self.mode!r}")


def effective_workers(n_workers: int) -> int:
    """Clamp a worker request to numba's thread cap (results are unaffected)."""
    cap = numba.config.NUMBA_NUM_THREADS
    if n_workers <= 0:
        return cap
    return max(1, min(n_workers, cap))


def _set_threads(plan: KernelPlan) -> None:
    numba.set_num_threads(effective_workers(plan.n_workers))


def _pick_mode(plan: KernelPlan, img: Image, n_centers: int, cfg: SsgConfig) -> str:
    if plan.mode != "auto":
        return plan.mode
    m = sample_offsets(cfg).shape[0]
    c = img.channels
    direct = n_centers * m * (3 * c * cfg.kw * cfg.kw + EXP_COST)
    n_reps = (m + 1) // 2
    offset_map = n_reps * img.height * img.width * (3 * c + 2) + n_centers * m * EXP_COST
    return "offset-map" if offset_map < direct else "direct"


# ---------------------------------------------------------------------------
# similarity kernels (raw s values, one row per center)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _sq_prefix(img):
    h, w, c = img.shape
    p = np.zeros((h + 1, w + 1), dtype=np.float64)
    for i in range(h):
        rowacc = 0.0
        for j in range(w):
            v = 0.0
            for ch in range(c):
                x = img[i, j, ch]
                v += x * x
            rowacc += v
            p[i + 1, j + 1] = p[i, j + 1] + rowacc
    return p


@njit(cache=True, parallel=True)
def _direct_similarities(img, centers, offsets, kw, h, sq, use_sq):
    n = centers.shape[0]
    m = offsets.shape[0]
    c = img.shape[2]
    f = (kw - 1) // 2
    inv = 1.0 / (c * kw * kw)
    s = np.empty((n, m), dtype=np.float64)
    for i in prange(n):
        pr = centers[i, 0]
        pc = centers[i, 1]
        if use_sq:
            a = pr - f
            b = pc - f
            sq_p = sq[a + kw, b + kw] - sq[a, b + kw] - sq[a + kw, b] + sq[a, b]
            for k in range(m):
                qr = pr + offsets[k, 0]
                qc = pc + offsets[k, 1]
                cross = 0.0
                for dr in range(-f, f + 1):
                    for dc in range(-f, f + 1):
                        for ch in range(c):
                            cross += img[pr + dr, pc + dc, ch] * img[qr + dr, qc + dc, ch]
                a2 = qr - f
                b2 = qc - f
                sq_q = (
                    sq[a2 + kw, b2 + kw] - sq[a2, b2 + kw] - sq[a2 + kw, b2] + sq[a2, b2]
                )
                d2 = sq_p + sq_q - 2.0 * cross
                if d2 < 0.0:  # prefix-table cancellation noise
                    d2 = 0.0
                s[i, k] = math.exp(-d2 * inv / h)
        else:
            for k in range(m):
                qr = pr + offsets[k, 0]
                qc = pc + offsets[k, 1]
                acc = 0.0
                for dr in range(-f, f + 1):
                    for dc in range(-f, f + 1):
                        for ch in range(c):
                            d = img[pr + dr, pc + dc, ch] - img[qr + dr, qc + dc, ch]
                            acc += d * d
                s[i, k] = math.exp(-acc * inv / h)
    return s


@njit(cache=True, parallel=True)
def _offsetmap_similarities(img, centers, offsets, reps, partners, kw, h):
    height, width, c = img.shape
    n = centers.shape[0]
    m = offsets.shape[0]
    f = (kw - 1) // 2
    inv = 1.0 / (c * kw * kw)
    s = np.empty((n, m), dtype=np.float64)
    for ri in prange(reps.shape[0]):
        k = reps[ri]
        kp = partners[ri]
        dr = offsets[k, 0]
        dc = offsets[k, 1]
        r0 = max(0, -dr)
        r1 = height - max(0, dr)
        c0 = max(0, -dc)
        c1 = width - max(0, dc)
        # prefix[i+1, j+1] = sum of the per-pixel squared difference against
        # the (dr, dc)-shifted image over rows <= i, cols <= j
        prefix = np.zeros((height + 1, width + 1), dtype=np.float64)
        row = np.empty(width, dtype=np.float64)
        for i in range(height):
            if r0 <= i < r1:
                for j in range(width):
                    row[j] = 0.0
                for j in range(c0, c1):
                    v = 0.0
                    for ch in range(c):
                        t = img[i, j, ch] - img[i + dr, j + dc, ch]
                        v += t * t
                    row[j] = v
                rowacc = 0.0
                for j in range(width):
                    rowacc += row[j]
                    prefix[i + 1, j + 1] = prefix[i, j + 1] + rowacc
            else:
                for j in range(width):
                    prefix[i + 1, j + 1] = prefix[i, j + 1]
        for i in range(n):
            pr = centers[i, 0]
            pc = centers[i, 1]
            a = pr - f
            b = pc - f
            win = (
                prefix[a + kw, b + kw] - prefix[a, b + kw] - prefix[a + kw, b] + prefix[a, b]
            )
            if win < 0.0:
                win = 0.0
            s[i, k] = math.exp(-win * inv / h)
            if kp != k:
                # the mirrored offset -d shares this map: its summand at
                # window cell y is D(y) for y in the window centered at p-d
                a = pr - dr - f
                b = pc - dc - f
                win = (
                    prefix[a + kw, b + kw]
                    - prefix[a, b + kw]
                    - prefix[a + kw, b]
                    + prefix[a, b]
                )
                if win < 0.0:
                    win = 0.0
                s[i, kp] = math.exp(-win * inv / h)
    return s


@njit(cache=True, parallel=True)
def _rows_to_weights(s):
    n, m = s.shape
    weights = np.empty((n, m), dtype=np.float64)
    norms = np.empty(n, dtype=np.float64)
    for i in prange(n):
        eps = 0.0
        for k in range(m):
            eps += s[i, k]
        norms[i] = eps
        for k in range(m):
            weights[i, k] = s[i, k] / eps
    return weights, norms


def _offset_pairs(offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of one representative per {+d, -d} pair, plus its partner."""
    lookup = {(int(r), int(c)): k for k, (r, c) in enumerate(offsets)}
    reps, partners = [], []
    seen = set()
    for k, (r, c) in enumerate(offsets):
        if k in seen:
            continue
        kp = lookup[(-int(r), -int(c))]
        reps.append(k)
        partners.append(kp)
        seen.add(k)
        seen.add(kp)
    return np.array(reps, dtype=np.int64), np.array(partners, dtype=np.int64)


def _similarities(img: Image, mask: EdgeMask, cfg: SsgConfig, plan: KernelPlan,
                  offsets: np.ndarray, mode: str) -> np.ndarray:
    if mode == "offset-map":
        reps, partners = _offset_pairs(offsets)
        return _offsetmap_similarities(
            img.data, mask.centers, offsets, reps, partners, cfg.kw, cfg.h
        )
    sq = _sq_prefix(img.data) if plan.precompute_sq else np.zeros((1, 1))
    return _direct_similarities(
        img.data, mask.centers, offsets, cfg.kw, cfg.h, sq, plan.precompute_sq
    )


def compute_ssg_fast(img: Image, mask: EdgeMask, cfg: SsgConfig,
                     plan: Optional[KernelPlan] = None) -> Ssg:
    """Optimized SSG build; weights within 1e-6 of compute_ssg_oracle."""
    plan = plan or KernelPlan()
    check_mask_compatible(img, mask, cfg)
    offsets = sample_offsets(cfg)
    n = mask.centers.shape[0]
    if n == 0:
        return Ssg(
            centers=mask.centers.copy(),
            offsets=offsets,
            weights=np.zeros((0, offsets.shape[0]), dtype=np.float64),
            norm_constants=np.zeros(0, dtype=np.float64),
            ks=cfg.ks, kw=cfg.kw, h=cfg.h, stride=cfg.stride,
        )
    _set_threads(plan)
    mode = _pick_mode(plan, img, n, cfg)
    s = _similarities(img, mask, cfg, plan, offsets, mode)
    weights, norms = _rows_to_weights(s)
    return Ssg(
        centers=mask.centers.copy(),
        offsets=offsets,
        weights=weights,
        norm_constants=norms,
        ks=cfg.ks, kw=cfg.kw, h=cfg.h, stride=cfg.stride,
    )


# ---------------------------------------------------------------------------
# gradient
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def _per_center_chain(s_hr, s_sr, alpha, eps_log, h):
    """Per-center loss terms and d(loss)/d(d2) scale factors v."""
    n, m = s_hr.shape
    v = np.zeros((n, m), dtype=np.float64)
    kl_per = np.empty(n, dtype=np.float64)
    l1_per = np.empty(n, dtype=np.float64)
    for i in prange(n):
        eps_hr = 0.0
        eps_sr = 0.0
        for k in range(m):
            eps_hr += s_hr[i, k]
        for k in range(m):
            eps_sr += s_sr[i, k]
        kl = 0.0
        l1 = 0.0
        for k in range(m):
            pk = s_hr[i, k] / eps_hr
            qk = s_sr[i, k] / eps_sr
            if pk > 0.0:
                qf = qk if qk > eps_log else eps_log
                kl += pk * math.log(pk / qf)
            l1 += abs(qk - pk)
        kl_per[i] = kl
        l1_per[i] = l1

        identical = True
        for k in range(m):
            if s_hr[i, k] != s_sr[i, k]:
                identical = False
                break
        if identical:
            continue  # zero subgradient at the per-center minimum

        g = np.empty(m, dtype=np.float64)
        big_g = 0.0
        for k in range(m):
            pk = s_hr[i, k] / eps_hr
            qk = s_sr[i, k] / eps_sr
            gk = 0.0
            if qk > eps_log:
                gk -= pk / qk
            diff = qk - pk
            if diff > 0.0:
                gk += alpha
            elif diff < 0.0:
                gk -= alpha
            g[k] = gk
            big_g += gk * qk
        for k in range(m):
            u = (g[k] - big_g) / eps_sr
            v[i, k] = -u * s_sr[i, k] / h
    return v, kl_per, l1_per


@njit(cache=True, parallel=True)
def _scatter_tiles(sr, centers, offsets, v, kw,
                   row_lo, row_hi, col_lo, col_hi, cen_lo, cen_hi, reach):
    """Accumulate window-difference gradients into tile-owned pixels.

    Each tile owns rows [row_lo, row_hi) x cols [col_lo, col_hi) and applies,
    in ascending center order, exactly the contributions that land in it, so
    per-pixel accumulation order matches the sequential reference.
    """
    height, width, c = sr.shape
    m = offsets.shape[0]
    f = (kw - 1) // 2
    inv = 1.0 / (c * kw * kw)
    grad = np.zeros((height, width, c), dtype=np.float64)
    for t in prange(row_lo.shape[0]):
        ra = row_lo[t]
        rb = row_hi[t]
        ca = col_lo[t]
        cb = col_hi[t]
        for i in range(cen_lo[t], cen_hi[t]):
            pr = centers[i, 0]
            pc = centers[i, 1]
            if pc + reach < ca or pc - reach >= cb:
                continue
            for k in range(m):
                coef = v[i, k] * 2.0 * inv
                if coef == 0.0:
                    continue
                qr = pr + offsets[k, 0]
                qc = pc + offsets[k, 1]
                for dr in range(-f, f + 1):
                    r1 = pr + dr
                    r2 = qr + dr
                    row1 = ra <= r1 < rb
                    row2 = ra <= r2 < rb
                    if not (row1 or row2):
                        continue
                    for dc in range(-f, f + 1):
                        c1 = pc + dc
                        c2 = qc + dc
                        in1 = row1 and ca <= c1 < cb
                        in2 = row2 and ca <= c2 < cb
                        if not (in1 or in2):
                            continue
                        for ch in range(c):
                            w = coef * (sr[r1, c1, ch] - sr[r2, c2, ch])
                            if in1:
                                grad[r1, c1, ch] += w
                            if in2:
                                grad[r2, c2, ch] -= w
    return grad


def _tile_geometry(img: Image, mask: EdgeMask, cfg: SsgConfig, plan: KernelPlan):
    offsets = sample_offsets(cfg)
    f = (cfg.kw - 1) // 2
    reach = int(np.max(np.abs(offsets))) + f if offsets.size else f
    th = plan.tile_rows
    tw = plan.tile_cols if plan.tile_cols > 0 else img.width
    row_edges = list(range(0, img.height, th)) + [img.height]
    col_edges = list(range(0, img.width, tw)) + [img.width]
    rows = mask.centers[:, 0]
    row_lo, row_hi, col_lo, col_hi, cen_lo, cen_hi = [], [], [], [], [], []
    for ra, rb in zip(row_edges[:-1], row_edges[1:]):
        lo = int(np.searchsorted(rows, ra - reach, side="left"))
        hi = int(np.searchsorted(rows, rb - 1 + reach, side="right"))
        for ca, cb in zip(col_edges[:-1], col_edges[1:]):
            row_lo.append(ra)
            row_hi.append(rb)
            col_lo.append(ca)
            col_hi.append(cb)
            cen_lo.append(lo)
            cen_hi.append(hi)
    as_arr = lambda x: np.array(x, dtype=np.int64)
    return (as_arr(row_lo), as_arr(row_hi), as_arr(col_lo), as_arr(col_hi),
            as_arr(cen_lo), as_arr(cen_hi), reach)


def ssl_backward_fast(
    img_hr: Image, img_sr: Image, mask: EdgeMask, cfg: SsgConfig,
    plan: Optional[KernelPlan] = None,
) -> tuple[LossReport, GradientField]:
    """Parallel loss + gradient; within 1e-5 of the reference, bit-stable
    across worker counts and tilings."""
    plan = plan or KernelPlan()
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
    _set_threads(plan)
    mode = _pick_mode(plan, img_sr, n, cfg)
    s_hr = _similarities(img_hr, mask, cfg, plan, offsets, mode)
    s_sr = _similarities(img_sr, mask, cfg, plan, offsets, mode)
    v, kl_per, l1_per = _per_center_chain(s_hr, s_sr, cfg.alpha, cfg.eps_log, cfg.h)
    geom = _tile_geometry(img_sr, mask, cfg, plan)
    grad = _scatter_tiles(img_sr.data, mask.centers, offsets, v, cfg.kw, *geom)
    kl = float(np.mean(kl_per))
    l1 = float(np.mean(l1_per))
    report = LossReport(kl, l1, kl + cfg.alpha * l1, n, cfg.alpha)
    return report, GradientField(*shape, (grad / n).astype(np.float32))


# ---------------------------------------------------------------------------
# benchmarking
# ---------------------------------------------------------------------------

BENCH_CSV_HEADER = "h,w,n_centers,Ks,Kw,stride,workers,wall_ns,predicted_madds"


@dataclass
class BenchRow:
    h: int
    w: int
    n_centers: int
    ks: int
    kw: int
    stride: int
    workers: int
    wall_ns: int
    predicted_madds: int

    def to_csv(self) -> str:
        return (
            f"{self.h},{self.w},{self.n_centers},{self.ks},{self.kw},"
            f"{self.stride},{self.workers},{self.wall_ns},{self.predicted_madds}"
        )


def rows_to_csv(rows) -> str:
    return "\n".join([BENCH_CSV_HEADER] + [r.to_csv() for r in rows]) + "\n"


def bench(
    sizes,
    cfgs,
    plan: Optional[KernelPlan] = None,
    trials: int = 5,
    seed: int = 0,
    masks=None,
) -> list[BenchRow]:
    """Time the per-sample SSG kernel against its multiply-add estimate.

    One row per (size, cfg), wall time the median of >=trials runs. The
    direct path is timed because the estimate counts its samples; pass a
    different plan mode to time that instead. ``masks`` optionally overrides
    the computed mask per (size, cfg) pair, e.g. to control center counts.
    """
    from . import synth
    from .image_io import from_unit

    plan = plan or KernelPlan(mode="direct")
    trials = max(1, trials)
    rows = []
    idx = 0
    for hw in sizes:
        height, width = hw
        img = synth.natural_image(height, width, channels=3, seed=seed)
        u8 = from_unit(img)
        for cfg in cfgs:
            mask = masks[idx] if masks is not None else compute_edge_mask(u8, cfg)
            idx += 1
            compute_ssg_fast(img, mask, cfg, plan)  # warm the JIT/caches
            times = []
            for _ in range(trials):
                t0 = time.perf_counter_ns()
                compute_ssg_fast(img, mask, cfg, plan)
                times.append(time.perf_counter_ns() - t0)
            rows.append(
                BenchRow(
                    h=height,
                    w=width,
                    n_centers=int(mask.centers.shape[0]),
                    ks=cfg.ks,
                    kw=cfg.kw,
                    stride=cfg.stride,
                    workers=effective_workers(plan.n_workers),
                    wall_ns=int(median(times)),
                    predicted_madds=estimate_cost(cfg, mask, channels=3),
                )
            )
    return rows
