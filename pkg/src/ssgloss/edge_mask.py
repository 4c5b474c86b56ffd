"""Edge masks: Laplacian filtering, thresholding, and admissible centers.

The mask is computed on the native 8-bit scale so the standard threshold
(t=20) applies verbatim. Color images are reduced to BT.601 luminance first.
A pixel is an admissible SSG center only when the whole search-area-plus-
window footprint around it stays inside the image, so downstream similarity
code never needs a padding convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import image_io
from .errors import DimensionError, SsgLossError
from .image_io import ImageU8

LAPLACIAN_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.int32)


@dataclass(eq=False)
class EdgeMask:
    """Binary edge map plus the list of admissible center pixels."""

    height: int
    width: int
    bits: np.ndarray  # uint8 (H, W), values 0/1
    centers: np.ndarray  # int64 (N, 2) of (row, col), sorted row-major
    threshold_used: float
    edge_fraction: float
    ks: int
    kw: int

    @property
    def footprint_radius(self) -> int:
        return (self.ks - 1) // 2 + (self.kw - 1) // 2


def luminance_u8(img: ImageU8) -> np.ndarray:
    """Y = round(0.299 R + 0.587 G + 0.114 B) as uint8; identity on grayscale."""
    if img.channels == 1:
        return img.data[:, :, 0].copy()
    rgb = img.data.astype(np.float64)
    y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return np.rint(y).astype(np.uint8)


def laplacian(img: ImageU8) -> np.ndarray:
    """4-neighbor Laplacian of the luminance, replicate padding, int32.

    Responses lie in [-1020, 1020] (4*255 in either direction).
    """
    if img.height < 3 or img.width < 3:
        raise DimensionError(
            f"laplacian needs at least 3x3 pixels, got {img.height}x{img.width}"
        )
    y = luminance_u8(img).astype(np.int32)
    padded = np.pad(y, 1, mode="edge")
    return (
        padded[:-2, 1:-1]
        + padded[2:, 1:-1]
        + padded[1:-1, :-2]
        + padded[1:-1, 2:]
        - 4 * y
    )


def enumerate_centers(bits: np.ndarray, ks: int, kw: int) -> np.ndarray:
    """Row-major sorted (row, col) pairs of set bits with a full footprint."""
    h, w = bits.shape
    r = (ks - 1) // 2 + (kw - 1) // 2
    if h < 2 * r + 1 or w < 2 * r + 1:
        return np.zeros((0, 2), dtype=np.int64)
    interior = np.zeros_like(bits)
    interior[r : h - r, r : w - r] = bits[r : h - r, r : w - r]
    rows, cols = np.nonzero(interior)
    return np.column_stack([rows, cols]).astype(np.int64)


def compute_edge_mask(img: ImageU8, cfg) -> EdgeMask:
    """Threshold the absolute Laplacian response at cfg.t and list centers."""
    response = laplacian(img)
    bits = (np.abs(response) > cfg.t).astype(np.uint8)
    return with_bits(bits, cfg)


def with_bits(bits: np.ndarray, cfg, threshold_used: float | None = None) -> EdgeMask:
    """Build an EdgeMask from an explicit bit plane (centers re-enumerated)."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    h, w = bits.shape
    return EdgeMask(
        height=h,
        width=w,
        bits=bits,
        centers=enumerate_centers(bits, cfg.ks, cfg.kw),
        threshold_used=float(cfg.t if threshold_used is None else threshold_used),
        edge_fraction=float(np.count_nonzero(bits)) / (h * w) if h * w else 0.0,
        ks=cfg.ks,
        kw=cfg.kw,
    )


def load_mask(path) -> EdgeMask:
    mask = image_io.read_field(path)
    if not isinstance(mask, EdgeMask):
        raise SsgLossError(f"{path} does not contain a mask field")
    return mask


def mask_path_for(image_path) -> Path:
    return Path(image_path).with_suffix(".mask.ssgf")


def precompute_mask_dir(paths, cfg) -> list[tuple[str, str | None]]:
    """Compute and store one mask file beside each input image.

    Returns (path, error) per input, error=None on success. Failures do not
    stop the batch. Re-runs on unchanged inputs produce identical bytes.
    """
    results = []
    for p in paths:
        try:
            img = image_io.load_image(p)
            mask = compute_edge_mask(img, cfg)
            image_io.write_field(mask_path_for(p), mask)
            results.append((str(p), None))
        except SsgLossError as exc:
            results.append((str(p), str(exc)))
    return results
