"""Synthetic test images with controllable statistics.

Used by the benchmark harness, the optimizer demo, and the test suite;
everything is deterministic under a seed.
"""

from __future__ import annotations

import numpy as np

from .image_io import Image, image_from_array


def natural_image(height: int, width: int, channels: int = 3, seed: int = 0,
                  roughness: float = 1.8) -> Image:
    """Power-law-spectrum noise, the usual stand-in for photo statistics.

    White noise is shaped in the frequency domain by 1/(|f| + f0)^roughness;
    the default yields large smooth regions crossed by soft edges, with
    Laplacian edge fractions in the range typical of photographs (~5-15%
    at the standard threshold). Lower roughness gives busier images.
    """
    rng = np.random.default_rng(seed)
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    radius = np.hypot(fy, fx)
    shaping = 1.0 / (radius + 1.5 / max(height, width)) ** roughness
    data = np.empty((height, width, channels), dtype=np.float64)
    base = None
    for ch in range(channels):
        spectrum = np.fft.fft2(rng.standard_normal((height, width)))
        plane = np.real(np.fft.ifft2(spectrum * shaping))
        if base is None:
            base = plane
        else:
            # correlate channels so the result looks like one scene, not
            # three independent noise fields
            plane = 0.8 * base + 0.2 * plane
        lo, hi = plane.min(), plane.max()
        data[:, :, ch] = (plane - lo) / (hi - lo) if hi > lo else 0.5
    return image_from_array(data)


def stripe_image(
    height: int,
    width: int,
    channels: int = 1,
    period: int = 8,
    lo: float = 0.15,
    hi: float = 0.85,
) -> Image:
    """Vertical square-wave stripes: hard edges every period/2 columns."""
    if period < 2:
        raise ValueError("period must be >= 2")
    cols = (np.arange(width) % period) < (period // 2)
    row = np.where(cols, hi, lo)
    data = np.repeat(row[None, :], height, axis=0)
    return image_from_array(np.repeat(data[:, :, None], channels, axis=2))


def add_uniform_noise(img: Image, amplitude: float, seed: int = 0) -> Image:
    """img + U(-amplitude, amplitude) per sample, clipped back to [0,1]."""
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, size=img.data.shape)
    return image_from_array(np.clip(img.data + noise, 0.0, 1.0))


def random_image(height: int, width: int, channels: int = 1, seed: int = 0) -> Image:
    """Unstructured uniform noise in [0,1]."""
    rng = np.random.default_rng(seed)
    return image_from_array(rng.random((height, width, channels)))
