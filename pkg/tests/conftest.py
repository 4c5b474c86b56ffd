import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import ssgloss as sg
from ssgloss import synth

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile every jitted path once so runtime-budget tests measure the
    algorithms, not the compiler."""
    cfg = sg.SsgConfig(ks=5, kw=3, stride=1, h=0.25)
    img = synth.random_image(14, 14, 1, seed=0)
    sr = synth.random_image(14, 14, 1, seed=1)
    mask = sg.compute_edge_mask(sg.from_unit(img), cfg)
    sg.compute_ssg_oracle(img, mask, cfg)
    for mode in ("direct", "offset-map"):
        plan = sg.KernelPlan(mode=mode)
        sg.compute_ssg_fast(img, mask, cfg, plan)
        sg.ssl_backward_fast(img, sr, mask, cfg, plan)
    plan = sg.KernelPlan(mode="direct", precompute_sq=False)
    sg.compute_ssg_fast(img, mask, cfg, plan)
    sg.ssl_backward(img, sr, mask, cfg)


@pytest.fixture
def small_cfg():
    return sg.SsgConfig(ks=5, kw=3, stride=1, h=0.25)


def make_instance(size, channels, seed, cfg, kind="random"):
    """(hr, sr, mask) with sr a noisy copy of hr."""
    if kind == "random":
        hr = synth.random_image(size, size, channels, seed=seed)
    else:
        hr = synth.natural_image(size, size, channels, seed=seed)
    sr = synth.add_uniform_noise(hr, 0.08, seed=seed + 9999)
    mask = sg.compute_edge_mask(sg.from_unit(hr), cfg)
    return hr, sr, mask


def force_single_center_mask(size, cfg):
    """A mask whose only set bit is the image center (footprint permitting)."""
    bits = np.zeros((size, size), dtype=np.uint8)
    bits[size // 2, size // 2] = 1
    from ssgloss.edge_mask import with_bits

    return with_bits(bits, cfg)
