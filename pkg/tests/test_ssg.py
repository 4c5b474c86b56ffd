import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ssgloss as sg
from conftest import force_single_center_mask
from reference import ref_offsets, ref_patch_distance, ref_ssg_weights
from ssgloss import synth
from ssgloss.errors import BoundsError, ConfigMismatch


class TestOffsets:
    def test_default_grid(self):
        cfg = sg.SsgConfig()  # ks=25, stride=3
        offsets = sg.sample_offsets(cfg)
        assert offsets.shape == (81, 2)
        as_tuples = {tuple(o) for o in offsets.tolist()}
        assert (0, 0) in as_tuples
        assert (-12, -12) in as_tuples and (12, 12) in as_tuples

    def test_three_by_three(self):
        offsets = sg.sample_offsets(sg.SsgConfig(ks=3, kw=3, stride=1))
        assert offsets.shape == (9, 2)
        assert {tuple(o) for o in offsets.tolist()} == {
            (r, c) for r in (-1, 0, 1) for c in (-1, 0, 1)
        }

    def test_degenerate_single(self):
        offsets = sg.sample_offsets(sg.SsgConfig(ks=1, kw=1, stride=1))
        assert offsets.tolist() == [[0, 0]]

    def test_row_major_order(self):
        offsets = sg.sample_offsets(sg.SsgConfig(ks=9, kw=3, stride=4))
        assert offsets.tolist() == [
            [-4, -4], [-4, 0], [-4, 4],
            [0, -4], [0, 0], [0, 4],
            [4, -4], [4, 0], [4, 4],
        ]

    @settings(deadline=None, max_examples=50)
    @given(st.integers(0, 15), st.integers(1, 7))
    def test_grid_properties(self, half, stride):
        ks = 2 * half + 1
        cfg = sg.SsgConfig(ks=ks, kw=1, stride=stride)
        offsets = sg.sample_offsets(cfg)
        as_tuples = [tuple(o) for o in offsets.tolist()]
        assert (0, 0) in as_tuples
        assert max(abs(v) for o in as_tuples for v in o) <= half
        side = 2 * (half // stride) + 1
        assert len(as_tuples) == side * side
        assert as_tuples == ref_offsets(ks, stride)


class TestPatchDistance:
    def test_identical_windows(self):
        img = synth.random_image(10, 10, 3, seed=0)
        assert sg.patch_distance(img, (4, 4), (4, 4), 3) == 0.0

    def test_constant_windows(self):
        data = np.zeros((8, 12, 1))
        data[:, :6] = 0.5
        data[:, 6:] = 0.3
        img = sg.image_from_array(data)
        d2 = sg.patch_distance(img, (3, 2), (3, 9), 3)
        assert d2 == pytest.approx(0.04, abs=1e-15)

    def test_matches_scalar_loops(self):
        img = synth.random_image(24, 24, 3, seed=1)
        rng = np.random.default_rng(2)
        for _ in range(10):
            p = tuple(rng.integers(4, 20, size=2))
            q = tuple(rng.integers(4, 20, size=2))
            got = sg.patch_distance(img, p, q, 9)
            want = ref_patch_distance(img.data, p, q, 9)
            assert got == pytest.approx(want, rel=1e-12)

    def test_symmetry(self):
        img = synth.random_image(16, 16, 1, seed=3)
        a = sg.patch_distance(img, (5, 6), (9, 8), 5)
        b = sg.patch_distance(img, (9, 8), (5, 6), 5)
        assert a == pytest.approx(b, rel=1e-15)

    def test_out_of_bounds(self):
        img = synth.random_image(10, 10, 1, seed=4)
        with pytest.raises(BoundsError):
            sg.patch_distance(img, (0, 5), (5, 5), 3)
        with pytest.raises(BoundsError):
            sg.patch_distance(img, (5, 5), (5, 9), 3)


class TestSimilarity:
    def test_exact_points(self):
        assert sg.similarity(0.0, 0.004) == 1.0
        assert sg.similarity(0.004, 0.004) == pytest.approx(math.exp(-1), rel=1e-12)
        assert sg.similarity(0.008, 0.004) == pytest.approx(math.exp(-2), rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            sg.similarity(-1e-9, 0.004)
        with pytest.raises(ValueError):
            sg.similarity(0.1, 0.0)

    @settings(deadline=None, max_examples=40)
    @given(st.floats(0, 50), st.floats(1e-6, 10))
    def test_range(self, d2, h):
        s = sg.similarity(d2, h)
        assert 0.0 <= s <= 1.0
        if d2 == 0.0:
            assert s == 1.0
        elif d2 / h > 1e-15:  # below that, exp(-x) rounds to 1
            assert s < 1.0


class TestOracle:
    def test_constant_image_uniform_weights(self):
        cfg = sg.SsgConfig()  # 81 offsets
        img = sg.image_from_array(np.full((40, 40, 3), 0.5))
        mask = force_single_center_mask(40, cfg)
        graph = sg.compute_ssg_oracle(img, mask, cfg)
        assert graph.weights.shape == (1, 81)
        assert np.all(graph.weights == 1.0 / 81.0)
        assert graph.norm_constants[0] == 81.0

    def test_empty_mask(self):
        cfg = sg.SsgConfig()
        img = synth.random_image(40, 40, 1, seed=5)
        mask = sg.compute_edge_mask(
            sg.image_u8_from_array(np.full((40, 40, 1), 9, dtype=np.uint8)), cfg
        )
        graph = sg.compute_ssg_oracle(img, mask, cfg)
        assert graph.n_centers == 0
        assert graph.weights.shape == (0, 81)

    def test_matches_straightline_transcription(self):
        cfg = sg.SsgConfig(ks=7, kw=3, stride=2, h=0.1)
        img = synth.random_image(18, 18, 3, seed=6)
        mask = sg.compute_edge_mask(sg.from_unit(img), cfg)
        assert mask.centers.shape[0] > 0
        graph = sg.compute_ssg_oracle(img, mask, cfg)
        want_w, want_n = ref_ssg_weights(
            img.data, [tuple(c) for c in mask.centers.tolist()],
            cfg.ks, cfg.kw, cfg.h, cfg.stride,
        )
        assert np.abs(graph.weights - want_w).max() < 1e-12
        assert np.abs(graph.norm_constants - want_n).max() < 1e-12

    def test_deterministic_bits(self):
        cfg = sg.SsgConfig(ks=9, kw=5, h=0.01)
        img = synth.random_image(30, 30, 3, seed=7)
        mask = sg.compute_edge_mask(sg.from_unit(img), cfg)
        a = sg.compute_ssg_oracle(img, mask, cfg)
        b = sg.compute_ssg_oracle(img, mask, cfg)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.norm_constants.tobytes() == b.norm_constants.tobytes()

    def test_config_mismatch(self):
        img = synth.random_image(40, 40, 1, seed=8)
        mask = sg.compute_edge_mask(sg.from_unit(img), sg.SsgConfig(ks=9, kw=5))
        with pytest.raises(ConfigMismatch):
            sg.compute_ssg_oracle(img, mask, sg.SsgConfig(ks=25, kw=9))
        mask2 = sg.compute_edge_mask(sg.from_unit(img), sg.SsgConfig())
        small = synth.random_image(39, 40, 1, seed=8)
        with pytest.raises(ConfigMismatch):
            sg.compute_ssg_oracle(small, mask2, sg.SsgConfig())


class TestSsgInvariants:
    def test_row_stochastic(self):
        for seed in range(6):
            cfg = sg.SsgConfig(ks=9, kw=5, h=[0.004, 0.05, 0.5][seed % 3])
            img = synth.random_image(28, 28, 3, seed=seed)
            mask = sg.compute_edge_mask(sg.from_unit(img), cfg)
            graph = sg.compute_ssg_oracle(img, mask, cfg)
            sums = graph.weights.sum(axis=1)
            assert np.abs(sums - 1.0).max() < 1e-6
            assert graph.weights.min() > 0.0
            assert graph.weights.max() <= 1.0
            assert (graph.norm_constants > 0).all()

    def test_self_weight_dominates(self):
        cfg = sg.SsgConfig(ks=9, kw=5, h=0.05)
        img = synth.random_image(30, 30, 3, seed=11)
        mask = sg.compute_edge_mask(sg.from_unit(img), cfg)
        graph = sg.compute_ssg_oracle(img, mask, cfg)
        self_idx = int(np.nonzero((graph.offsets == 0).all(axis=1))[0][0])
        for row in graph.weights:
            others = np.delete(row, self_idx)
            assert row[self_idx] > others.max()

    def test_intensity_shift_exact_for_dyadic_data(self):
        # intensities on a 1/256 grid plus a dyadic shift: differences are
        # exact, so the graph must be bit-identical
        cfg = sg.SsgConfig(ks=7, kw=3, stride=2, h=0.02)
        rng = np.random.default_rng(12)
        data = rng.integers(0, 128, size=(20, 20, 1)).astype(np.float64) / 256.0
        img = sg.image_from_array(data)
        shifted = sg.image_from_array(data + 0.25)
        mask = force_single_center_mask(20, cfg)
        a = sg.compute_ssg_oracle(img, mask, cfg)
        b = sg.compute_ssg_oracle(shifted, mask, cfg)
        assert a.weights.tobytes() == b.weights.tobytes()

    def test_intensity_shift_general(self):
        cfg = sg.SsgConfig(ks=7, kw=3, stride=2, h=0.02)
        img = synth.random_image(20, 20, 3, seed=13)
        shifted = sg.image_from_array(img.data + 0.173)
        mask = sg.compute_edge_mask(sg.from_unit(img), cfg)
        a = sg.compute_ssg_oracle(img, mask, cfg)
        b = sg.compute_ssg_oracle(shifted, mask, cfg)
        assert np.abs(a.weights - b.weights).max() < 1e-9

    def test_h_monotone_toward_uniform(self):
        img = synth.random_image(20, 20, 1, seed=14)
        mask = force_single_center_mask(20, sg.SsgConfig(ks=7, kw=3, stride=1, h=1.0))
        previous = None
        for h in (0.01, 0.05, 0.25, 1.25):
            cfg = sg.SsgConfig(ks=7, kw=3, stride=1, h=h)
            graph = sg.compute_ssg_oracle(img, mask, cfg)
            peak = graph.weights.max()
            if previous is not None:
                assert peak <= previous + 1e-12
            previous = peak


class TestConfig:
    def test_defaults_match_standard_values(self):
        cfg = sg.SsgConfig()
        assert (cfg.ks, cfg.kw, cfg.h, cfg.stride) == (25, 9, 0.004, 3)
        assert (cfg.t, cfg.alpha, cfg.beta) == (20.0, 1.0, 1000.0)
        assert cfg.eps_log == 1e-12
        dm = cfg.dm_mode()
        assert (dm.beta, dm.gamma) == (1.0, 0.1)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"ks": 24},
            {"kw": 8},
            {"kw": 27},
            {"stride": 0},
            {"h": 0.0},
            {"h": -1.0},
            {"eps_log": 0.0},
            {"alpha": -0.5},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            sg.SsgConfig(**kwargs)


class TestEstimateCost:
    def test_zero_centers(self):
        cfg = sg.SsgConfig()
        img = sg.image_u8_from_array(np.full((40, 40, 1), 50, dtype=np.uint8))
        mask = sg.compute_edge_mask(img, cfg)
        assert sg.estimate_cost(cfg, mask) == 0

    def test_single_center_default_cfg(self):
        cfg = sg.SsgConfig()
        mask = force_single_center_mask(40, cfg)
        assert sg.estimate_cost(cfg, mask, channels=3) == 81 * 3 * 81

    def test_linear_in_centers(self):
        cfg = sg.SsgConfig(ks=9, kw=5)
        img = sg.from_unit(synth.natural_image(40, 40, 3, seed=15, roughness=1.2))
        mask = sg.compute_edge_mask(img, cfg)
        n = mask.centers.shape[0]
        assert n > 1
        single = force_single_center_mask(40, cfg)
        assert sg.estimate_cost(cfg, mask) == n * sg.estimate_cost(cfg, single)

    def test_offset_count_scaling_at_stride_one(self):
        single13 = force_single_center_mask(60, sg.SsgConfig(ks=13, kw=9, stride=1))
        single25 = force_single_center_mask(60, sg.SsgConfig(ks=25, kw=9, stride=1))
        c13 = sg.estimate_cost(sg.SsgConfig(ks=13, kw=9, stride=1), single13)
        c25 = sg.estimate_cost(sg.SsgConfig(ks=25, kw=9, stride=1), single25)
        assert c25 / c13 == pytest.approx((25 / 13) ** 2, rel=1e-12)
