import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ssgloss as sg
from ssgloss.errors import FormatError, IoError


def test_load_pgm_binary(tmp_path):
    path = tmp_path / "tiny.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
    img = sg.load_image(path)
    assert (img.height, img.width, img.channels) == (2, 2, 1)
    assert img.data.ravel().tolist() == [0, 128, 255, 64]


def test_load_ppm_single_pixel(tmp_path):
    path = tmp_path / "dot.ppm"
    path.write_bytes(b"P6\n1 1\n255\n" + bytes([10, 20, 30]))
    img = sg.load_image(path)
    assert (img.height, img.width, img.channels) == (1, 1, 3)
    assert img.data.ravel().tolist() == [10, 20, 30]


def test_load_pgm_ascii_with_comment(tmp_path):
    path = tmp_path / "ascii.pgm"
    path.write_bytes(b"P2\n# a comment\n3 1\n255\n7 0 200\n")
    img = sg.load_image(path)
    assert img.data.ravel().tolist() == [7, 0, 200]


def test_pnm_16bit_rejected(tmp_path):
    path = tmp_path / "deep.pgm"
    path.write_bytes(b"P5\n1 1\n65535\n\x00\x01")
    with pytest.raises(FormatError):
        sg.load_image(path)


def test_png_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.integers(0, 256, size=(9, 7, 3), dtype=np.uint8)
    path = tmp_path / "x.png"
    sg.save_image(path, sg.image_u8_from_array(arr))
    back = sg.load_image(path)
    assert np.array_equal(back.data, arr)


def test_png_16bit_rejected(tmp_path):
    from PIL import Image as PilImage

    pil = PilImage.new("I;16", (4, 3))
    pil.putdata([v * 1000 for v in range(12)])
    path = tmp_path / "deep.png"
    pil.save(path)
    with pytest.raises(FormatError):
        sg.load_image(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        sg.load_image(tmp_path / "nope.png")


def test_garbage_rejected(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"this is not an image at all")
    with pytest.raises(FormatError):
        sg.load_image(path)


def test_truncated_pgm_rejected(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n4 4\n255\n\x00\x01")
    with pytest.raises(FormatError):
        sg.load_image(path)


def test_to_unit_values():
    img = sg.image_u8_from_array(np.array([[[0], [255], [128]]], dtype=np.uint8))
    unit = sg.to_unit(img)
    assert unit.data.ravel().tolist() == [0.0, 1.0, 128 / 255]


def test_to_unit_empty():
    img = sg.ImageU8(0, 0, 1, np.zeros((0, 0, 1), dtype=np.uint8))
    unit = sg.to_unit(img)
    assert unit.data.size == 0


def test_unit_roundtrip_all_bytes():
    # every 8-bit value must survive to_unit -> scale by 255 -> round
    arr = np.arange(256, dtype=np.uint8).reshape(16, 16, 1)
    img = sg.image_u8_from_array(arr)
    back = sg.from_unit(sg.to_unit(img))
    assert np.array_equal(back.data, arr)


@settings(deadline=None, max_examples=30)
@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3]), st.integers(0, 2**31))
def test_unit_roundtrip_random(h, w, c, seed):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, size=(h, w, c), dtype=np.uint8)
    back = sg.from_unit(sg.to_unit(sg.image_u8_from_array(arr)))
    assert np.array_equal(back.data, arr)


def test_gradient_field_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    field = sg.GradientField(4, 4, 3, rng.standard_normal((4, 4, 3)).astype(np.float32))
    path = tmp_path / "g.ssgf"
    sg.write_field(path, field)
    back = sg.read_field(path)
    assert isinstance(back, sg.GradientField)
    assert back.data.tobytes() == field.data.tobytes()
    assert (back.height, back.width, back.channels) == (4, 4, 3)


def test_field_file_bytes_stable(tmp_path):
    rng = np.random.default_rng(4)
    field = sg.GradientField(3, 5, 1, rng.standard_normal((3, 5, 1)).astype(np.float32))
    a, b = tmp_path / "a.ssgf", tmp_path / "b.ssgf"
    sg.write_field(a, field)
    sg.write_field(b, sg.read_field(a))
    assert a.read_bytes() == b.read_bytes()


def test_empty_mask_roundtrip(tmp_path):
    cfg = sg.SsgConfig()
    mask = sg.compute_edge_mask(
        sg.image_u8_from_array(np.full((40, 40, 1), 128, dtype=np.uint8)), cfg
    )
    assert mask.edge_fraction == 0.0
    path = tmp_path / "m.ssgf"
    sg.write_field(path, mask)
    back = sg.read_field(path)
    assert np.array_equal(back.bits, mask.bits)
    assert back.centers.shape == (0, 2)
    assert back.threshold_used == mask.threshold_used
    assert back.edge_fraction == mask.edge_fraction
    assert (back.ks, back.kw) == (mask.ks, mask.kw)


def test_mask_roundtrip_bitexact(tmp_path):
    from ssgloss import synth

    cfg = sg.SsgConfig(ks=9, kw=5)
    img = sg.from_unit(synth.natural_image(32, 32, 1, seed=5))
    mask = sg.compute_edge_mask(img, cfg)
    path = tmp_path / "m.ssgf"
    sg.write_field(path, mask)
    back = sg.read_field(path)
    assert np.array_equal(back.bits, mask.bits)
    assert np.array_equal(back.centers, mask.centers)
    assert back.edge_fraction == mask.edge_fraction


def test_ssg_roundtrip(tmp_path):
    from ssgloss import synth

    cfg = sg.SsgConfig(ks=5, kw=3, stride=1, h=0.3)
    img = synth.random_image(14, 14, 1, seed=6)
    mask = sg.compute_edge_mask(sg.from_unit(img), cfg)
    graph = sg.compute_ssg_oracle(img, mask, cfg)
    path = tmp_path / "s.ssgf"
    sg.write_field(path, graph)
    back = sg.read_field(path)
    assert np.array_equal(back.centers, graph.centers)
    assert np.array_equal(back.offsets, graph.offsets)
    # weights cross the f32 payload; norm constants ride the JSON header exactly
    assert np.array_equal(back.weights, graph.weights.astype(np.float32).astype(np.float64))
    assert np.array_equal(back.norm_constants, graph.norm_constants)
    assert (back.ks, back.kw, back.h, back.stride) == (cfg.ks, cfg.kw, cfg.h, cfg.stride)


def test_write_to_unwritable_path_is_io_error():
    field = sg.GradientField(1, 1, 1, np.zeros((1, 1, 1), dtype=np.float32))
    with pytest.raises(IoError):
        sg.write_field("/nonexistent-dir/x.ssgf", field)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ssgf"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(FormatError):
        sg.read_field(path)


def test_save_pgm_deterministic(tmp_path):
    arr = np.arange(12, dtype=np.uint8).reshape(3, 4, 1)
    p1, p2 = tmp_path / "a.pgm", tmp_path / "b.pgm"
    sg.save_image(p1, sg.image_u8_from_array(arr))
    sg.save_image(p2, sg.image_u8_from_array(arr))
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(sg.load_image(p1).data, arr)
