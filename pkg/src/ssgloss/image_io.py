"""Image and field-file I/O.

Two pixel scales coexist in this package: masking runs on native 8-bit
intensities (``ImageU8``) while all similarity math runs on unit-interval
floats (``Image``). ``to_unit``/``from_unit`` convert between them.

Binary field files (gradients, self-similarity graphs, edge masks) share one
container: magic ``SSGF``, a little-endian u32 format version, a u32 JSON
header length, the JSON header, then the payload. Payloads are little-endian
f32 for gradients and SSG weights, one byte per pixel (0/1) for masks.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError

FIELD_MAGIC = b"SSGF"
FIELD_VERSION = 1


@dataclass(eq=False)
class ImageU8:
    """Decoded 8-bit image, row-major, channel-interleaved."""

    height: int
    width: int
    channels: int
    data: np.ndarray  # uint8, shape (height, width, channels)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"{(self.height, self.width, self.channels)}"
            )


@dataclass(eq=False)
class Image:
    """Unit-interval image, row-major, channel-interleaved float64."""

    height: int
    width: int
    channels: int
    data: np.ndarray  # float64, shape (height, width, channels)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"{(self.height, self.width, self.channels)}"
            )


def image_u8_from_array(arr) -> ImageU8:
    """Wrap a (H,W), (H,W,1) or (H,W,3) uint8-compatible array."""
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (H,W), (H,W,1) or (H,W,3) array, got {arr.shape}")
    return ImageU8(arr.shape[0], arr.shape[1], arr.shape[2], arr.astype(np.uint8))


def image_from_array(arr) -> Image:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (H,W), (H,W,1) or (H,W,3) array, got {arr.shape}")
    return Image(arr.shape[0], arr.shape[1], arr.shape[2], arr)


def to_unit(img: ImageU8) -> Image:
    """Map 8-bit intensities to [0,1] by dividing by 255."""
    return Image(img.height, img.width, img.channels, img.data.astype(np.float64) / 255.0)


def from_unit(img: Image) -> ImageU8:
    """Round unit-interval intensities back to 8-bit (inverse of to_unit)."""
    data = np.rint(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    return ImageU8(img.height, img.width, img.channels, data)


# ---------------------------------------------------------------------------
# image decoding / encoding
# ---------------------------------------------------------------------------

_PNM_GRAY = {b"P2", b"P5"}
_PNM_COLOR = {b"P3", b"P6"}


def load_image(path) -> ImageU8:
    """Decode an 8-bit PNG, PGM or PPM file.

    Grayscale files yield ``channels=1``, color files ``channels=3``. Any
    other bit depth or channel layout raises FormatError; unreadable files
    raise IoError.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw[:2] in _PNM_GRAY | _PNM_COLOR:
        return _decode_pnm(raw, path)
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return _decode_png(path)
    raise FormatError(f"{path}: not a PNG, PGM or PPM file")


def _decode_png(path: Path) -> ImageU8:
    from PIL import Image as PilImage

    try:
        with PilImage.open(path) as pil:
            pil.load()
            mode = pil.mode
            if mode == "P":
                pil = pil.convert("RGB")
                mode = "RGB"
            if mode not in ("L", "RGB"):
                raise FormatError(
                    f"{path}: unsupported PNG mode {mode!r} (only 8-bit grayscale/RGB)"
                )
            arr = np.asarray(pil, dtype=np.uint8)
    except FormatError:
        raise
    except OSError as exc:
        raise FormatError(f"{path}: corrupt PNG ({exc})") from exc
    return image_u8_from_array(arr)


def _decode_pnm(raw: bytes, path: Path) -> ImageU8:
    magic = raw[:2]
    channels = 1 if magic in _PNM_GRAY else 3
    ascii_body = magic in (b"P2", b"P3")

    # Header tokens, skipping '#' comments. The pixel data starts after the
    # single whitespace byte that follows the maxval token.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PNM header")
        tokens.append(raw[start:pos])
    pos += 1  # the whitespace byte terminating the maxval token

    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PNM header") from exc
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: bad PNM dimensions {width}x{height}")
    if maxval > 255:
        raise FormatError(f"{path}: {maxval}-level PNM not supported (8-bit only)")
    if maxval <= 0:
        raise FormatError(f"{path}: bad PNM maxval {maxval}")

    count = width * height * channels
    if ascii_body:
        values = raw[pos:].split()
        if len(values) < count:
            raise FormatError(f"{path}: truncated PNM pixel data")
        try:
            flat = np.array([int(v) for v in values[:count]], dtype=np.int64)
        except ValueError as exc:
            raise FormatError(f"{path}: bad ASCII PNM payload") from exc
        if flat.min() < 0 or flat.max() > maxval:
            raise FormatError(f"{path}: PNM sample out of range")
        flat = flat.astype(np.uint8)
    else:
        body = raw[pos : pos + count]
        if len(body) < count:
            raise FormatError(f"{path}: truncated PNM pixel data")
        flat = np.frombuffer(body, dtype=np.uint8).copy()
    return ImageU8(height, width, channels, flat.reshape(height, width, channels))


def save_image(path, img: ImageU8) -> None:
    """Encode to PNG, PGM or PPM according to the file extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        from PIL import Image as PilImage

        arr = img.data[:, :, 0] if img.channels == 1 else img.data
        try:
            PilImage.fromarray(arr).save(path, format="PNG")
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
        return
    if suffix in (".pgm", ".ppm"):
        if suffix == ".pgm" and img.channels != 1:
            raise ValueError("PGM requires a single-channel image")
        if suffix == ".ppm" and img.channels != 3:
            raise ValueError("PPM requires a three-channel image")
        magic = b"P5" if img.channels == 1 else b"P6"
        header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
        try:
            path.write_bytes(header + img.data.tobytes())
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
        return
    raise ValueError(f"unsupported output extension {suffix!r} (png/pgm/ppm)")


# ---------------------------------------------------------------------------
# flat-binary field files
# ---------------------------------------------------------------------------


def write_field(path, field) -> None:
    """Serialize a GradientField, Ssg or EdgeMask; round-trips bit-exactly."""
    from .edge_mask import EdgeMask
    from .loss import GradientField
    from .ssg import Ssg

    if isinstance(field, GradientField):
        header = {"kind": "grad", "h": field.height, "w": field.width, "c": field.channels}
        payload = field.data.astype("<f4", copy=False).tobytes()
    elif isinstance(field, EdgeMask):
        header = {
            "kind": "mask",
            "h": field.height,
            "w": field.width,
            "c": 1,
            "t": field.threshold_used,
            "Ks": field.ks,
            "Kw": field.kw,
            "edge_fraction": field.edge_fraction,
        }
        payload = field.bits.astype(np.uint8, copy=False).tobytes()
    elif isinstance(field, Ssg):
        # "h" carries the similarity scale here, not an image height: an SSG
        # has no pixel grid of its own and the scale is needed to rebuild it.
        header = {
            "kind": "ssg",
            "h": field.h,
            "w": 0,
            "c": 0,
            "Ks": field.ks,
            "Kw": field.kw,
            "stride": field.stride,
            "n_centers": int(field.centers.shape[0]),
            "n_offsets": int(field.offsets.shape[0]),
            "eps": [float(x) for x in field.norm_constants],
        }
        payload = field.centers.astype("<u4", copy=False).tobytes() + field.weights.astype(
            "<f4", copy=False
        ).tobytes()
    else:
        raise TypeError(f"cannot serialize {type(field).__name__}")

    blob = json.dumps(header).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(FIELD_MAGIC)
            fh.write(struct.pack("<II", FIELD_VERSION, len(blob)))
            fh.write(blob)
            fh.write(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_field(path):
    """Inverse of write_field. Returns the type encoded in the header."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw[:4] != FIELD_MAGIC:
        raise FormatError(f"{path}: not a field file (bad magic)")
    version, hlen = struct.unpack_from("<II", raw, 4)
    if version != FIELD_VERSION:
        raise FormatError(f"{path}: unsupported field version {version}")
    try:
        header = json.loads(raw[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt field header") from exc
    payload = raw[12 + hlen :]
    kind = header.get("kind")

    try:
        return _decode_field(path, header, payload, kind)
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: corrupt {kind!r} field ({exc})") from exc


def _decode_field(path, header, payload, kind):
    from .edge_mask import EdgeMask, enumerate_centers
    from .loss import GradientField
    from .ssg import Ssg, sample_offset_grid

    if kind == "grad":
        h, w, c = header["h"], header["w"], header["c"]
        data = np.frombuffer(payload, dtype="<f4", count=h * w * c).reshape(h, w, c)
        return GradientField(h, w, c, data.copy())
    if kind == "mask":
        h, w = header["h"], header["w"]
        bits = np.frombuffer(payload, dtype=np.uint8, count=h * w).reshape(h, w).copy()
        ks, kw = int(header["Ks"]), int(header["Kw"])
        return EdgeMask(
            height=h,
            width=w,
            bits=bits,
            centers=enumerate_centers(bits, ks, kw),
            threshold_used=float(header["t"]),
            edge_fraction=float(header["edge_fraction"]),
            ks=ks,
            kw=kw,
        )
    if kind == "ssg":
        n_centers = int(header["n_centers"])
        n_offsets = int(header["n_offsets"])
        centers = (
            np.frombuffer(payload, dtype="<u4", count=2 * n_centers)
            .reshape(n_centers, 2)
            .astype(np.int64)
        )
        weights = np.frombuffer(
            payload, dtype="<f4", offset=8 * n_centers, count=n_centers * n_offsets
        ).reshape(n_centers, n_offsets)
        return Ssg(
            centers=centers,
            offsets=sample_offset_grid(int(header["Ks"]), int(header["stride"])),
            weights=weights.astype(np.float64),
            norm_constants=np.array(header["eps"], dtype=np.float64),
            ks=int(header["Ks"]),
            kw=int(header["Kw"]),
            h=float(header["h"]),
            stride=int(header["stride"]),
        )
    raise FormatError(f"{path}: unknown field kind {kind!r}")
