"""PGM reading/writing and rendering of segmented gray-level images."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "GRAY_LEVELS",
    "GrayImage",
    "PgmError",
    "read_pgm",
    "write_pgm",
    "load_pgm",
    "save_pgm",
    "render_segmentation",
]

GRAY_LEVELS = 256

_WHITESPACE = b" \t\n\r\v\f"


class PgmError(ValueError):
    """Malformed or unsupported PGM data; ``offset`` is the byte where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale raster.

    ``pixels`` is a read-only ``(height, width)`` uint8 array in row-major order.
    """

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, copy=True)
        if px.ndim == 1:
            if px.size != self.width * self.height:
                raise ValueError(
                    f"pixel count {px.size} != width*height {self.width * self.height}"
                )
            px = px.reshape(self.height, self.width)
        if px.shape != (self.height, self.width):
            raise ValueError(f"pixel array shape {px.shape} != ({self.height}, {self.width})")
        if px.size and (px.min() < 0 or px.max() > GRAY_LEVELS - 1):
            raise ValueError("pixel values must lie in [0, 255]")
        px = px.astype(np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)

    @property
    def size(self) -> int:
        return self.width * self.height

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


class _Cursor:
    """Token reader over a PGM header; skips whitespace and ``#`` comments."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos : self.pos + 1]
            if c in _WHITESPACE and c:
                self.pos += 1
            elif c == b"#":
                while self.pos < n and data[self.pos] not in (0x0A, 0x0D):
                    self.pos += 1
            else:
                break

    def token(self, what: str) -> tuple[bytes, int]:
        self.skip_space()
        start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n and data[self.pos : self.pos + 1] not in _WHITESPACE and data[self.pos] != 0x23:
            self.pos += 1
        if self.pos == start:
            raise PgmError(f"unexpected end of data while reading {what}", start)
        return data[start : self.pos], start

    def integer(self, what: str) -> int:
        tok, start = self.token(what)
        if not tok.isdigit():
            raise PgmError(f"invalid {what} {tok[:16]!r}", start)
        return int(tok)


def read_pgm(data: bytes) -> GrayImage:
    """Parse a binary (P5) or ASCII (P2) PGM byte string.

    Values are taken verbatim: files with maxval below 255 are not rescaled.

    Raises
    ------
    PgmError
        Bad magic number, maxval outside ``1..255``, empty raster, pixel values
        above maxval, or truncated pixel data.
    """
    data = bytes(data)
    if len(data) < 2 or data[:2] not in (b"P5", b"P2"):
        raise PgmError(f"bad magic number {data[:2]!r}, expected P5 or P2", 0)
    binary = data[:2] == b"P5"
    cur = _Cursor(data)
    cur.pos = 2
    if cur.pos < len(data) and data[cur.pos : cur.pos + 1] not in _WHITESPACE and data[cur.pos] != 0x23:
        raise PgmError("bad magic number", 0)
    width = cur.integer("width")
    height = cur.integer("height")
    maxval_pos = cur.pos
    maxval = cur.integer("maxval")
    if maxval > 255:
        raise PgmError(f"maxval exceeds 255 (got {maxval})", maxval_pos)
    if maxval == 0:
        raise PgmError("maxval must be positive", maxval_pos)
    if width == 0 or height == 0:
        raise PgmError(f"empty {width}x{height} image", maxval_pos)
    count = width * height

    if binary:
        # exactly one whitespace byte separates the header from the raster
        if cur.pos >= len(data) or data[cur.pos : cur.pos + 1] not in _WHITESPACE:
            raise PgmError("missing whitespace after maxval", cur.pos)
        start = cur.pos + 1
        raster = data[start : start + count]
        if len(raster) < count:
            raise PgmError(
                f"truncated pixel data: need {count} bytes, found {len(raster)}",
                start + len(raster),
            )
        pixels = np.frombuffer(raster, dtype=np.uint8)
        if maxval < 255 and pixels.max() > maxval:
            bad = int(np.argmax(pixels > maxval))
            raise PgmError(f"pixel value {pixels[bad]} exceeds maxval {maxval}", start + bad)
    else:
        pixels = np.empty(count, dtype=np.uint8)
        for i in range(count):
            try:
                tok, at = cur.token("pixel value")
            except PgmError as exc:
                raise PgmError(
                    f"truncated pixel data: need {count} values, found {i}", exc.offset
                ) from None
            if not tok.isdigit():
                raise PgmError(f"invalid pixel value {tok[:16]!r}", at)
            v = int(tok)
            if v > maxval:
                raise PgmError(f"pixel value {v} exceeds maxval {maxval}", at)
            pixels[i] = v
    return GrayImage(width=width, height=height, pixels=pixels)


def write_pgm(img: GrayImage) -> bytes:
    """Serialize to binary P5 with header ``P5\\n<w> <h>\\n255\\n``."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.pixels, dtype=np.uint8).tobytes()


def load_pgm(path) -> GrayImage:
    return read_pgm(Path(path).read_bytes())


def save_pgm(img: GrayImage, path) -> None:
    Path(path).write_bytes(write_pgm(img))


def render_segmentation(
    img: GrayImage, thresholds: Sequence[int], labels: Sequence[int]
) -> GrayImage:
    """Map each pixel to the output level of its class.

    A pixel ``p`` belongs to class ``c`` = number of thresholds ``<= p``, so a
    pixel equal to a threshold goes to the upper class.
    """
    thr = np.asarray(thresholds, dtype=np.int64).reshape(-1)
    lab = np.asarray(labels, dtype=np.int64).reshape(-1)
    if thr.size > 1 and np.any(np.diff(thr) <= 0):
        raise ValueError(f"thresholds must be strictly ascending, got {thr.tolist()}")
    if lab.size != thr.size + 1:
        raise ValueError(f"need {thr.size + 1} labels for {thr.size} thresholds, got {lab.size}")
    if lab.size and (lab.min() < 0 or lab.max() > GRAY_LEVELS - 1):
        raise ValueError("labels must be gray levels in [0, 255]")
    classes = np.searchsorted(thr, img.pixels, side="right")
    return GrayImage(width=img.width, height=img.height, pixels=lab[classes].astype(np.uint8))
