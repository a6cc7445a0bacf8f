"""Normalized gray-level histograms: from images, from mixtures, and as CSV."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gmm import Mixture, mixture_pdf
from .imageio import GRAY_LEVELS, GrayImage

__all__ = [
    "NormalizedHistogram",
    "compute_histogram",
    "synth_histogram",
    "histogram_to_csv",
    "histogram_from_csv",
    "read_histogram_csv",
    "write_histogram_csv",
]


@dataclass(frozen=True, eq=False)
class NormalizedHistogram:
    """256 gray-level probabilities summing to one.

    ``total_pixels`` is the pixel count the histogram was built from, 0 for
    synthetic histograms.
    """

    bins: np.ndarray
    total_pixels: int = 0

    def __post_init__(self):
        b = np.array(self.bins, dtype=float).reshape(-1)
        if b.size != GRAY_LEVELS:
            raise ValueError(f"histogram needs {GRAY_LEVELS} bins, got {b.size}")
        if not np.all(np.isfinite(b)) or np.any(b < 0):
            raise ValueError("histogram bins must be finite and non-negative")
        if abs(b.sum() - 1.0) > 1e-9:
            raise ValueError(f"histogram bins sum to {b.sum()!r}, expected 1")
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    def __eq__(self, other):
        if not isinstance(other, NormalizedHistogram):
            return NotImplemented
        return self.total_pixels == other.total_pixels and np.array_equal(self.bins, other.bins)

    __hash__ = None

    def occupied_levels(self) -> int:
        return int(np.count_nonzero(self.bins))

    def mean(self) -> float:
        return float(np.dot(np.arange(GRAY_LEVELS), self.bins))


def compute_histogram(img: GrayImage) -> NormalizedHistogram:
    """``h(g) = n_g / N`` over the image's pixels."""
    n = img.size
    if n == 0:
        raise ValueError("cannot build a histogram of an empty image")
    counts = np.bincount(img.pixels.reshape(-1), minlength=GRAY_LEVELS)
    return NormalizedHistogram(counts / n, total_pixels=n)


def synth_histogram(mix: Mixture) -> NormalizedHistogram:
    """Mixture density sampled at gray levels 0..255, rescaled to unit mass.

    Mass that falls outside the gray range is dropped by the rescaling.
    """
    vals = mixture_pdf(mix, np.arange(GRAY_LEVELS))
    total = vals.sum()
    if not total > 0:
        raise ValueError("mixture has no mass on the gray range")
    return NormalizedHistogram(vals / total, total_pixels=0)


def histogram_to_csv(hist: NormalizedHistogram) -> str:
    buf = io.StringIO()
    buf.write("gray,h\n")
    for g, v in enumerate(hist.bins):
        buf.write(f"{g},{float(v)!r}\n")
    return buf.getvalue()


def histogram_from_csv(text: str) -> NormalizedHistogram:
    """Parse a ``gray,h`` CSV with one row per gray level.

    Raw counts are accepted too: values are rescaled when they do not already
    sum to one.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["gray", "h"]:
        raise ValueError(f"expected header 'gray,h', got {header!r}")
    vals = np.full(GRAY_LEVELS, np.nan)
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise ValueError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            g, v = int(row[0]), float(row[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric field in {row!r}") from None
        if not 0 <= g < GRAY_LEVELS:
            raise ValueError(f"line {lineno}: gray level {g} out of range")
        if not np.isnan(vals[g]):
            raise ValueError(f"line {lineno}: duplicate gray level {g}")
        vals[g] = v
    if np.isnan(vals).any():
        missing = np.nonzero(np.isnan(vals))[0]
        raise ValueError(f"missing gray levels, first is {int(missing[0])}")
    total = vals.sum()
    if total <= 0:
        raise ValueError("histogram has no mass")
    if abs(total - 1.0) > 1e-12:
        vals = vals / total
    return NormalizedHistogram(vals)


def read_histogram_csv(path) -> NormalizedHistogram:
    return histogram_from_csv(Path(path).read_text())


def write_histogram_csv(hist: NormalizedHistogram, path) -> None:
    Path(path).write_text(histogram_to_csv(hist))
