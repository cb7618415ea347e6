"""Shannon entropy of depth views, the 5x12 spherical entropy map, peak selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .render import DepthImage
from .viewrig import N_AZIMUTHS, N_RINGS, N_VIEWS

MAX_ENTROPY_BITS = 8.0  # 8-bit code alphabet

#: (drow, dcol) offsets of the 8-neighborhood.
_NEIGHBOR_OFFSETS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def image_entropy(image: DepthImage) -> float:
    """Shannon entropy in bits of the image's 256-code histogram.

    Background (code 0) participates like any other code, so the
    silhouette/background ratio contributes information.
    """
    counts = np.bincount(image.pixels.ravel(), minlength=256)
    p = counts[counts > 0] / image.pixels.size
    return float(-(p * np.log2(p)).sum() + 0.0)


@dataclass(frozen=True)
class EntropyMap:
    """Per-viewpoint entropy in bits on the 5x12 (ring, azimuth) grid."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != (N_RINGS, N_AZIMUTHS):
            raise ValueError(f"entropy map must be {N_RINGS}x{N_AZIMUTHS}, got {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("entropy map contains non-finite values")
        if (values < 0.0).any() or (values > MAX_ENTROPY_BITS + 1e-9).any():
            raise ValueError(f"entropy values must lie in [0, {MAX_ENTROPY_BITS}] bits")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Peak:
    """A local maximum of the entropy map."""

    ring: int
    azimuth: int
    value: float


def entropy_map_from_views(images: list[DepthImage]) -> EntropyMap:
    """Entropy map from the 60 depth views ordered by view index."""
    if len(images) != N_VIEWS:
        raise ValueError(f"expected {N_VIEWS} images, got {len(images)}")
    values = np.array([image_entropy(img) for img in images]).reshape(N_RINGS, N_AZIMUTHS)
    return EntropyMap(values)


def _neighbors(ring: int, azimuth: int):
    """8-neighborhood with azimuth wrap-around and clamped rings."""
    for dr, dc in _NEIGHBOR_OFFSETS:
        r = ring + dr
        if 0 <= r < N_RINGS:
            yield r, (azimuth + dc) % N_AZIMUTHS


def _plateau(values: np.ndarray, ring: int, azimuth: int) -> set[tuple[int, int]]:
    """Connected component of equal-valued cells containing (ring, azimuth)."""
    v = values[ring, azimuth]
    seen = {(ring, azimuth)}
    frontier = [(ring, azimuth)]
    while frontier:
        r, c = frontier.pop()
        for nr, nc in _neighbors(r, c):
            if (nr, nc) not in seen and values[nr, nc] == v:
                seen.add((nr, nc))
                frontier.append((nr, nc))
    return seen


def find_peaks(emap: EntropyMap) -> list[Peak]:
    """Local maxima of the map, sorted by value descending.

    A cell is a peak iff it is >= all 8 neighbors (azimuth wraps, rings
    clamp), it is the lexicographically smallest cell of its equal-valued
    plateau, and the plateau rises strictly above at least one adjacent cell.
    A constant map degenerates to the single peak (0, 0). Value ties are
    ordered by (ring, azimuth).
    """
    values = emap.values
    constant = bool((values == values[0, 0]).all())
    if constant:
        return [Peak(0, 0, float(values[0, 0]))]

    # candidate mask: cell >= its 8 neighbors, computed by shifted comparisons
    shifted_max = np.full_like(values, -np.inf)
    for dr, dc in _NEIGHBOR_OFFSETS:
        rolled = np.roll(values, -dc, axis=1)
        if dr == 0:
            neighbor = rolled
        else:
            neighbor = np.full_like(values, -np.inf)
            if dr == -1:
                neighbor[1:, :] = rolled[:-1, :]
            else:
                neighbor[:-1, :] = rolled[1:, :]
        shifted_max = np.maximum(shifted_max, neighbor)
    candidates = values >= shifted_max

    peaks = []
    claimed: set[tuple[int, int]] = set()
    for ring in range(N_RINGS):
        for azimuth in range(N_AZIMUTHS):
            if not candidates[ring, azimuth] or (ring, azimuth) in claimed:
                continue
            plateau = _plateau(values, ring, azimuth)
            if min(plateau) != (ring, azimuth):
                continue
            claimed |= plateau
            v = values[ring, azimuth]
            rises = any(
                values[nr, nc] < v
                for r, c in plateau
                for nr, nc in _neighbors(r, c)
                if (nr, nc) not in plateau
            )
            if rises:
                peaks.append(Peak(ring, azimuth, float(v)))

    peaks.sort(key=lambda p: (-p.value, p.ring, p.azimuth))
    return peaks


def top_n_views(emap: EntropyMap, n: int) -> list[Peak]:
    """The first min(n, peak count) peaks; never padded.

    Raises:
        ValueError: n < 1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return find_peaks(emap)[:n]


def write_map_csv(emap: EntropyMap, path: str | Path) -> None:
    """5 rows x 12 columns, full decimal precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in emap.values:
            writer.writerow([repr(float(v)) for v in row])


def read_map_csv(path: str | Path) -> EntropyMap:
    with open(path, newline="") as fh:
        rows = [[float(tok) for tok in row] for row in csv.reader(fh) if row]
    return EntropyMap(np.array(rows))


def map_to_pgm_pixels(emap: EntropyMap, scale: int = 1) -> np.ndarray:
    """8-bit heatmap pixels: linear min-max mapping, constant maps to mid-gray.

    Rows follow rings, columns azimuths; ``scale`` repeats pixels
    nearest-neighbor style.
    """
    values = emap.values
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        pixels = np.full(values.shape, 128, dtype=np.uint8)
    else:
        pixels = np.rint((values - lo) / (hi - lo) * 255.0).astype(np.uint8)
    if scale > 1:
        pixels = np.repeat(np.repeat(pixels, scale, axis=0), scale, axis=1)
    return pixels
