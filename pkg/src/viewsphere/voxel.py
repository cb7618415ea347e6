"""Binary occupancy grids: surface voxelization by triangle/box overlap."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import MeshError, TriangleMesh, assert_normalized

INTERIOR_SIZE = 50
PADDING = 3

_MAGIC = b"VOXG"
_HEADER = struct.Struct("<4s3BB8x")  # magic, dims x3, padding, 8 reserved bytes


@dataclass(frozen=True)
class VoxelGrid:
    """Cubic boolean occupancy grid, indexed [x, y, z], with an empty padding shell."""

    occupancy: np.ndarray
    interior_size: int = INTERIOR_SIZE
    padding: int = PADDING

    def __post_init__(self):
        occ = np.array(self.occupancy, dtype=bool, copy=True)
        d = self.interior_size + 2 * self.padding
        if occ.shape != (d, d, d):
            raise ValueError(f"occupancy must have shape ({d}, {d}, {d}), got {occ.shape}")
        core = occ[
            self.padding : self.padding + self.interior_size,
            self.padding : self.padding + self.interior_size,
            self.padding : self.padding + self.interior_size,
        ]
        if occ.sum() != core.sum():
            raise ValueError("padding shell contains occupied voxels")
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    @property
    def dims(self) -> int:
        return self.interior_size + 2 * self.padding

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())


#: Absolute slack in the separation comparisons. Cell coordinates are rounded
#: floats, so an exact geometric touch can compute as a ~1e-16 separation; the
#: slack keeps closed-box touches occupied without affecting anything farther
#: than 1e-12 away.
_TOUCH_EPS = 1e-12


def _triangle_box_overlap(triangle: np.ndarray, centers: np.ndarray, half: float) -> np.ndarray:
    """Separating-axis overlap of one triangle against many axis-aligned cubes.

    Boxes are closed: touching counts as overlap. ``centers`` is (M, 3),
    ``half`` the half edge length. Returns a boolean mask of length M.
    """
    v0, v1, v2 = triangle
    e0 = v1 - v0
    e1 = v2 - v1
    e2 = v0 - v2
    normal = np.cross(e0, e1)
    axes = [
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
        np.array([0.0, 0.0, 1.0]),
        normal,
    ]
    for edge in (e0, e1, e2):
        axes.append(np.array([0.0, -edge[2], edge[1]]))  # cross(x, edge)
        axes.append(np.array([edge[2], 0.0, -edge[0]]))  # cross(y, edge)
        axes.append(np.array([-edge[1], edge[0], 0.0]))  # cross(z, edge)

    alive = np.ones(len(centers), dtype=bool)
    for axis in axes:
        r = half * np.abs(axis).sum() + _TOUCH_EPS
        q = (float(axis @ v0), float(axis @ v1), float(axis @ v2))
        lo, hi = min(q), max(q)
        s = centers @ axis
        alive &= ~((lo - s > r) | (hi - s < -r))
        if not alive.any():
            break
    return alive


def voxelize(
    mesh: TriangleMesh,
    interior_size: int = INTERIOR_SIZE,
    padding: int = PADDING,
    solid: bool = False,
) -> VoxelGrid:
    """Voxelize a normalized mesh onto the padded occupancy grid.

    A voxel is occupied iff its closed cell box intersects at least one
    triangle (separating-axis test). With ``solid=True`` the surface grid is
    additionally flood-filled by x-parity scanlines; this assumes reasonably
    watertight geometry and is off by default.

    Raises:
        MeshError: mesh unnormalized or without faces.
        ValueError: interior_size < 1.
    """
    if interior_size < 1:
        raise ValueError(f"interior_size must be >= 1, got {interior_size}")
    if len(mesh.faces) == 0:
        raise MeshError("cannot voxelize a mesh with no faces")
    assert_normalized(mesh)

    n = interior_size
    cell = 1.0 / n
    half = cell / 2.0
    dims = n + 2 * padding
    occ = np.zeros((dims, dims, dims), dtype=bool)

    for tri in mesh.triangles:
        bmin = tri.min(axis=0)
        bmax = tri.max(axis=0)
        lo_idx = np.maximum(np.floor((bmin + 0.5) / cell).astype(int) - 1, 0)
        hi_idx = np.minimum(np.floor((bmax + 0.5) / cell).astype(int) + 1, n - 1)
        if (lo_idx > hi_idx).any():
            continue
        ranges = [np.arange(lo_idx[a], hi_idx[a] + 1) for a in range(3)]
        ix, iy, iz = np.meshgrid(*ranges, indexing="ij")
        idx = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)
        centers = -0.5 + (idx + 0.5) * cell
        hit = _triangle_box_overlap(tri, centers, half)
        sel = idx[hit] + padding
        occ[sel[:, 0], sel[:, 1], sel[:, 2]] = True

    if solid:
        _parity_fill(mesh, occ, n, padding)

    return VoxelGrid(occupancy=occ, interior_size=interior_size, padding=padding)


def _parity_fill(mesh: TriangleMesh, occ: np.ndarray, n: int, padding: int) -> None:
    """Mark interior cells whose center lies inside the mesh, by x-ray parity.

    Rays run along +x through cell centers; crossing counts are unreliable
    exactly on shared edges, which has measure zero for generic meshes.
    """
    cell = 1.0 / n
    centers_1d = -0.5 + (np.arange(n) + 0.5) * cell
    yc, zc = np.meshgrid(centers_1d, centers_1d, indexing="ij")
    yc = yc.ravel()
    zc = zc.ravel()
    crossings = [[] for _ in range(len(yc))]
    for tri in mesh.triangles:
        (x0, y0, z0), (x1, y1, z1), (x2, y2, z2) = tri
        den = (y1 - y0) * (z2 - z0) - (z1 - z0) * (y2 - y0)
        if den == 0.0:
            continue  # edge-on to the x direction
        a = ((yc - y0) * (z2 - z0) - (zc - z0) * (y2 - y0)) / den
        b = ((y1 - y0) * (zc - z0) - (z1 - z0) * (yc - y0)) / den
        inside = (a >= 0.0) & (b >= 0.0) & (a + b <= 1.0)
        xs = x0 + a * (x1 - x0) + b * (x2 - x0)
        for ray in np.flatnonzero(inside):
            crossings[ray].append(xs[ray])
    for ray, xs in enumerate(crossings):
        if not xs:
            continue
        # coplanar triangles sharing an edge report the same crossing twice
        ordered = np.unique(np.array(xs))
        parity = np.searchsorted(ordered, centers_1d, side="right") % 2
        iy, iz = divmod(ray, n)
        for ix in np.flatnonzero(parity == 1):
            occ[padding + ix, padding + iy, padding + iz] = True


def pool_voxels(grid: VoxelGrid, factor: int) -> np.ndarray:
    """Downsample to occupancy fractions over factor^3 blocks.

    Raises:
        ValueError: if factor does not divide the grid dimension.
    """
    d = grid.dims
    if factor < 1 or d % factor != 0:
        raise ValueError(f"factor {factor} does not divide grid dimension {d}")
    m = d // factor
    blocks = grid.occupancy.astype(np.float64).reshape(m, factor, m, factor, m, factor)
    return blocks.sum(axis=(1, 3, 5)) / float(factor**3)


def save_grid(grid: VoxelGrid, path: str | Path) -> None:
    """Write the binary grid file: 16-byte header + little-endian packed bits, x-major."""
    d = grid.dims
    header = _HEADER.pack(_MAGIC, d, d, d, grid.padding)
    bits = np.packbits(grid.occupancy.ravel(order="C").view(np.uint8), bitorder="little")
    Path(path).write_bytes(header + bits.tobytes())


def load_grid(path: str | Path) -> VoxelGrid:
    """Read a grid written by :func:`save_grid`."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated voxel grid file")
    magic, dx, dy, dz, padding = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if not dx == dy == dz:
        raise ValueError(f"{path}: non-cubic dims {(dx, dy, dz)}")
    n_bits = dx * dy * dz
    payload = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
    if len(payload) != (n_bits + 7) // 8:
        raise ValueError(f"{path}: payload size mismatch")
    flat = np.unpackbits(payload, count=n_bits, bitorder="little").astype(bool)
    return VoxelGrid(
        occupancy=flat.reshape(dx, dy, dz),
        interior_size=dx - 2 * padding,
        padding=padding,
    )
