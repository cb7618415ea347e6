"""Deterministic orthographic depth rendering by ray casting against a BVH."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .mesh import MeshError, TriangleMesh, assert_normalized
from .viewrig import Viewpoint

IMAGE_SIZE = 224
VIEW_SQUARE_SIZE = 1.9
LEAF_SIZE = 4

BACKGROUND_CODE = 0
NEAR_CODE = 255
FAR_CODE = 1


@dataclass(frozen=True)
class RenderConfig:
    """Renderer knobs; the defaults define the canonical dataset geometry."""

    width: int = IMAGE_SIZE
    height: int = IMAGE_SIZE
    view_size: float = VIEW_SQUARE_SIZE


@dataclass
class DepthImage:
    """8-bit depth image, row-major from top-left.

    Code 0 is background; codes 1..255 encode hit distance, closer = larger.
    """

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.dtype != np.uint8:
            raise ValueError(f"depth image pixels must be uint8, got {pixels.dtype}")
        if pixels.ndim != 2 or pixels.size == 0:
            raise ValueError(f"depth image must be a non-empty 2D array, got shape {pixels.shape}")
        pixels = pixels.copy()
        pixels.setflags(write=False)
        self.pixels = pixels

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class BvhNode:
    box_min: np.ndarray
    box_max: np.ndarray
    left: "BvhNode | None" = None
    right: "BvhNode | None" = None
    triangle_indices: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.triangle_indices is not None


@dataclass
class BoundingVolumeHierarchy:
    """Binary tree of axis-aligned boxes over triangle indices; leaves hold <= leaf_size."""

    root: BvhNode
    triangles: np.ndarray
    leaf_size: int


def build_bvh(mesh: TriangleMesh, leaf_size: int = LEAF_SIZE) -> BoundingVolumeHierarchy:
    """Median-split BVH over the mesh triangles. Deterministic for a given mesh."""
    tris = mesh.triangles
    if len(tris) == 0:
        raise MeshError("cannot build a BVH over an empty mesh")
    tri_min = tris.min(axis=1)
    tri_max = tris.max(axis=1)
    centroids = tris.mean(axis=1)

    def _build(idx: np.ndarray) -> BvhNode:
        bmin = tri_min[idx].min(axis=0)
        bmax = tri_max[idx].max(axis=0)
        if len(idx) <= leaf_size:
            return BvhNode(bmin, bmax, triangle_indices=idx)
        axis = int(np.argmax(bmax - bmin))
        order = idx[np.argsort(centroids[idx, axis], kind="stable")]
        half = len(order) // 2
        return BvhNode(bmin, bmax, left=_build(order[:half]), right=_build(order[half:]))

    return BoundingVolumeHierarchy(_build(np.arange(len(tris))), tris, leaf_size)


def ray_triangle_hits(ox, oy, oz, direction, v0, v1, v2):
    """Moller-Trumbore distances for a bundle of parallel rays; +inf where missed.

    The component arithmetic is written out term by term so results are
    bit-identical however the ray bundle is shaped or sliced. Degenerate
    (zero-area) triangles never register hits.
    """
    dx, dy, dz = (float(direction[0]), float(direction[1]), float(direction[2]))
    e1x, e1y, e1z = (float(v1[0] - v0[0]), float(v1[1] - v0[1]), float(v1[2] - v0[2]))
    e2x, e2y, e2z = (float(v2[0] - v0[0]), float(v2[1] - v0[1]), float(v2[2] - v0[2]))
    hx = dy * e2z - dz * e2y
    hy = dz * e2x - dx * e2z
    hz = dx * e2y - dy * e2x
    a = e1x * hx + e1y * hy + e1z * hz
    if a == 0.0:
        return np.full(np.shape(ox), np.inf)
    f = 1.0 / a
    sx = ox - v0[0]
    sy = oy - v0[1]
    sz = oz - v0[2]
    u = f * (sx * hx + sy * hy + sz * hz)
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = f * (dx * qx + dy * qy + dz * qz)
    t = f * (e2x * qx + e2y * qy + e2z * qz)
    hit = (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 0.0)
    return np.where(hit, t, np.inf)


def _pixel_axes(config: RenderConfig) -> tuple[np.ndarray, np.ndarray]:
    """Image-plane coordinates of pixel centers: u per column, v per row (top row = +v)."""
    pix_u = config.view_size / config.width
    pix_v = config.view_size / config.height
    ucoords = (np.arange(config.width) - (config.width - 1) / 2.0) * pix_u
    vcoords = ((config.height - 1) / 2.0 - np.arange(config.height)) * pix_v
    return ucoords, vcoords


def camera_rays(view: Viewpoint, config: RenderConfig | None = None):
    """Orthographic per-pixel ray origins (h, w, 3) and the shared unit direction."""
    cfg = config or RenderConfig()
    right, up, toward = view.camera_frame()
    ucoords, vcoords = _pixel_axes(cfg)
    origins = (
        view.position[None, None, :]
        + ucoords[None, :, None] * right[None, None, :]
        + vcoords[:, None, None] * up[None, None, :]
    )
    return origins, toward


def _project_interval(box_min, box_max, axis) -> tuple[float, float]:
    lo = 0.0
    hi = 0.0
    for i in range(3):
        a = float(box_min[i]) * float(axis[i])
        b = float(box_max[i]) * float(axis[i])
        if a <= b:
            lo += a
            hi += b
        else:
            lo += b
            hi += a
    return lo, hi


def _pixel_rect(node, right, up, ucoords, neg_vcoords, width, height):
    """Conservative pixel rectangle covered by a node box, expanded by one pixel."""
    umin, umax = _project_interval(node.box_min, node.box_max, right)
    vmin, vmax = _project_interval(node.box_min, node.box_max, up)
    c0 = max(int(np.searchsorted(ucoords, umin, side="left")) - 1, 0)
    c1 = min(int(np.searchsorted(ucoords, umax, side="right")) + 1, width)
    r0 = max(int(np.searchsorted(neg_vcoords, -vmax, side="left")) - 1, 0)
    r1 = min(int(np.searchsorted(neg_vcoords, -vmin, side="right")) + 1, height)
    if c0 >= c1 or r0 >= r1:
        return None
    return r0, r1, c0, c1


def depth_codes(distances: np.ndarray, radius: float) -> np.ndarray:
    """Quantize hit distances to uint8 codes: [radius-1, radius+1] -> [255, 1], miss -> 0."""
    hit = np.isfinite(distances)
    scaled = 255.0 - 127.0 * (np.where(hit, distances, radius) - (radius - 1.0))
    codes = np.clip(np.rint(scaled), FAR_CODE, NEAR_CODE)
    return np.where(hit, codes, BACKGROUND_CODE).astype(np.uint8)


def render_depth(
    mesh: TriangleMesh,
    view: Viewpoint,
    config: RenderConfig | None = None,
    bvh: BoundingVolumeHierarchy | None = None,
) -> DepthImage:
    """Render one orthographic depth image by casting one ray per pixel center.

    Traversal projects BVH boxes onto the image plane and intersects only the
    covered pixel rectangles, which yields the same nearest hit per pixel as
    testing every triangle. Bit-identical for identical inputs.
    """
    cfg = config or RenderConfig()
    if len(mesh.faces) == 0:
        return DepthImage(np.zeros((cfg.height, cfg.width), dtype=np.uint8))
    assert_normalized(mesh)
    if bvh is None:
        bvh = build_bvh(mesh)

    right, up, _ = view.camera_frame()
    ucoords, vcoords = _pixel_axes(cfg)
    neg_vcoords = -vcoords
    origins, direction = camera_rays(view, cfg)
    ox = origins[..., 0]
    oy = origins[..., 1]
    oz = origins[..., 2]

    tbuf = np.full((cfg.height, cfg.width), np.inf)
    stack = [bvh.root]
    while stack:
        node = stack.pop()
        rect = _pixel_rect(node, right, up, ucoords, neg_vcoords, cfg.width, cfg.height)
        if rect is None:
            continue
        if node.is_leaf:
            r0, r1, c0, c1 = rect
            sub = tbuf[r0:r1, c0:c1]
            for ti in node.triangle_indices:
                v0, v1, v2 = bvh.triangles[ti]
                t = ray_triangle_hits(
                    ox[r0:r1, c0:c1], oy[r0:r1, c0:c1], oz[r0:r1, c0:c1], direction, v0, v1, v2
                )
                np.minimum(sub, t, out=sub)
        else:
            stack.append(node.left)
            stack.append(node.right)

    return DepthImage(depth_codes(tbuf, view.radius))


def render_all_views(
    mesh: TriangleMesh,
    rig: list[Viewpoint],
    config: RenderConfig | None = None,
    workers: int = 1,
) -> list[DepthImage]:
    """Render every rig viewpoint, ordered by view index.

    The output is schedule-independent: each view renders into its own slot,
    so parallel and serial runs are element-wise identical.
    """
    cfg = config or RenderConfig()
    bvh = build_bvh(mesh) if len(mesh.faces) else None
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda v: render_depth(mesh, v, cfg, bvh), rig))
    return [render_depth(mesh, view, cfg, bvh) for view in rig]


def write_pgm_array(pixels: np.ndarray, path: str | Path) -> None:
    """Write a uint8 array as binary PGM (P5, maxval 255); byte-exact for identical input."""
    if pixels.dtype != np.uint8 or pixels.ndim != 2:
        raise ValueError(f"PGM payload must be a 2D uint8 array, got {pixels.dtype} {pixels.shape}")
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def write_pgm(image: DepthImage, path: str | Path) -> None:
    """Write a depth image as binary PGM."""
    write_pgm_array(image.pixels, path)


def read_pgm(path: str | Path) -> DepthImage:
    """Read a binary PGM written by :func:`write_pgm` (or any P5 with maxval <= 255)."""
    blob = Path(path).read_bytes()
    pos = 0
    tokens = []
    while len(tokens) < 4:
        if pos >= len(blob):
            raise ValueError(f"{path}: truncated PGM header")
        ch = blob[pos : pos + 1]
        if ch == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(blob) and not blob[pos : pos + 1].isspace():
                pos += 1
            tokens.append(blob[start:pos])
    pos += 1  # single whitespace byte after maxval
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    if len(blob) - pos < width * height:
        raise ValueError(f"{path}: truncated PGM payload")
    data = np.frombuffer(blob, dtype=np.uint8, offset=pos, count=width * height)
    return DepthImage(data.reshape(height, width))
