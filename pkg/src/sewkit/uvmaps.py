"""UV-position-map and mask-map representation.

Each panel gets its own H x W grid: a binary mask of the panel's 2D shape
and a position map storing the 3D garment coordinates at the panel's UV
coordinates. The grid is square, 128 pixels by default, with a pixel pitch
tied to the isometry target spacing (1.5 cm per pixel by default).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from sewkit.geometry import DEFAULT_EDGE_POINTS, SewingPattern, panel_contour, points_in_contour

GRID_SIZE = 128

# cm per pixel; equals the inner-panel target spacing so a pixel step on an
# undistorted garment is one grid step.
PIXEL_PITCH = 1.5

_MAP_MAGIC = b"SEWKMAP1"


class MapError(ValueError):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code


@dataclass(frozen=True)
class MaskMap:
    """Binary panel occupancy on the UV grid plus its panel-to-map transform.

    ``origin`` is the 2D cm coordinate of pixel (0, 0)'s center; pixel
    (i, j) sits at origin + (j * pitch, i * pitch), i.e. u runs along
    columns/x and v along rows/y.
    """

    grid: np.ndarray  # (H, W) bool
    panel_id: str
    pitch: float = PIXEL_PITCH
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=bool))
        self.grid.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def uv_of(self, pts: np.ndarray) -> np.ndarray:
        """Panel 2D cm coordinates -> fractional (u, v) grid coordinates."""
        pts = np.asarray(pts, dtype=float)
        return (pts - np.asarray(self.origin)) / self.pitch

    def points_of(self, uv: np.ndarray) -> np.ndarray:
        uv = np.asarray(uv, dtype=float)
        return uv * self.pitch + np.asarray(self.origin)

    def pixel_points(self) -> np.ndarray:
        """(H, W, 2) cm coordinates of every pixel center."""
        h, w = self.grid.shape
        jj, ii = np.meshgrid(np.arange(w), np.arange(h))
        return np.stack(
            [self.origin[0] + jj * self.pitch, self.origin[1] + ii * self.pitch], axis=-1
        )

    def count(self) -> int:
        return int(self.grid.sum())


@dataclass(frozen=True)
class PanelMaps:
    """Baked per-panel ground truth: mask, positions, unit normals."""

    mask: MaskMap
    positions: np.ndarray  # (H, W, 3)
    normals: np.ndarray | None = None


def mask_is_connected(grid: np.ndarray) -> bool:
    """Single 4-connected occupied component?"""
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    _, n = ndimage.label(grid, structure=structure)
    return n == 1


def rasterize_masks(
    contours: Mapping[str, np.ndarray],
    pitch: float = PIXEL_PITCH,
    size: int = GRID_SIZE,
) -> dict[str, MaskMap]:
    """Rasterize closed panel contours to centered mask maps.

    A pixel is occupied iff its center lies strictly inside the contour
    (even-odd rule, boundary outside). Contours are centered on the map
    with at least a one-pixel margin; anything larger raises
    panel-exceeds-map.
    """
    out: dict[str, MaskMap] = {}
    for pid, contour in contours.items():
        contour = np.asarray(contour, dtype=float)
        lo = contour.min(axis=0)
        hi = contour.max(axis=0)
        span = hi - lo
        if span[0] <= 0 or span[1] <= 0:
            raise MapError("degenerate-contour", f"panel {pid!r} has zero area")
        if span[0] > (size - 2) * pitch or span[1] > (size - 2) * pitch:
            raise MapError(
                "panel-exceeds-map",
                f"panel {pid!r} spans {span[0]:.1f} x {span[1]:.1f} cm, "
                f"map holds {(size - 2) * pitch:.1f} cm",
            )
        center = 0.5 * (lo + hi)
        origin = (
            float(center[0] - (size - 1) / 2 * pitch),
            float(center[1] - (size - 1) / 2 * pitch),
        )
        probe = MaskMap(np.zeros((size, size), dtype=bool), pid, pitch, origin)
        inside = points_in_contour(contour, probe.pixel_points().reshape(-1, 2))
        out[pid] = MaskMap(inside.reshape(size, size), pid, pitch, origin)
    return out


# ---------------------------------------------------------------------------
# Sampling


def bilinear_sample(y: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinearly interpolate an (H, W, C) field at fractional (u, v).

    u indexes columns, v rows. Accepts a single (u, v) pair or an (N, 2)
    array; out-of-range coordinates raise.
    """
    y = np.asarray(y)
    h, w = y.shape[:2]
    uv_arr = np.atleast_2d(np.asarray(uv, dtype=float))
    u, v = uv_arr[:, 0], uv_arr[:, 1]
    if np.any(u < 0) or np.any(u > w - 1) or np.any(v < 0) or np.any(v > h - 1):
        raise MapError("uv-out-of-range", f"uv outside [0, {w - 1}] x [0, {h - 1}]")
    j0, i0, fu, fv = bilinear_cell(uv_arr, h, w)
    vals = (
        y[i0, j0] * ((1 - fu) * (1 - fv))[:, None]
        + y[i0, j0 + 1] * (fu * (1 - fv))[:, None]
        + y[i0 + 1, j0] * ((1 - fu) * fv)[:, None]
        + y[i0 + 1, j0 + 1] * (fu * fv)[:, None]
    )
    return vals[0] if np.asarray(uv).ndim == 1 else vals


def bilinear_cell(uv: np.ndarray, h: int, w: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Cell index and fractional weights for each (u, v); the top edge
    clamps into the last cell so u = W-1 is valid."""
    u, v = uv[:, 0], uv[:, 1]
    j0 = np.clip(np.floor(u).astype(int), 0, w - 2)
    i0 = np.clip(np.floor(v).astype(int), 0, h - 2)
    return j0, i0, u - j0, v - i0


# ---------------------------------------------------------------------------
# Normals

# Stencil modes per pixel, fixed by the mask alone (gradients reuse them).
DIFF_NONE, DIFF_CENTRAL, DIFF_FORWARD, DIFF_BACKWARD = 0, 1, 2, 3


def masked_diff_modes(mask: np.ndarray, axis: int) -> np.ndarray:
    """Finite-difference mode per pixel: central in the mask interior,
    one-sided at mask borders, none where the stencil leaves the mask."""
    m = np.asarray(mask, dtype=bool)
    prev_ok = np.zeros_like(m)
    next_ok = np.zeros_like(m)
    if axis == 0:
        prev_ok[1:, :] = m[:-1, :]
        next_ok[:-1, :] = m[1:, :]
    else:
        prev_ok[:, 1:] = m[:, :-1]
        next_ok[:, :-1] = m[:, 1:]
    modes = np.zeros(m.shape, dtype=np.int8)
    modes[m & prev_ok & next_ok] = DIFF_CENTRAL
    modes[m & ~prev_ok & next_ok] = DIFF_FORWARD
    modes[m & prev_ok & ~next_ok] = DIFF_BACKWARD
    return modes


def masked_diff(y: np.ndarray, modes: np.ndarray, axis: int) -> np.ndarray:
    """Apply the per-pixel stencil along rows (axis 0, v) or columns (axis 1, u)."""
    d = np.zeros_like(y)
    nxt = np.roll(y, -1, axis=axis)
    prv = np.roll(y, 1, axis=axis)
    sel = modes == DIFF_CENTRAL
    d[sel] = 0.5 * (nxt[sel] - prv[sel])
    sel = modes == DIFF_FORWARD
    d[sel] = nxt[sel] - y[sel]
    sel = modes == DIFF_BACKWARD
    d[sel] = y[sel] - prv[sel]
    return d


def masked_diff_adjoint(grad_d: np.ndarray, modes: np.ndarray, axis: int) -> np.ndarray:
    """Transpose of masked_diff: scatter per-pixel derivative gradients back
    onto the positions they were computed from.

    Wraparound from np.roll is harmless: modes never reference a neighbor
    across the grid boundary, so the wrapped lanes carry zeros.
    """
    half = 0.5 * np.where((modes == DIFF_CENTRAL)[..., None], grad_d, 0.0)
    fwd = np.where((modes == DIFF_FORWARD)[..., None], grad_d, 0.0)
    bwd = np.where((modes == DIFF_BACKWARD)[..., None], grad_d, 0.0)
    out = np.roll(half + fwd, 1, axis=axis)  # + at the next pixel
    out -= np.roll(half + bwd, -1, axis=axis)  # - at the previous pixel
    out += bwd - fwd  # the pixel itself
    return out


def normals_from_positions(y: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, dict]:
    """Unit normals and the intermediates needed for gradient propagation."""
    modes_u = masked_diff_modes(mask, axis=1)
    modes_v = masked_diff_modes(mask, axis=0)
    du = masked_diff(y, modes_u, axis=1)
    dv = masked_diff(y, modes_v, axis=0)
    c = np.cross(du, dv)
    norm = np.linalg.norm(c, axis=-1)
    ok = (modes_u > 0) & (modes_v > 0) & (norm > 1e-9)
    n = np.zeros_like(y)
    n[ok] = -c[ok] / norm[ok][:, None]
    cache = {"modes_u": modes_u, "modes_v": modes_v, "du": du, "dv": dv, "c": c, "norm": norm, "ok": ok}
    return n, cache


def compute_normals(y: np.ndarray, mask: MaskMap | np.ndarray) -> np.ndarray:
    """Surface normals -(dY/du x dY/dv)/|.| per masked pixel.

    Pixels whose stencil leaves the mask, or whose cross product is shorter
    than 1e-9, get the zero sentinel.
    """
    grid = mask.grid if isinstance(mask, MaskMap) else np.asarray(mask, dtype=bool)
    n, _ = normals_from_positions(np.asarray(y, dtype=float), grid)
    return n


def bake_ground_truth(
    pattern: SewingPattern,
    surface: Callable[[str, np.ndarray], np.ndarray],
    pitch: float = PIXEL_PITCH,
    size: int = GRID_SIZE,
    m: int = DEFAULT_EDGE_POINTS,
) -> dict[str, PanelMaps]:
    """Bake (mask, positions, normals) ground truth from an analytic drape.

    ``surface`` maps (panel_id, (n, 2) panel points) to (n, 3) garment
    points; it must be defined at every masked pixel center.
    """
    contours = {p.id: panel_contour(p, m) for p in pattern.panels}
    masks = rasterize_masks(contours, pitch, size)
    out: dict[str, PanelMaps] = {}
    for p in pattern.panels:
        mask = masks[p.id]
        pts = mask.pixel_points().reshape(-1, 2)
        pos3 = np.asarray(surface(p.id, pts), dtype=float).reshape(*mask.grid.shape, 3)
        # Positions are baked wherever the surface is defined, not just under
        # the mask: stitch points sit on the mask boundary, so their bilinear
        # stencils read the ring of texels just outside it.
        bad = ~np.all(np.isfinite(pos3), axis=-1)
        if (bad & mask.grid).any():
            raise MapError("surface-undefined", f"panel {p.id!r} has undefined masked pixels")
        pos3[bad] = 0.0
        out[p.id] = PanelMaps(mask, pos3, compute_normals(pos3, mask))
    return out


# ---------------------------------------------------------------------------
# Map container file
#
# Byte layout (little-endian):
#   magic       8 bytes b"SEWKMAP1"
#   u32 x3      panel count T, H, W
#   f64         pixel pitch (cm/px)
#   per panel:
#     u16+bytes panel id (utf-8)
#     f64 x2    origin x, origin y (cm of pixel (0,0) center)
#     bits      mask, ceil(H*W/8) bytes, row-major, MSB first
#     f32 array positions, H*W*3 values (C order)


def save_maps(path, panels: Mapping[str, PanelMaps]) -> None:
    """Write a map container to a path or binary file object."""
    items = list(panels.items())
    if not items:
        raise MapError("empty-mask", "no panels to save")
    h, w = items[0][1].mask.grid.shape
    f = path if hasattr(path, "write") else open(path, "wb")
    try:
        f.write(_MAP_MAGIC)
        f.write(struct.pack("<III", len(items), h, w))
        f.write(struct.pack("<d", items[0][1].mask.pitch))
        for pid, pm in items:
            b = pid.encode()
            f.write(struct.pack("<H", len(b)) + b)
            f.write(struct.pack("<dd", *pm.mask.origin))
            f.write(np.packbits(pm.mask.grid.ravel()).tobytes())
            f.write(np.ascontiguousarray(pm.positions, dtype="<f4").tobytes())
    finally:
        if f is not path:
            f.close()


def load_maps(path) -> dict[str, PanelMaps]:
    if hasattr(path, "read"):
        data = path.read()
    else:
        with open(path, "rb") as f:
            data = f.read()
    if data[:8] != _MAP_MAGIC:
        raise MapError("bad-container", f"not a map container: {path}")
    t, h, w = struct.unpack_from("<III", data, 8)
    (pitch,) = struct.unpack_from("<d", data, 20)
    off = 28
    nbits = (h * w + 7) // 8
    out: dict[str, PanelMaps] = {}
    for _ in range(t):
        (plen,) = struct.unpack_from("<H", data, off)
        off += 2
        pid = data[off : off + plen].decode()
        off += plen
        ox, oy = struct.unpack_from("<dd", data, off)
        off += 16
        grid = np.unpackbits(np.frombuffer(data, np.uint8, nbits, off))[: h * w]
        off += nbits
        pos = np.frombuffer(data, "<f4", h * w * 3, off).astype(float).reshape(h, w, 3)
        off += h * w * 3 * 4
        mask = MaskMap(grid.reshape(h, w).astype(bool), pid, pitch, (ox, oy))
        out[pid] = PanelMaps(mask, pos, compute_normals(pos, mask))
    return out
