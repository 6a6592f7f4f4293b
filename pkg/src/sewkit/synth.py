"""Procedural garment generator with analytic developable drape oracles.

Four parametric categories (skirt, tube-dress, pants, t-shirt-body) are
instantiated as sewing patterns whose 3D drapes are exact developable
surfaces: cylinder wraps, a truncated-cone wrap for flared skirts, and
paired tangent cylinders for pant legs. Stitched edges map to coincident
3D curves and the drape preserves lengths exactly, so the seam and
isometry losses have known minima on baked ground truth.

World frame: y up, garment girths wrap around the y axis, waist near the
top. Each drape is vertically centered around y = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from sewkit.geometry import (
    DEFAULT_EDGE_POINTS,
    Panel,
    Placement,
    SeamedEdge,
    SewingPattern,
    Stitch,
)
from sewkit.groups import GroupRegistry, assemble_group_tensor, default_registry
from sewkit.uvmaps import GRID_SIZE, PIXEL_PITCH, PanelMaps, bake_ground_truth

CATEGORIES = ("skirt", "tube-dress", "pants", "t-shirt-body")

PARAM_RANGES: dict[str, dict[str, tuple[float, float]]] = {
    "skirt": {
        "waist_girth": (80.0, 120.0),
        "length": (40.0, 80.0),
        "flare": (0.0, 40.0),
        "band_height": (3.0, 6.0),
    },
    "tube-dress": {"girth": (80.0, 120.0), "length": (80.0, 130.0)},
    "pants": {"leg_girth": (45.0, 70.0), "length": (70.0, 110.0), "split_depth": (20.0, 30.0)},
    "t-shirt-body": {"girth": (85.0, 125.0), "length": (40.0, 70.0)},
}

_MASK64 = (1 << 64) - 1


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class GarmentSpec:
    """Category plus shape parameters (cm) within the documented ranges."""

    category: str
    params: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def param(self, name: str) -> float:
        return float(self.params[name])


def validate_spec(spec: GarmentSpec) -> None:
    if spec.category not in PARAM_RANGES:
        raise SynthError(f"unsupported category {spec.category!r}")
    ranges = PARAM_RANGES[spec.category]
    for name, (lo, hi) in ranges.items():
        if name not in spec.params:
            raise SynthError(f"{spec.category}: missing parameter {name!r}")
        v = float(spec.params[name])
        if not lo <= v <= hi:
            raise SynthError(f"{spec.category}: {name}={v} outside [{lo}, {hi}]")
    extra = set(spec.params) - set(ranges)
    if extra:
        raise SynthError(f"{spec.category}: unknown parameters {sorted(extra)}")


def splitmix64(seed: int, index: int) -> int:
    """Documented per-item seed derivation: one splitmix64 round on
    seed + (index+1) * golden-gamma."""
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def random_spec(category: str, seed: int) -> GarmentSpec:
    rng = np.random.default_rng(seed)
    params: dict[str, float] = {}
    for name, (lo, hi) in PARAM_RANGES[category].items():
        params[name] = float(rng.uniform(lo, hi))
    if category == "skirt":
        # Half the skirts are straight (cylinder + waistband), half flared
        # (truncated cone, no band).
        if rng.random() < 0.5:
            params["flare"] = 0.0
        else:
            params["flare"] = float(rng.uniform(10.0, 40.0))
    if category == "pants":
        # Leg girth sampled on the raster lattice (odd multiples of the
        # pitch) so both seam columns land on pixel centers: the two legs
        # curve oppositely, and off-lattice seams would pick up opposing
        # bilinear errors instead of cancelling ones.
        lo, hi = PARAM_RANGES[category]["leg_girth"]
        k = round((params["leg_girth"] / PIXEL_PITCH - 1) / 2)
        g = PIXEL_PITCH * (2 * k + 1)
        while g < lo:
            g += 2 * PIXEL_PITCH
        while g > hi:
            g -= 2 * PIXEL_PITCH
        params["leg_girth"] = float(g)
    return GarmentSpec(category, params, seed)


# ---------------------------------------------------------------------------
# Panel construction helpers


def _rect_edges(x0: float, x1: float, y0: float, y1: float) -> tuple[SeamedEdge, ...]:
    """CCW rectangle loop: bottom, right, top, left."""
    return (
        SeamedEdge((x0, y0), (x1, y0)),
        SeamedEdge((x1, y0), (x1, y1)),
        SeamedEdge((x1, y1), (x0, y1)),
        SeamedEdge((x0, y1), (x0, y0)),
    )


def _trapezoid_edges(apex_rho0: float, apex_rho1: float, half_angle: float) -> tuple[SeamedEdge, ...]:
    """CCW trapezoid with legs radial toward an apex at the local origin.

    Points at flat-polar (rho, psi) sit at (rho sin psi, -rho cos psi), so
    the panel hangs below the apex.
    """

    def pt(rho: float, psi: float) -> tuple[float, float]:
        return (rho * math.sin(psi), -rho * math.cos(psi))

    bl = pt(apex_rho1, -half_angle)
    br = pt(apex_rho1, half_angle)
    tr = pt(apex_rho0, half_angle)
    tl = pt(apex_rho0, -half_angle)
    return (
        SeamedEdge(bl, br),
        SeamedEdge(br, tr),
        SeamedEdge(tr, tl),
        SeamedEdge(tl, bl),
    )


# Edge indices of the 4-edge CCW loop built by _rect_edges/_trapezoid_edges.
BOTTOM, RIGHT, TOP, LEFT = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# Drape maps


class AnalyticDrape:
    """Exact developable drape: maps panel 2D points to garment 3D points.

    ``fns`` holds one vectorized (n,2)->(n,3) map per panel. Normals follow
    the same orientation convention as the UV-field normal computation and
    are evaluated by high-precision central differencing of the exact map.
    """

    def __init__(self, fns: Mapping[str, Callable[[np.ndarray], np.ndarray]]):
        self._fns = dict(fns)

    def __call__(self, panel_id: str, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self._fns[panel_id](pts)

    def panel_ids(self) -> tuple[str, ...]:
        return tuple(self._fns)

    def normal(self, panel_id: str, pts: np.ndarray, h: float = 1e-5) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ex = np.array([h, 0.0])
        ey = np.array([0.0, h])
        du = (self(panel_id, pts + ex) - self(panel_id, pts - ex)) / (2 * h)
        dv = (self(panel_id, pts + ey) - self(panel_id, pts - ey)) / (2 * h)
        c = np.cross(du, dv)
        return -c / np.linalg.norm(c, axis=-1, keepdims=True)


def _cylinder_fn(radius: float, phi0: float, y_shift: float):
    def fn(pts: np.ndarray) -> np.ndarray:
        phi = phi0 + pts[:, 0] / radius
        y = pts[:, 1] + y_shift
        return np.stack([radius * np.sin(phi), y, radius * np.cos(phi)], axis=1)

    return fn


def _cone_fn(sin_beta: float, apex_y: float, phi0: float):
    cos_beta = math.sqrt(max(0.0, 1.0 - sin_beta**2))

    def fn(pts: np.ndarray) -> np.ndarray:
        rho = np.linalg.norm(pts, axis=1)
        psi = np.arctan2(pts[:, 0], -pts[:, 1])
        phi = phi0 + psi / sin_beta
        return np.stack(
            [
                rho * sin_beta * np.sin(phi),
                apex_y - rho * cos_beta,
                rho * sin_beta * np.cos(phi),
            ],
            axis=1,
        )

    return fn


def _leg_fn(radius: float, side: float, y_shift: float):
    """Full cylinder wrap tangent to the x=0, z=0 line; side -1 is the left
    leg, +1 the right."""

    def fn(pts: np.ndarray) -> np.ndarray:
        phi = pts[:, 0] / radius
        x = side * (radius - radius * np.cos(phi))
        z = -side * radius * np.sin(phi)
        return np.stack([x, pts[:, 1] + y_shift, z], axis=1)

    return fn


# ---------------------------------------------------------------------------
# Category templates


def _skirt_pattern(spec: GarmentSpec) -> tuple[SewingPattern, AnalyticDrape]:
    w = spec.param("waist_girth")
    length = spec.param("length")
    flare = spec.param("flare")
    y_shift = length / 2.0

    if flare < 1e-9:
        band = spec.param("band_height")
        r = w / (2 * math.pi)
        half = w / 4.0
        fns = {
            "skirt_front": _cylinder_fn(r, 0.0, y_shift),
            "skirt_back": _cylinder_fn(r, math.pi, y_shift),
            "band_front": _cylinder_fn(r, 0.0, y_shift),
            "band_back": _cylinder_fn(r, math.pi, y_shift),
        }
        panels = [
            Panel("skirt_front", _rect_edges(-half, half, -length, 0.0), group_tag="skirt-body:front"),
            Panel("skirt_back", _rect_edges(-half, half, -length, 0.0), group_tag="skirt-body:back"),
            Panel("band_front", _rect_edges(-half, half, 0.0, band), group_tag="waistband:front"),
            Panel("band_back", _rect_edges(-half, half, 0.0, band), group_tag="waistband:back"),
        ]
        stitches = [
            Stitch("skirt_front", RIGHT, "skirt_back", LEFT, True),
            Stitch("skirt_front", LEFT, "skirt_back", RIGHT, True),
            Stitch("band_front", RIGHT, "band_back", LEFT, True),
            Stitch("band_front", LEFT, "band_back", RIGHT, True),
            Stitch("band_front", BOTTOM, "skirt_front", TOP, True),
            Stitch("band_back", BOTTOM, "skirt_back", TOP, True),
        ]
    else:
        r0 = w / (2 * math.pi)
        r1 = (w + flare) / (2 * math.pi)
        slant = math.hypot(length, r1 - r0)
        sin_beta = (r1 - r0) / slant
        rho0 = r0 / sin_beta
        rho1 = r1 / sin_beta
        half_angle = math.pi * sin_beta / 2.0
        # Waist corners sit at apex_y - rho0 cos(beta) = length/2, so the
        # garment is vertically centered like the cylinder wraps.
        apex_y = rho0 * math.sqrt(1 - sin_beta**2) + y_shift
        fns = {
            "skirt_front": _cone_fn(sin_beta, apex_y, 0.0),
            "skirt_back": _cone_fn(sin_beta, apex_y, math.pi),
        }
        edges = _trapezoid_edges(rho0, rho1, half_angle)
        panels = [
            Panel("skirt_front", edges, group_tag="skirt-body:front"),
            Panel("skirt_back", edges, group_tag="skirt-body:back"),
        ]
        stitches = [
            Stitch("skirt_front", RIGHT, "skirt_back", LEFT, True),
            Stitch("skirt_front", LEFT, "skirt_back", RIGHT, True),
        ]
    return _with_placements(SewingPattern(tuple(panels), tuple(stitches), "skirt"), fns)


def _tube_pattern(spec: GarmentSpec, category: str, group: str, prefix: str) -> tuple[SewingPattern, AnalyticDrape]:
    w = spec.param("girth")
    length = spec.param("length")
    r = w / (2 * math.pi)
    half = w / 4.0
    y_shift = length / 2.0
    fns = {
        f"{prefix}_front": _cylinder_fn(r, 0.0, y_shift),
        f"{prefix}_back": _cylinder_fn(r, math.pi, y_shift),
    }
    edges = _rect_edges(-half, half, -length, 0.0)
    panels = [
        Panel(f"{prefix}_front", edges, group_tag=f"{group}:front"),
        Panel(f"{prefix}_back", edges, group_tag=f"{group}:back"),
    ]
    stitches = [
        Stitch(f"{prefix}_front", RIGHT, f"{prefix}_back", LEFT, True),
        Stitch(f"{prefix}_front", LEFT, f"{prefix}_back", RIGHT, True),
    ]
    return _with_placements(SewingPattern(tuple(panels), tuple(stitches), category), fns)


def _pants_pattern(spec: GarmentSpec) -> tuple[SewingPattern, AnalyticDrape]:
    g = spec.param("leg_girth")
    length = spec.param("length")
    split = spec.param("split_depth")
    r = g / (2 * math.pi)
    y_shift = length / 2.0

    def leg_edges() -> tuple[SeamedEdge, ...]:
        # CCW: bottom, right-lower, right-upper, top, left-upper, left-lower.
        return (
            SeamedEdge((0.0, -length), (g, -length)),
            SeamedEdge((g, -length), (g, -split)),
            SeamedEdge((g, -split), (g, 0.0)),
            SeamedEdge((g, 0.0), (0.0, 0.0)),
            SeamedEdge((0.0, 0.0), (0.0, -split)),
            SeamedEdge((0.0, -split), (0.0, -length)),
        )

    E_BOTTOM, E_RLOW, E_RUP, E_TOP, E_LUP, E_LLOW = range(6)
    fns = {
        "leg_left": _leg_fn(r, -1.0, y_shift),
        "leg_right": _leg_fn(r, +1.0, y_shift),
    }
    panels = [
        Panel("leg_left", leg_edges(), group_tag="pants-left:leg"),
        Panel("leg_right", leg_edges(), group_tag="pants-right:leg"),
    ]
    stitches = [
        # Crotch seams join the legs above the split; inseams close each leg
        # below it. All four boundary verticals map onto the tangent line.
        Stitch("leg_left", E_LUP, "leg_right", E_RUP, True),
        Stitch("leg_left", E_RUP, "leg_right", E_LUP, True),
        Stitch("leg_left", E_RLOW, "leg_left", E_LLOW, True),
        Stitch("leg_right", E_RLOW, "leg_right", E_LLOW, True),
    ]
    return _with_placements(SewingPattern(tuple(panels), tuple(stitches), "pants"), fns)


def _with_placements(pattern: SewingPattern, fns: dict) -> tuple[SewingPattern, AnalyticDrape]:
    drape = AnalyticDrape(fns)
    panels = []
    for p in pattern.panels:
        pts = np.array([e.start for e in p.edges])
        centroid = pts.mean(axis=0)
        target = drape(p.id, centroid[None, :])[0]
        t = (
            float(target[0] - centroid[0]),
            float(target[1] - centroid[1]),
            float(target[2]),
        )
        panels.append(Panel(p.id, p.edges, Placement(t, (0.0, 0.0, 0.0)), p.group_tag))
    return SewingPattern(tuple(panels), pattern.stitches, pattern.category), drape


def gen_pattern(spec: GarmentSpec) -> SewingPattern:
    """Instantiate the category template; deterministic in the spec."""
    return gen_garment(spec)[0]


def analytic_drape(spec: GarmentSpec, pattern: SewingPattern | None = None) -> AnalyticDrape:
    """Exact developable drape for a generated pattern."""
    return gen_garment(spec)[1]


def gen_garment(spec: GarmentSpec) -> tuple[SewingPattern, AnalyticDrape]:
    validate_spec(spec)
    if spec.category == "skirt":
        return _skirt_pattern(spec)
    if spec.category == "tube-dress":
        return _tube_pattern(spec, "tube-dress", "dress-body", "dress")
    if spec.category == "t-shirt-body":
        return _tube_pattern(spec, "t-shirt-body", "shirt-core", "shirt")
    if spec.category == "pants":
        return _pants_pattern(spec)
    raise SynthError(f"unsupported category {spec.category!r}")


# ---------------------------------------------------------------------------
# Dataset generation


@dataclass
class GarmentSample:
    """One synthetic garment: pattern, analytic drape, baked ground truth,
    the per-group tensors for PCA fitting, and (optionally) a readout mesh."""

    spec: GarmentSpec
    pattern: SewingPattern
    drape: AnalyticDrape
    maps: dict[str, PanelMaps]
    tensors: dict[str, np.ndarray]
    mesh: "object | None" = None


def gen_sample(
    spec: GarmentSpec,
    registry: GroupRegistry | None = None,
    m: int = DEFAULT_EDGE_POINTS,
    pitch: float = PIXEL_PITCH,
    size: int = GRID_SIZE,
    with_mesh: bool = True,
) -> GarmentSample:
    registry = registry or default_registry()
    pattern, drape = gen_garment(spec)
    maps = bake_ground_truth(pattern, drape, pitch, size, m)
    tensors = {
        g: assemble_group_tensor(pattern, registry.group(g), m) for g in pattern.group_names
    }
    mesh = None
    if with_mesh:
        from sewkit.mesh import readout_mesh

        mesh = readout_mesh(maps, pattern, k=m)
    return GarmentSample(spec, pattern, drape, maps, tensors, mesh)


def gen_dataset(
    n: int,
    categories: Sequence[str] = CATEGORIES,
    seed: int = 0,
    registry: GroupRegistry | None = None,
    m: int = DEFAULT_EDGE_POINTS,
    with_mesh: bool = True,
) -> list[GarmentSample]:
    """Seeded, reproducible dataset, stratified across categories
    (round-robin, so counts differ by at most one)."""
    if n < 1:
        raise SynthError("n must be >= 1")
    out = []
    for i in range(n):
        cat = categories[i % len(categories)]
        spec = random_spec(cat, splitmix64(seed, i))
        out.append(gen_sample(spec, registry, m, with_mesh=with_mesh))
    return out
