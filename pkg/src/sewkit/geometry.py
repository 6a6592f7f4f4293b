"""Sewing-pattern data model: panels, seamed edges, stitches, parsing and
validation, and edge/contour discretization.

Coordinates are centimeters throughout. Panel space is 2D, garment space 3D.
Edges are straight segments or quadratic curves (one control point). Panels
are closed, simple, counter-clockwise loops of edges; stitches pair two
seamed edges that get joined point-wise on the 3D garment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

FORMAT_TAG = "sewkit/1"

# Points per seamed edge used wherever a discretization density is not given
# explicitly.
DEFAULT_EDGE_POINTS = 20

# Gap above which an edge loop counts as not closed.
LOOP_CLOSE_TOL = 1e-6

_ARC_TABLE_SEGMENTS = 4096


class PatternError(Exception):
    """Base class for pattern file and validation errors."""


class PatternSyntaxError(PatternError):
    """Malformed pattern document; carries a position annotation."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class PatternValidationError(PatternError):
    """Raised when a parsed pattern violates structural invariants."""

    def __init__(self, violations: list["Violation"]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


class GeometryError(ValueError):
    """Degenerate or out-of-domain geometric input."""


@dataclass(frozen=True)
class Violation:
    """One machine-readable invariant violation."""

    code: str
    where: str
    detail: str = ""

    def __str__(self) -> str:
        msg = f"{self.code} at {self.where}"
        return f"{msg}: {self.detail}" if self.detail else msg


@dataclass(frozen=True)
class SeamedEdge:
    """Panel boundary segment, straight or quadratic (one control point)."""

    start: tuple[float, float]
    end: tuple[float, float]
    control: tuple[float, float] | None = None

    def reversed_(self) -> "SeamedEdge":
        return SeamedEdge(self.end, self.start, self.control)

    @property
    def is_straight(self) -> bool:
        return self.control is None


@dataclass(frozen=True)
class Placement:
    """Rigid-transform hint (cm translation, xyz Euler radians) used only to
    initialize solvers; carries no semantics for encoding or losses."""

    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def matrix(self) -> np.ndarray:
        rx, ry, rz = self.rotation
        cx, sx = math.cos(rx), math.sin(rx)
        cy, sy = math.cos(ry), math.sin(ry)
        cz, sz = math.cos(rz), math.sin(rz)
        mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
        my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
        return mz @ my @ mx


@dataclass(frozen=True)
class Panel:
    """Closed CCW loop of seamed edges plus a placement hint and group tag.

    ``group_tag`` has the form ``"<group>:<role>"`` against the group
    registry; edge order is semantic (it fixes the rows of the group tensor).
    """

    id: str
    edges: tuple[SeamedEdge, ...]
    placement: Placement = Placement()
    group_tag: str = ""

    def edge(self, index: int) -> SeamedEdge:
        return self.edges[index]


@dataclass(frozen=True)
class Stitch:
    """Pairing of two seamed edges joined point-wise on the garment.

    ``reversed`` flips edge b's point order before pairing, so that point k
    of edge a meets point m-1-k of edge b.
    """

    panel_a: str
    edge_a: int
    panel_b: str
    edge_b: int
    reversed: bool = False

    def sides(self) -> tuple[tuple[str, int], tuple[str, int]]:
        return (self.panel_a, self.edge_a), (self.panel_b, self.edge_b)


@dataclass(frozen=True)
class SewingPattern:
    """A garment: panels plus the stitch graph joining their edges."""

    panels: tuple[Panel, ...]
    stitches: tuple[Stitch, ...]
    category: str = ""

    def panel_by_id(self, pid: str) -> Panel:
        for p in self.panels:
            if p.id == pid:
                return p
        raise KeyError(pid)

    @property
    def group_names(self) -> tuple[str, ...]:
        seen: list[str] = []
        for p in self.panels:
            g = p.group_tag.split(":", 1)[0]
            if g and g not in seen:
                seen.append(g)
        return tuple(seen)


# ---------------------------------------------------------------------------
# Discretization


def _edge_key(edge: SeamedEdge) -> bool:
    """True when the edge already runs in canonical (lexicographic) direction."""
    return edge.start <= edge.end


def _bezier(edge: SeamedEdge, t: np.ndarray) -> np.ndarray:
    p0 = np.asarray(edge.start, dtype=float)
    p1 = np.asarray(edge.end, dtype=float)
    c = np.asarray(edge.control, dtype=float)
    t = t[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * c + t**2 * p1


def _discretize_canonical(edge: SeamedEdge, m: int) -> np.ndarray:
    if edge.is_straight:
        s = np.asarray(edge.start, dtype=float)
        e = np.asarray(edge.end, dtype=float)
        if not np.any(s != e):
            raise GeometryError("degenerate edge: zero length")
        # Weights from integer indices keep reversal symmetry bit-exact.
        idx = np.arange(m, dtype=float)
        w1 = idx / (m - 1)
        w0 = idx[::-1] / (m - 1)
        return w0[:, None] * s + w1[:, None] * e
    ts = np.linspace(0.0, 1.0, _ARC_TABLE_SEGMENTS + 1)
    pts = _bezier(edge, ts)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total <= 0.0:
        raise GeometryError("degenerate edge: zero length")
    targets = np.linspace(0.0, total, m)
    t_at = np.interp(targets, arc, ts)
    out = _bezier(edge, t_at)
    out[0] = edge.start
    out[-1] = edge.end
    return out


def discretize_edge(edge: SeamedEdge, m: int = DEFAULT_EDGE_POINTS) -> np.ndarray:
    """Sample m points at uniform arc length from start to end inclusive.

    Reversing the edge reverses the returned point list exactly: points are
    computed along a canonical direction and flipped, so both orientations
    share every intermediate value bit for bit.
    """
    if m < 2:
        raise GeometryError(f"need at least 2 points per edge, got {m}")
    if _edge_key(edge):
        return _discretize_canonical(edge, m)
    return _discretize_canonical(edge.reversed_(), m)[::-1].copy()


def edge_length(edge: SeamedEdge) -> float:
    """Arc length of an edge (chord-table accurate for curves)."""
    if edge.is_straight:
        return float(np.linalg.norm(np.subtract(edge.end, edge.start)))
    ts = np.linspace(0.0, 1.0, _ARC_TABLE_SEGMENTS + 1)
    pts = _bezier(edge, ts)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def panel_contour(panel: Panel, m: int = DEFAULT_EDGE_POINTS) -> np.ndarray:
    """Closed contour polyline: per-edge discretizations with the shared
    endpoints deduplicated. The first point closes against the last."""
    if m < 2:
        raise GeometryError(f"need at least 2 points per edge, got {m}")
    parts = [discretize_edge(e, m)[:-1] for e in panel.edges]
    return np.concatenate(parts, axis=0)


def signed_area(contour: np.ndarray) -> float:
    """Shoelace area of a closed polyline (positive = counter-clockwise)."""
    x = contour[:, 0]
    y = contour[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def point_in_panel(contour: np.ndarray, p: Sequence[float]) -> bool:
    """Even-odd test of a point against a closed contour polyline.

    Boundary points classify as outside, which keeps rasterization
    deterministic.
    """
    return bool(points_in_contour(contour, np.asarray([p], dtype=float))[0])


def points_in_contour(contour: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Vectorized even-odd rule for many query points; boundary is outside."""
    contour = np.asarray(contour, dtype=float)
    pts = np.asarray(pts, dtype=float)
    a = contour
    b = np.roll(contour, -1, axis=0)
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    ax, ay = a[:, 0][None, :], a[:, 1][None, :]
    bx, by = b[:, 0][None, :], b[:, 1][None, :]

    # On-segment test first: cross product ~ 0 and projection inside.
    dx, dy = bx - ax, by - ay
    cross = dx * (py - ay) - dy * (px - ax)
    seg_len2 = dx * dx + dy * dy
    dot = (px - ax) * dx + (py - ay) * dy
    scale = np.maximum(np.sqrt(seg_len2), 1e-30)
    on_seg = (np.abs(cross) <= 1e-9 * scale) & (dot >= -1e-12) & (dot <= seg_len2 + 1e-12)
    on_boundary = on_seg.any(axis=1)

    # Half-open crossing rule along +x so shared vertices count once.
    cond = (ay <= py) != (by <= py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * dx / np.where(dy == 0, 1.0, dy)
    crossings = (cond & (x_cross > px)).sum(axis=1)
    inside = (crossings % 2).astype(bool)
    return inside & ~on_boundary


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if v > 1e-12:
            return 1
        if v < -1e-12:
            return -1
        return 0

    o1 = orient(p1, p2, q1)
    o2 = orient(p1, p2, q2)
    o3 = orient(q1, q2, p1)
    o4 = orient(q1, q2, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def contour_is_simple(contour: np.ndarray) -> bool:
    """No proper crossing between non-adjacent contour segments."""
    n = len(contour)
    segs = [(contour[i], contour[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(*segs[i], *segs[j]):
                return False
    return True


# ---------------------------------------------------------------------------
# Validation


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def validate(pattern: SewingPattern, registry=None) -> list[Violation]:
    """Collect every invariant violation; an empty list means valid.

    ``registry`` defaults to the shipped group registry; pass an explicit
    one to validate against custom taxonomies.
    """
    out: list[Violation] = []
    if not pattern.panels:
        out.append(Violation("no-panels", "pattern", "no panels"))
        return out

    if registry is None:
        from sewkit.groups import default_registry

        registry = default_registry()

    seen_ids: set[str] = set()
    for panel in pattern.panels:
        where = f"panel {panel.id!r}"
        if panel.id in seen_ids:
            out.append(Violation("duplicate-panel-id", where))
        seen_ids.add(panel.id)
        if len(panel.edges) < 2:
            out.append(Violation("too-few-edges", where, f"{len(panel.edges)} edge(s)"))
            continue

        bad_coords = False
        for k, e in enumerate(panel.edges):
            coords = [*e.start, *e.end] + ([*e.control] if e.control else [])
            if not _finite(*coords):
                out.append(Violation("nonfinite-coordinate", f"{where} edge {k}"))
                bad_coords = True
            elif math.dist(e.start, e.end) < 1e-9:
                out.append(Violation("edge-degenerate", f"{where} edge {k}"))
                bad_coords = True
        if bad_coords:
            continue

        for k, e in enumerate(panel.edges):
            nxt = panel.edges[(k + 1) % len(panel.edges)]
            if math.dist(e.end, nxt.start) > LOOP_CLOSE_TOL:
                out.append(
                    Violation(
                        "loop-not-closed",
                        f"{where} edge {k}",
                        f"gap {math.dist(e.end, nxt.start):.6g} cm",
                    )
                )

        contour = panel_contour(panel, 32)
        if signed_area(contour) <= 0:
            out.append(Violation("negative-area", where, "loop is clockwise or degenerate"))
        if not contour_is_simple(contour):
            out.append(Violation("loop-self-intersects", where))

        if registry is not None and not registry.has_tag(panel.group_tag):
            out.append(Violation("unknown-group", where, panel.group_tag or "<empty>"))
        elif registry is not None:
            expected = registry.edge_count(panel.group_tag)
            if expected != len(panel.edges):
                out.append(
                    Violation(
                        "edge-count-mismatch",
                        where,
                        f"group {panel.group_tag!r} expects {expected} edges, has {len(panel.edges)}",
                    )
                )

    panel_ids = {p.id: p for p in pattern.panels}
    used: set[tuple[str, int]] = set()
    for i, st in enumerate(pattern.stitches):
        where = f"stitch {i}"
        sides_ok = True
        for pid, eidx in st.sides():
            if pid not in panel_ids:
                out.append(Violation("unknown-panel", where, pid))
                sides_ok = False
            elif not 0 <= eidx < len(panel_ids[pid].edges):
                out.append(Violation("unknown-edge", where, f"{pid}[{eidx}]"))
                sides_ok = False
        if not sides_ok:
            continue
        if (st.panel_a, st.edge_a) == (st.panel_b, st.edge_b):
            out.append(Violation("stitch-self-pair", where))
            continue
        for side in st.sides():
            if side in used:
                out.append(Violation("edge-doubly-stitched", where, f"{side[0]}[{side[1]}]"))
            used.add(side)
    return out


# ---------------------------------------------------------------------------
# Parsing / serialization


def _req(obj: dict, key: str, where: str):
    if key not in obj:
        raise PatternSyntaxError(f"missing field {key!r} in {where}")
    return obj[key]


def _point2(v, where: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise PatternSyntaxError(f"expected [x, y] in {where}")
    return float(v[0]), float(v[1])


def _canonical_stitch(st: Stitch) -> Stitch:
    a, b = st.sides()
    if a <= b:
        return st
    return Stitch(st.panel_b, st.edge_b, st.panel_a, st.edge_a, st.reversed)


def canonicalize_stitches(stitches: Iterable[Stitch]) -> tuple[Stitch, ...]:
    """Order each stitch's sides and sort the list; pairing is symmetric
    under a side swap so this changes no semantics."""
    return tuple(sorted((_canonical_stitch(s) for s in stitches), key=lambda s: s.sides()))


def _flip_panel(panel: Panel) -> Panel:
    edges = tuple(e.reversed_() for e in reversed(panel.edges))
    return Panel(panel.id, edges, panel.placement, panel.group_tag)


def normalize_orientation(
    panels: Sequence[Panel], stitches: Sequence[Stitch]
) -> tuple[tuple[Panel, ...], tuple[Stitch, ...]]:
    """Flip clockwise panels to counter-clockwise, remapping stitch edge
    indices (i -> n-1-i) and toggling their reversed flags."""
    flipped: dict[str, int] = {}
    out_panels = []
    for p in panels:
        try:
            area = signed_area(panel_contour(p, 32))
        except GeometryError:
            out_panels.append(p)
            continue
        if area < 0:
            flipped[p.id] = len(p.edges)
            out_panels.append(_flip_panel(p))
        else:
            out_panels.append(p)
    out_stitches = []
    for st in stitches:
        pa, ea, pb, eb, rev = st.panel_a, st.edge_a, st.panel_b, st.edge_b, st.reversed
        if pa in flipped and 0 <= ea < flipped[pa]:
            ea = flipped[pa] - 1 - ea
            rev = not rev
        if pb in flipped and 0 <= eb < flipped[pb]:
            eb = flipped[pb] - 1 - eb
            rev = not rev
        out_stitches.append(Stitch(pa, ea, pb, eb, rev))
    return tuple(out_panels), tuple(out_stitches)


def pattern_from_doc(doc: dict, registry=None) -> SewingPattern:
    """Build and validate a pattern from an already-parsed document."""
    if not isinstance(doc, dict):
        raise PatternSyntaxError("top level must be an object")
    fmt = doc.get("format", FORMAT_TAG)
    if fmt != FORMAT_TAG:
        raise PatternSyntaxError(f"unsupported format {fmt!r}, expected {FORMAT_TAG!r}")
    category = str(doc.get("category", ""))
    panels = []
    for pd in _req(doc, "panels", "document"):
        pid = str(_req(pd, "id", "panel"))
        where = f"panel {pid!r}"
        edges = []
        for k, ed in enumerate(_req(pd, "edges", where)):
            ctrl = ed.get("control")
            if ctrl is not None and (not isinstance(ctrl, (list, tuple)) or len(ctrl) != 2):
                raise PatternSyntaxError(f"bad control point in {where} edge {k}")
            extra = set(ed) - {"start", "end", "control"}
            if extra:
                raise PatternSyntaxError(
                    f"unsupported edge fields {sorted(extra)} in {where} edge {k}; "
                    "only straight and quadratic edges exist"
                )
            edges.append(
                SeamedEdge(
                    _point2(_req(ed, "start", where), where),
                    _point2(_req(ed, "end", where), where),
                    _point2(ctrl, where) if ctrl is not None else None,
                )
            )
        pl = pd.get("placement") or {}
        placement = Placement(
            tuple(float(v) for v in pl.get("t", (0, 0, 0))),
            tuple(float(v) for v in pl.get("r", (0, 0, 0))),
        )
        panels.append(Panel(pid, tuple(edges), placement, str(pd.get("group", ""))))

    stitches = []
    for sd in doc.get("stitches", []):
        a = _req(sd, "a", "stitch")
        b = _req(sd, "b", "stitch")
        stitches.append(
            Stitch(str(a[0]), int(a[1]), str(b[0]), int(b[1]), bool(sd.get("reversed", False)))
        )

    panels_t, stitches_t = normalize_orientation(panels, stitches)
    pattern = SewingPattern(panels_t, canonicalize_stitches(stitches_t), category)
    violations = validate(pattern, registry=registry)
    if violations:
        raise PatternValidationError(violations)
    return pattern


def parse_pattern(text: str, registry=None) -> SewingPattern:
    """Parse a sewkit/1 pattern document; returns a validated pattern.

    Parsing, serializing and parsing again is idempotent: panel orientation
    is normalized to counter-clockwise and stitches are canonically ordered
    on the first parse.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PatternSyntaxError(exc.msg, exc.lineno, exc.colno) from exc
    return pattern_from_doc(doc, registry=registry)


def pattern_to_doc(pattern: SewingPattern) -> dict:
    return {
        "format": FORMAT_TAG,
        "category": pattern.category,
        "panels": [
            {
                "id": p.id,
                "group": p.group_tag,
                "placement": {"t": list(p.placement.translation), "r": list(p.placement.rotation)},
                "edges": [
                    {
                        "start": list(e.start),
                        "end": list(e.end),
                        "control": list(e.control) if e.control else None,
                    }
                    for e in p.edges
                ],
            }
            for p in pattern.panels
        ],
        "stitches": [
            {"a": [s.panel_a, s.edge_a], "b": [s.panel_b, s.edge_b], "reversed": s.reversed}
            for s in pattern.stitches
        ],
    }


def serialize_pattern(pattern: SewingPattern) -> str:
    return json.dumps(pattern_to_doc(pattern), indent=1)
