"""Structure-preserving losses over UV-position maps.

Four terms, each returning a scalar and its analytic gradient with respect
to the position maps:

  rec  - per-pixel L1 distance to the ground-truth positions,
  inn  - adjacent masked pixel pairs should sit one grid step apart in 3D,
  int  - stitched edge points should coincide in 3D,
  nor  - surface normals recomputed from the maps should match the targets.

Every term is normalized by its contributing-element count (pixels, pairs,
stitch points) so magnitudes are resolution-independent while the published
weight ratios stay meaningful. L1 subgradients at zero are taken as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from sewkit.geometry import DEFAULT_EDGE_POINTS, SewingPattern, discretize_edge
from sewkit.uvmaps import (
    MapError,
    MaskMap,
    PanelMaps,
    PIXEL_PITCH,
    bilinear_cell,
    masked_diff,
    masked_diff_adjoint,
    masked_diff_modes,
)

# Grid step target of the inner-panel loss; equals the pixel pitch so an
# undeformed garment patch spans one pixel per step.
TARGET_SPACING = PIXEL_PITCH


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total training loss."""

    rec: float = 1.0
    inn: float = 1e-3
    int_: float = 1e-4
    nor: float = 1e-2

    def as_dict(self) -> dict[str, float]:
        return {"rec": self.rec, "inn": self.inn, "int": self.int_, "nor": self.nor}


@dataclass
class LossReport:
    """Per-term values, weighted total, and per-panel gradient fields."""

    values: dict[str, float]
    total: float
    gradients: dict[str, np.ndarray]
    weights: LossWeights = field(default_factory=LossWeights)

    def to_text(self) -> str:
        lines = [f"{k} {v:.17g}" for k, v in self.values.items()]
        lines.append(f"total {self.total:.17g}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Term internals: each returns (sum, element count, gradient of the sum) so
# multi-panel totals can normalize by the global element count.


def _rec_parts(y, y_hat, mask):
    m3 = mask[..., None]
    diff = np.where(m3, y - y_hat, 0.0)
    total = float(np.abs(diff).sum())
    return total, int(mask.sum()), np.sign(diff)


def loss_rec(y: np.ndarray, y_hat: np.ndarray, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean per-pixel L1 distance between predicted and target positions
    over the target mask."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise LossError("empty mask")
    total, count, grad = _rec_parts(np.asarray(y, float), np.asarray(y_hat, float), mask)
    return total / count, grad / count


def _inn_axis_parts(y, mask, s, axis):
    pair = mask & np.roll(mask, -1, axis=axis)
    if axis == 0:
        pair[-1, :] = False
    else:
        pair[:, -1] = False
    d = np.roll(y, -1, axis=axis) - y
    norm = np.linalg.norm(d, axis=-1)
    dev = np.where(pair, norm - s, 0.0)
    total = float(np.abs(dev).sum())
    safe = np.where(norm > 0, norm, 1.0)
    unit = np.where(pair[..., None] & (norm > 0)[..., None], d / safe[..., None], 0.0)
    g_pair = np.sign(dev)[..., None] * unit
    grad = np.roll(g_pair, 1, axis=axis) - g_pair
    # roll wraparound: pair is False on the last row/col, so lane 0 gets zeros
    return total, int(pair.sum()), grad, dev, pair


def _inn_parts(y, mask, s):
    t0, c0, g0, _, _ = _inn_axis_parts(y, mask, s, axis=0)
    t1, c1, g1, _, _ = _inn_axis_parts(y, mask, s, axis=1)
    return t0 + t1, c0 + c1, g0 + g1


def loss_inn(y: np.ndarray, mask: np.ndarray, s: float = TARGET_SPACING) -> tuple[float, np.ndarray]:
    """Isometry term: mean deviation of adjacent masked-pixel distances from
    the grid step s. Pairs need both pixels masked."""
    if s <= 0:
        raise LossError(f"s must be positive, got {s}")
    mask = np.asarray(mask, dtype=bool)
    total, count, grad = _inn_parts(np.asarray(y, float), mask, s)
    if count == 0:
        raise LossError("no valid neighbor pairs")
    return total / count, grad / count


def stitch_edge_uv(
    pattern: SewingPattern, masks: Mapping[str, MaskMap], m: int = DEFAULT_EDGE_POINTS
) -> list[tuple[str, np.ndarray, str, np.ndarray]]:
    """Per stitch: both edges discretized to m points and mapped into their
    panels' UV frames, with edge b's order already flipped when the stitch
    says so."""
    out = []
    for st in pattern.stitches:
        pa = pattern.panel_by_id(st.panel_a)
        pb = pattern.panel_by_id(st.panel_b)
        uv_a = masks[st.panel_a].uv_of(discretize_edge(pa.edges[st.edge_a], m))
        uv_b = masks[st.panel_b].uv_of(discretize_edge(pb.edges[st.edge_b], m))
        if st.reversed:
            uv_b = uv_b[::-1]
        out.append((st.panel_a, uv_a, st.panel_b, uv_b))
    return out


def _sample_with_cells(y, uv):
    h, w = y.shape[:2]
    if np.any(uv < -1e-9) or np.any(uv[:, 0] > w - 1 + 1e-9) or np.any(uv[:, 1] > h - 1 + 1e-9):
        raise MapError("uv-out-of-range", "stitch edge leaves the map")
    uv = np.clip(uv, 0.0, [w - 1, h - 1])
    j0, i0, fu, fv = bilinear_cell(uv, h, w)
    w00 = (1 - fu) * (1 - fv)
    w01 = fu * (1 - fv)
    w10 = (1 - fu) * fv
    w11 = fu * fv
    vals = (
        y[i0, j0] * w00[:, None]
        + y[i0, j0 + 1] * w01[:, None]
        + y[i0 + 1, j0] * w10[:, None]
        + y[i0 + 1, j0 + 1] * w11[:, None]
    )
    return vals, (i0, j0, w00, w01, w10, w11)


def _scatter_bilinear(grad_map, cells, g):
    i0, j0, w00, w01, w10, w11 = cells
    np.add.at(grad_map, (i0, j0), g * w00[:, None])
    np.add.at(grad_map, (i0, j0 + 1), g * w01[:, None])
    np.add.at(grad_map, (i0 + 1, j0), g * w10[:, None])
    np.add.at(grad_map, (i0 + 1, j0 + 1), g * w11[:, None])


def _int_parts(ys, pattern, masks, m):
    grads = {pid: np.zeros_like(y) for pid, y in ys.items()}
    total = 0.0
    count = 0
    for pid_a, uv_a, pid_b, uv_b in stitch_edge_uv(pattern, masks, m):
        va, cells_a = _sample_with_cells(ys[pid_a], uv_a)
        vb, cells_b = _sample_with_cells(ys[pid_b], uv_b)
        diff = va - vb
        total += float(np.abs(diff).sum())
        count += len(uv_a)
        sg = np.sign(diff)
        _scatter_bilinear(grads[pid_a], cells_a, sg)
        _scatter_bilinear(grads[pid_b], cells_b, -sg)
    return total, count, grads


def loss_int(
    ys: Mapping[str, np.ndarray],
    pattern: SewingPattern,
    masks: Mapping[str, MaskMap],
    m: int = DEFAULT_EDGE_POINTS,
) -> tuple[float, dict[str, np.ndarray]]:
    """Seam term: mean L1 gap between the 3D images of stitched edge points,
    sampled bilinearly from both panels' maps."""
    total, count, grads = _int_parts(dict(ys), pattern, masks, m)
    if count == 0:
        raise LossError("pattern has no stitches")
    return total / count, {pid: g / count for pid, g in grads.items()}


def _nor_parts(y, n_hat, mask):
    modes_u = masked_diff_modes(mask, axis=1)
    modes_v = masked_diff_modes(mask, axis=0)
    du = masked_diff(y, modes_u, axis=1)
    dv = masked_diff(y, modes_v, axis=0)
    c = np.cross(du, dv)
    norm = np.linalg.norm(c, axis=-1)
    target_ok = np.linalg.norm(n_hat, axis=-1) > 0.5
    ok = (modes_u > 0) & (modes_v > 0) & (norm > 1e-9) & target_ok & mask
    safe = np.where(ok, norm, 1.0)
    # cos(N, N_hat) with N = -c/|c|, so each pixel contributes (c . n_hat)/|c|
    dot = np.einsum("ijk,ijk->ij", c, n_hat)
    terms = np.where(ok, dot / safe, 0.0)
    total = float(terms.sum())
    g_c = n_hat / safe[..., None] - c * (dot / safe**3)[..., None]
    g_c = np.where(ok[..., None], g_c, 0.0)
    grad_du = np.cross(dv, g_c)
    grad_dv = np.cross(g_c, du)
    grad = masked_diff_adjoint(grad_du, modes_u, axis=1)
    grad += masked_diff_adjoint(grad_dv, modes_v, axis=0)
    return total, int(ok.sum()), grad, norm, ok


def loss_nor(y: np.ndarray, n_hat: np.ndarray, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Normal term: mean of -cos between normals recomputed from the map and
    the target normals; gradient flows through the finite differences, the
    cross product and the normalization. Sentinel targets are skipped."""
    mask = np.asarray(mask, dtype=bool)
    total, count, grad, _, _ = _nor_parts(np.asarray(y, float), np.asarray(n_hat, float), mask)
    if count == 0:
        raise LossError("all pixels sentinel")
    return total / count, grad / count


def loss_total(
    ys: Mapping[str, np.ndarray],
    targets: Mapping[str, PanelMaps],
    pattern: SewingPattern,
    weights: LossWeights = LossWeights(),
    s: float = TARGET_SPACING,
    m: int = DEFAULT_EDGE_POINTS,
) -> LossReport:
    """Weighted total over every panel. Each term is the global mean over
    its contributing elements across all panels, so single-panel inputs
    reduce to the per-term functions exactly. Zero-weighted terms are not
    evaluated (their value reports as 0)."""
    ys = {pid: np.asarray(y, float) for pid, y in ys.items()}
    grads = {pid: np.zeros_like(y) for pid, y in ys.items()}
    sums = {"rec": 0.0, "inn": 0.0, "int": 0.0, "nor": 0.0}
    counts = {"rec": 0, "inn": 0, "int": 0, "nor": 0}
    term_grads = {k: {pid: np.zeros_like(y) for pid, y in ys.items()} for k in sums}

    for pid, y in ys.items():
        tgt = targets[pid]
        mask = tgt.mask.grid
        if weights.rec != 0.0:
            t, c, g = _rec_parts(y, tgt.positions, mask)
            sums["rec"] += t
            counts["rec"] += c
            term_grads["rec"][pid] = g
        if weights.inn != 0.0:
            t, c, g = _inn_parts(y, mask, s)
            sums["inn"] += t
            counts["inn"] += c
            term_grads["inn"][pid] = g
        n_hat = tgt.normals
        if n_hat is not None and weights.nor != 0.0:
            t, c, g, _, _ = _nor_parts(y, n_hat, mask)
            sums["nor"] += t
            counts["nor"] += c
            term_grads["nor"][pid] = g

    if weights.int_ != 0.0 and pattern.stitches:
        masks = {pid: targets[pid].mask for pid in ys}
        t, c, g_int = _int_parts(ys, pattern, masks, m)
        sums["int"] += t
        counts["int"] += c
        term_grads["int"] = g_int

    values: dict[str, float] = {}
    wmap = weights.as_dict()
    for k in sums:
        values[k] = sums[k] / counts[k] if counts[k] else 0.0
        if counts[k]:
            for pid in grads:
                grads[pid] += wmap[k] * term_grads[k][pid] / counts[k]
    total = sum(wmap[k] * values[k] for k in values)
    return LossReport(values, total, grads, weights)


# ---------------------------------------------------------------------------
# Finite-difference verification harness


def finite_diff_check(
    loss_fn: Callable[[Mapping[str, np.ndarray]], tuple[float, Mapping[str, np.ndarray]]],
    ys: Mapping[str, np.ndarray],
    step: float = 1e-3,
    n_coords: int = 200,
    seed: int = 0,
    sample_mask: Mapping[str, np.ndarray] | None = None,
    exclude: Mapping[str, np.ndarray] | None = None,
) -> float:
    """Worst relative error between the analytic gradient and central finite
    differences over a random masked coordinate subset.

    The probe is the central difference at ``step`` with one Richardson
    refinement (central stencils at step and step/2), which stays exact on
    quadratics while keeping curvature of the normalization terms from
    polluting coordinates whose true gradient happens to be tiny.

    ``exclude`` marks coordinates near L1 kinks (per-coordinate bool fields,
    shape (H, W, 3)); those are skipped since one-sided behavior there is
    expected, not a gradient bug.
    """
    if step <= 0:
        raise LossError("step must be positive")
    ys = {pid: np.asarray(y, float).copy() for pid, y in ys.items()}
    _, grads = loss_fn(ys)

    rng = np.random.default_rng(seed)
    candidates: list[tuple[str, int, int, int]] = []
    for pid, y in ys.items():
        sel = np.ones(y.shape, dtype=bool)
        if sample_mask is not None and pid in sample_mask:
            sel &= np.asarray(sample_mask[pid], dtype=bool)[..., None]
        if exclude is not None and pid in exclude:
            sel &= ~np.asarray(exclude[pid], dtype=bool)
        for i, j, k in zip(*np.nonzero(sel)):
            candidates.append((pid, int(i), int(j), int(k)))
    if not candidates:
        return 0.0
    idx = rng.permutation(len(candidates))[:n_coords]

    def central(pid, i, j, k, h):
        orig = ys[pid][i, j, k]
        ys[pid][i, j, k] = orig + h
        f_plus, _ = loss_fn(ys)
        ys[pid][i, j, k] = orig - h
        f_minus, _ = loss_fn(ys)
        ys[pid][i, j, k] = orig
        return (f_plus - f_minus) / (2 * h)

    worst = 0.0
    for ci in idx:
        pid, i, j, k = candidates[ci]
        fd = (4 * central(pid, i, j, k, step / 2) - central(pid, i, j, k, step)) / 3
        g = float(grads[pid][i, j, k])
        denom = max(abs(fd), abs(g))
        err = abs(fd - g) / denom if denom > 1e-12 else abs(fd - g)
        worst = max(worst, err)
    return worst


def kink_exclusion_rec(y, y_hat, mask, step):
    margin = 10.0 * step
    return (np.abs(y - y_hat) < margin) | ~np.asarray(mask, bool)[..., None]


def kink_exclusion_inn(y, mask, s, step):
    """Coordinates touching any pair whose length deviation (or length
    itself) sits within 10 steps of an absolute-value kink."""
    margin = 10.0 * step
    out = np.zeros(y.shape, dtype=bool)
    for axis in (0, 1):
        _, _, _, dev, pair = _inn_axis_parts(y, mask, s, axis)
        norm = np.linalg.norm(np.roll(y, -1, axis=axis) - y, axis=-1)
        near = pair & ((np.abs(dev) < margin) | (norm < margin))
        out |= near[..., None]
        out |= np.roll(near, 1, axis=axis)[..., None]
    return out


def kink_exclusion_int(ys, pattern, masks, m, step):
    margin = 10.0 * step
    out = {pid: np.zeros(y.shape, dtype=bool) for pid, y in ys.items()}
    for pid_a, uv_a, pid_b, uv_b in stitch_edge_uv(pattern, masks, m):
        va, cells_a = _sample_with_cells(ys[pid_a], uv_a)
        vb, cells_b = _sample_with_cells(ys[pid_b], uv_b)
        near = np.abs(va - vb) < margin  # (m, 3)
        for pid, cells in ((pid_a, cells_a), (pid_b, cells_b)):
            i0, j0 = cells[0], cells[1]
            for di in (0, 1):
                for dj in (0, 1):
                    np.logical_or.at(out[pid], (i0 + di, j0 + dj), near)
    return out


def kink_exclusion_nor(y, n_hat, mask, step):
    """The normal term is smooth; only pixels whose cross product could dip
    toward the degenerate cutoff are excluded (stencil spillover included)."""
    _, _, _, norm, ok = _nor_parts(np.asarray(y, float), np.asarray(n_hat, float), np.asarray(mask, bool))
    risky = ok & (norm < max(100.0 * step, 1e-6))
    spill = risky.copy()
    for axis in (0, 1):
        spill |= np.roll(risky, 1, axis=axis) | np.roll(risky, -1, axis=axis)
    return np.broadcast_to(spill[..., None], y.shape).copy()


# ---------------------------------------------------------------------------
# Standard randomized checks (used by the gradcheck CLI and the acceptance
# suite): smooth random maps over a disk mask, plus a two-panel stitched
# fixture for the seam term.


def _smooth_field(rng: np.random.Generator, size: int, amplitude: float) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    out = np.zeros((size, size))
    for _ in range(4):
        fu, fv = rng.uniform(0.3, 2.0, 2)
        pu, pv = rng.uniform(0, 2 * np.pi, 2)
        out += rng.uniform(-amplitude, amplitude) * np.sin(
            2 * np.pi * fu * ii / size + pu
        ) * np.cos(2 * np.pi * fv * jj / size + pv)
    return out


def _random_smooth_map(rng: np.random.Generator, size: int, scale: float = 1.3) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(size, dtype=float), np.arange(size, dtype=float), indexing="ij")
    return np.stack(
        [
            jj * scale + _smooth_field(rng, size, 0.4),
            ii * scale + _smooth_field(rng, size, 0.4),
            _smooth_field(rng, size, 1.5),
        ],
        axis=-1,
    )


def _disk_mask(size: int) -> np.ndarray:
    c = (size - 1) / 2
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    return (ii - c) ** 2 + (jj - c) ** 2 <= (0.42 * size) ** 2


def _stitch_fixture(size: int):
    """Two square panels joined on one edge, masks sized to the given grid."""
    from sewkit.geometry import Panel, SeamedEdge, SewingPattern, Stitch, panel_contour
    from sewkit.uvmaps import rasterize_masks

    side = (size - 4) * 1.0
    def square(pid, tag):
        return Panel(
            pid,
            (
                SeamedEdge((0.0, 0.0), (side, 0.0)),
                SeamedEdge((side, 0.0), (side, side)),
                SeamedEdge((side, side), (0.0, side)),
                SeamedEdge((0.0, side), (0.0, 0.0)),
            ),
            group_tag=tag,
        )

    pattern = SewingPattern(
        (square("a", "skirt-body:front"), square("b", "skirt-body:back")),
        (Stitch("a", 1, "b", 3, True),),
        "fixture",
    )
    contours = {p.id: panel_contour(p, 8) for p in pattern.panels}
    masks = rasterize_masks(contours, pitch=1.0, size=size)
    return pattern, masks


def standard_gradient_checks(
    seed: int = 0, size: int = 16, step: float = 1e-3, n_coords: int = 200
) -> dict[str, float]:
    """Max relative finite-difference error for each loss term on one seeded
    random map set; kink-adjacent coordinates excluded."""
    rng = np.random.default_rng(seed)
    mask = _disk_mask(size)
    y = _random_smooth_map(rng, size)
    y_hat = _random_smooth_map(rng, size)
    s = 1.45
    out: dict[str, float] = {}

    out["rec"] = finite_diff_check(
        lambda ys: (lambda r: (r[0], {"p": r[1]}))(loss_rec(ys["p"], y_hat, mask)),
        {"p": y},
        step,
        n_coords,
        seed,
        exclude={"p": kink_exclusion_rec(y, y_hat, mask, step)},
    )
    out["inn"] = finite_diff_check(
        lambda ys: (lambda r: (r[0], {"p": r[1]}))(loss_inn(ys["p"], mask, s)),
        {"p": y},
        step,
        n_coords,
        seed + 1,
        exclude={"p": kink_exclusion_inn(y, mask, s, step)},
    )

    pattern, masks = _stitch_fixture(size)
    ys2 = {"a": _random_smooth_map(rng, size), "b": _random_smooth_map(rng, size)}
    out["int"] = finite_diff_check(
        lambda ys: loss_int(ys, pattern, masks),
        ys2,
        step,
        n_coords,
        seed + 2,
        exclude=kink_exclusion_int(ys2, pattern, masks, DEFAULT_EDGE_POINTS, step),
    )

    n_hat = np.zeros_like(y)
    from sewkit.uvmaps import compute_normals

    n_hat = compute_normals(_random_smooth_map(rng, size), mask)
    out["nor"] = finite_diff_check(
        lambda ys: (lambda r: (r[0], {"p": r[1]}))(loss_nor(ys["p"], n_hat, mask)),
        {"p": y},
        step,
        n_coords,
        seed + 3,
        exclude={"p": kink_exclusion_nor(y, n_hat, mask, step)},
    )
    return out
