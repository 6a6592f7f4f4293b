"""Embedding-to-maps solvers.

Two routes produce UV-position maps:

  * a small trainable decoder (dense layers into per-panel coarse grids,
    bilinearly upsampled to full resolution) with hand-written
    reverse-mode gradients and an Adam training loop;
  * a direct sewing solver that gradient-descends the maps themselves
    under the structure losses, with one pinned waist point to remove the
    rigid-motion null space when no position targets are present.

Both are fully reproducible from (seed, config, data).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from sewkit.geometry import SewingPattern
from sewkit.groups import Embedding, GroupRegistry
from sewkit.losses import LossReport, LossWeights, TARGET_SPACING, loss_total
from sewkit.uvmaps import GRID_SIZE, PanelMaps


class SolverError(ValueError):
    pass


class DivergenceError(RuntimeError):
    """Total loss became non-finite during optimization."""


# ---------------------------------------------------------------------------
# Bilinear upsampling (align-corners), precomputed as a dense (size, coarse)
# weight matrix per axis; adjoint is the transpose.

_upsample_cache: dict[tuple[int, int], np.ndarray] = {}


def _upsample_matrix(coarse: int, size: int) -> np.ndarray:
    key = (coarse, size)
    if key not in _upsample_cache:
        t = np.linspace(0.0, coarse - 1.0, size)
        i0 = np.clip(np.floor(t).astype(int), 0, coarse - 2)
        f = t - i0
        u = np.zeros((size, coarse))
        u[np.arange(size), i0] = 1 - f
        u[np.arange(size), i0 + 1] += f
        _upsample_cache[key] = u
    return _upsample_cache[key]


def upsample(coarse_map: np.ndarray, size: int) -> np.ndarray:
    u = _upsample_matrix(coarse_map.shape[0], size)
    return np.einsum("rc,cdk,sd->rsk", u, coarse_map, u, optimize=True)


def upsample_adjoint(grad: np.ndarray, coarse: int) -> np.ndarray:
    u = _upsample_matrix(coarse, grad.shape[0])
    return np.einsum("rc,rsk,sd->cdk", u, grad, u, optimize=True)


# ---------------------------------------------------------------------------
# Decoder


@dataclass
class DecoderParams:
    """Dense trunk plus one linear coarse-grid head per panel slot.

    ``input_scale`` standardizes the embedding per component before the
    first dense layer (raw PCA coefficients are in centimeters and would
    saturate the tanh trunk); it is data-derived at initialization and
    frozen, not trained.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    head_w: list[np.ndarray]
    head_b: list[np.ndarray]
    slots: tuple[str, ...]  # "group:role" per head
    input_scale: np.ndarray = None  # type: ignore[assignment]
    coarse: int = 16
    size: int = GRID_SIZE
    activation: str = "tanh"  # tanh | linear

    def __post_init__(self):
        if self.input_scale is None:
            self.input_scale = np.ones(self.w1.shape[0])

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    def arrays(self) -> list[np.ndarray]:
        out = [self.w1, self.b1, self.w2, self.b2]
        for w, b in zip(self.head_w, self.head_b):
            out.extend((w, b))
        return out

    def copy(self) -> "DecoderParams":
        return DecoderParams(
            self.w1.copy(),
            self.b1.copy(),
            self.w2.copy(),
            self.b2.copy(),
            [w.copy() for w in self.head_w],
            [b.copy() for b in self.head_b],
            self.slots,
            self.input_scale.copy(),
            self.coarse,
            self.size,
            self.activation,
        )


def init_decoder_params(
    registry: GroupRegistry,
    input_dim: int,
    seed: int = 0,
    hidden: tuple[int, int] = (256, 512),
    coarse: int = 16,
    size: int = GRID_SIZE,
    activation: str = "tanh",
) -> DecoderParams:
    rng = np.random.default_rng(seed)
    slots = tuple(f"{g}:{r}" for g, r in registry.panel_slots())
    h1, h2 = hidden
    out_dim = coarse * coarse * 3

    def dense(n_in, n_out, scale=1.0):
        return rng.normal(0.0, scale / np.sqrt(n_in), (n_in, n_out))

    return DecoderParams(
        dense(input_dim, h1),
        np.zeros(h1),
        dense(h1, h2),
        np.zeros(h2),
        [dense(h2, out_dim, 0.01) for _ in slots],
        [np.zeros(out_dim) for _ in slots],
        slots,
        np.ones(input_dim),
        coarse,
        size,
        activation,
    )


def fit_input_scale(params: DecoderParams, embeddings: Sequence[Embedding]) -> None:
    """Set the frozen input standardization from the training embeddings:
    1/std per coefficient, 1 where a component never varies."""
    x = np.stack([e.flat() for e in embeddings])
    std = x.std(axis=0)
    params.input_scale = np.where(std > 1e-9, 1.0 / np.maximum(std, 1e-9), 1.0)


def set_head_bias_to_mean(params: DecoderParams, mean_maps: Mapping[str, np.ndarray]) -> None:
    """Initialize each head's bias to a coarse downsample of the dataset-mean
    map for that slot, so training starts near the data instead of at zero."""
    for t, slot in enumerate(params.slots):
        if slot not in mean_maps:
            continue
        full = np.asarray(mean_maps[slot], dtype=float)
        u = _upsample_matrix(params.coarse, params.size)
        # least-squares-ish restriction: normalized adjoint of the upsample
        w = u.sum(axis=0)
        coarse = np.einsum("rc,rsk,sd->cdk", u, full, u, optimize=True) / np.outer(w, w)[..., None]
        params.head_b[t] = coarse.ravel()


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(x) if kind == "tanh" else x


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    return 1.0 - z**2 if kind == "tanh" else np.ones_like(z)


def decode(e: Embedding | np.ndarray, params: DecoderParams) -> dict[str, np.ndarray]:
    """Forward pass: embedding -> one (size, size, 3) map per panel slot."""
    maps, _ = decode_with_cache(e, params)
    return maps


def decode_with_cache(e: Embedding | np.ndarray, params: DecoderParams):
    raw = e.flat() if isinstance(e, Embedding) else np.asarray(e, dtype=float)
    if raw.shape != (params.input_dim,):
        raise SolverError(f"embedding dim {raw.shape} does not match decoder {params.input_dim}")
    gamma = raw * params.input_scale
    z1 = _act(gamma @ params.w1 + params.b1, params.activation)
    z2 = _act(z1 @ params.w2 + params.b2, params.activation)
    maps: dict[str, np.ndarray] = {}
    coarse_maps = []
    for t, slot in enumerate(params.slots):
        c = (z2 @ params.head_w[t] + params.head_b[t]).reshape(params.coarse, params.coarse, 3)
        coarse_maps.append(c)
        maps[slot] = upsample(c, params.size)
    return maps, {"gamma": gamma, "z1": z1, "z2": z2, "coarse": coarse_maps}


def decoder_backward(
    params: DecoderParams, cache: dict, upstream: Mapping[str, np.ndarray]
) -> tuple[DecoderParams, np.ndarray]:
    """Exact reverse-mode gradients of decode.

    ``upstream`` maps slot tags to dL/dY fields (missing slots count as
    zero). Returns gradients shaped like the parameters plus dL/dgamma.
    """
    gamma, z1, z2 = cache["gamma"], cache["z1"], cache["z2"]
    g_head_w = [np.zeros_like(w) for w in params.head_w]
    g_head_b = [np.zeros_like(b) for b in params.head_b]
    g_z2 = np.zeros_like(z2)
    for t, slot in enumerate(params.slots):
        up = upstream.get(slot)
        if up is None:
            continue
        if up.shape != (params.size, params.size, 3):
            raise SolverError(f"upstream shape {up.shape} for slot {slot!r}")
        g_coarse = upsample_adjoint(np.asarray(up, dtype=float), params.coarse).ravel()
        g_head_w[t] = np.outer(z2, g_coarse)
        g_head_b[t] = g_coarse
        g_z2 += params.head_w[t] @ g_coarse
    g_pre2 = g_z2 * _act_grad(z2, params.activation)
    g_w2 = np.outer(z1, g_pre2)
    g_b2 = g_pre2
    g_z1 = params.w2 @ g_pre2
    g_pre1 = g_z1 * _act_grad(z1, params.activation)
    g_w1 = np.outer(gamma, g_pre1)
    g_b1 = g_pre1
    # chain through the frozen input standardization back to the raw gamma
    g_gamma = (params.w1 @ g_pre1) * params.input_scale
    grads = DecoderParams(
        g_w1, g_b1, g_w2, g_b2, g_head_w, g_head_b,
        params.slots, np.zeros_like(params.input_scale), params.coarse, params.size,
        params.activation,
    )
    return grads, g_gamma


# ---------------------------------------------------------------------------
# Adam


class Adam:
    def __init__(self, shapes: Sequence[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(a) for a in shapes]
        self.v = [np.zeros_like(a) for a in shapes]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        b1c = 1 - self.beta1**self.t
        b2c = 1 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 40
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    spacing: float = TARGET_SPACING
    decay: str = "none"  # none | cosine

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise SolverError("learning rate, batch size and epochs must be positive")
        if self.decay not in ("none", "cosine"):
            raise SolverError(f"unknown decay {self.decay!r}")

    def lr_at(self, batch_index: int, total_batches: int) -> float:
        if self.decay == "none":
            return self.learning_rate
        frac = batch_index / max(total_batches - 1, 1)
        warmup = 0.06
        if frac < warmup:
            return self.learning_rate * frac / warmup
        frac = (frac - warmup) / (1 - warmup)
        return self.learning_rate * (0.02 + 0.98 * 0.5 * (1 + np.cos(np.pi * frac)))


@dataclass(frozen=True)
class TrainItem:
    """One training garment: its embedding, pattern, and per-panel ground
    truth, plus the slot tag for each panel id."""

    embedding: Embedding
    pattern: SewingPattern
    targets: Mapping[str, PanelMaps]

    def slot_of_panel(self) -> dict[str, str]:
        return {p.id: p.group_tag for p in self.pattern.panels}


def train(
    dataset: Sequence[TrainItem], cfg: TrainConfig, params: DecoderParams
) -> tuple[DecoderParams, list[dict[str, float]]]:
    """Adam training of the decoder under the weighted structure losses.

    Ground-truth masks gate every term (the inverse-PCA masks are an
    inference-time concern). History holds one record per batch with the
    per-term means and the total. Raises DivergenceError on non-finite loss.
    """
    if not dataset:
        raise SolverError("empty dataset")
    params = params.copy()
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(params.arrays(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    history: list[dict[str, float]] = []
    n = len(dataset)
    batches_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_batches = cfg.epochs * batches_per_epoch
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = [dataset[i] for i in order[start : start + cfg.batch_size]]
            g_accum = [np.zeros_like(a) for a in params.arrays()]
            record = {"rec": 0.0, "inn": 0.0, "int": 0.0, "nor": 0.0, "total": 0.0}
            for item in batch:
                maps, cache = decode_with_cache(item.embedding, params)
                slot_of = item.slot_of_panel()
                ys = {pid: maps[slot] for pid, slot in slot_of.items()}
                report = loss_total(
                    ys, item.targets, item.pattern, cfg.weights, cfg.spacing
                )
                if not np.isfinite(report.total):
                    raise DivergenceError(f"non-finite loss at batch {len(history)}")
                upstream = {slot_of[pid]: g for pid, g in report.gradients.items()}
                grads, _ = decoder_backward(params, cache, upstream)
                for acc, g in zip(g_accum, grads.arrays()):
                    acc += g / len(batch)
                for k, v in report.values.items():
                    record[k] += v / len(batch)
                record["total"] += report.total / len(batch)
            opt.lr = cfg.lr_at(len(history), total_batches)
            opt.step(params.arrays(), g_accum)
            history.append(record)
    return params, history


# ---------------------------------------------------------------------------
# Direct sewing


@dataclass(frozen=True)
class SewConfig:
    """Gradient descent directly over the position maps.

    With targets and weights.rec > 0 this reproduces the training loss; with
    weights.rec = 0 the structure losses drive the maps and one designated
    waist point is pinned to remove the translation null space (to the
    target position when targets exist, else to its initial value).
    """

    steps: int = 2000
    step_size: float = 0.05
    weights: LossWeights = field(default_factory=LossWeights)
    init: str = "placement"  # placement | flat | given
    seed: int = 0
    init_jitter: float = 1e-3
    spacing: float = TARGET_SPACING
    record_every: int = 1
    decay: str = "cosine"  # cosine | none; step-size schedule
    optimizer: str = "adam"  # adam | sgd; sgd is exactly rotation-equivariant

    def __post_init__(self):
        if self.steps < 1 or self.step_size <= 0:
            raise SolverError("steps and step size must be positive")
        if self.decay not in ("cosine", "none"):
            raise SolverError(f"unknown decay {self.decay!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise SolverError(f"unknown optimizer {self.optimizer!r}")

    def step_size_at(self, step: int) -> float:
        if self.decay == "none":
            return self.step_size
        frac = step / max(self.steps - 1, 1)
        return self.step_size * (0.02 + 0.98 * 0.5 * (1 + np.cos(np.pi * frac)))


def _anchor_pixel(masks: Mapping[str, "object"], panel_order: Sequence[str]) -> tuple[str, int, int]:
    """Designated waist point: topmost masked row (largest v = garment top is
    stored at the highest y, i.e. largest row origin... rows grow with y), so
    take the last masked row, leftmost column, of the first panel."""
    pid = panel_order[0]
    grid = masks[pid].grid
    rows = np.nonzero(grid.any(axis=1))[0]
    row = rows[-1]
    col = np.nonzero(grid[row])[0][0]
    return pid, int(row), int(col)


def init_maps(
    pattern: SewingPattern,
    masks: Mapping[str, "object"],
    mode: str,
    seed: int = 0,
    jitter: float = 1e-3,
    given: Mapping[str, np.ndarray] | None = None,
) -> dict[str, np.ndarray]:
    """Starting maps: the panel plane embedded at z=0 ("flat"), optionally
    moved by each panel's placement hint ("placement"), or caller-provided
    ("given"). A small seeded jitter breaks flat-start symmetry."""
    rng = np.random.default_rng(seed)
    out: dict[str, np.ndarray] = {}
    for p in pattern.panels:
        mask = masks[p.id]
        if mode == "given":
            if given is None or p.id not in given:
                raise SolverError(f"init mode 'given' needs maps for panel {p.id!r}")
            out[p.id] = np.asarray(given[p.id], dtype=float).copy()
            continue
        pts = mask.pixel_points()
        y = np.concatenate([pts, np.zeros((*pts.shape[:2], 1))], axis=-1)
        if mode == "placement":
            rot = p.placement.matrix()
            y = y @ rot.T + np.asarray(p.placement.translation)
        elif mode != "flat":
            raise SolverError(f"unknown init mode {mode!r}")
        if jitter > 0:
            y = y + rng.normal(0.0, jitter, y.shape)
        out[p.id] = y
    return out


def extend_maps(
    ys: Mapping[str, np.ndarray],
    defined: Mapping[str, np.ndarray],
    rings: int = 3,
) -> dict[str, np.ndarray]:
    """Fill pixels outside the defined set by first-order extrapolation from
    their defined neighbors, ring by ring.

    Only defined pixels carry meaning after direct sewing; consumers that
    sample near the mask boundary (mesh readout, seam evaluation) need the
    bordering texels to continue the surface instead of holding stale
    initialization values.
    """
    out: dict[str, np.ndarray] = {}
    for pid, y_full in ys.items():
        y_full = np.asarray(y_full, dtype=float).copy()
        known_full = np.asarray(defined[pid], dtype=bool)
        rows = np.nonzero(known_full.any(axis=1))[0]
        cols = np.nonzero(known_full.any(axis=0))[0]
        if not len(rows):
            out[pid] = y_full
            continue
        pad = rings + 2
        r0 = max(rows[0] - pad, 0)
        r1 = min(rows[-1] + pad + 1, known_full.shape[0])
        c0 = max(cols[0] - pad, 0)
        c1 = min(cols[-1] + pad + 1, known_full.shape[1])
        y = y_full[r0:r1, c0:c1].copy()
        known = known_full[r0:r1, c0:c1].copy()
        h, w = known.shape
        for _ in range(rings):
            fill_val = np.zeros_like(y)
            fill_cnt = np.zeros((h, w))
            for axis, step in ((0, 1), (0, -1), (1, 1), (1, -1)):
                n1 = np.roll(y, step, axis=axis)
                k1 = np.roll(known, step, axis=axis)
                n2 = np.roll(y, 2 * step, axis=axis)
                k2 = np.roll(known, 2 * step, axis=axis)
                # roll wraps around; kill the wrapped lanes
                dim = known.shape[axis]
                wrap = [slice(None)] * 2
                wrap[axis] = slice(0, 1) if step > 0 else slice(dim - 1, dim)
                k1[tuple(wrap)] = False
                wrap[axis] = slice(0, 2) if step > 0 else slice(dim - 2, dim)
                k2[tuple(wrap)] = False
                est = np.where((k1 & k2)[..., None], 2 * n1 - n2, n1)
                sel = ~known & k1
                fill_val[sel] += est[sel]
                fill_cnt[sel] += 1
            grew = fill_cnt > 0
            if not grew.any():
                break
            y[grew] = fill_val[grew] / fill_cnt[grew][:, None]
            known |= grew
        y_full[r0:r1, c0:c1] = y
        out[pid] = y_full
    return out


def sew_direct(
    pattern: SewingPattern,
    masks: Mapping[str, "object"],
    targets: Mapping[str, PanelMaps] | None = None,
    cfg: SewConfig = SewConfig(),
    given: Mapping[str, np.ndarray] | None = None,
) -> tuple[dict[str, np.ndarray], list[dict[str, float]]]:
    """Optimize all panels' maps jointly with Adam under the losses.

    Returns the final maps (with never-optimized texels extrapolated from
    the mask interior) and a history of per-term values per recorded step.
    Raises DivergenceError if the total stops being finite.
    """
    panel_order = [p.id for p in pattern.panels]
    ys = init_maps(pattern, masks, cfg.init, cfg.seed, cfg.init_jitter, given)

    anchored = targets is None or cfg.weights.rec == 0.0
    anchor = None
    if anchored:
        pid, ai, aj = _anchor_pixel(masks, panel_order)
        if targets is not None:
            value = targets[pid].positions[ai, aj].copy()
            # The structure losses are translation invariant, so the garment
            # stays near its starting centroid; shift the whole init rigidly
            # onto the pin instead of fighting it with one pixel.
            shift = value - ys[pid][ai, aj]
            for arr in ys.values():
                arr += shift
        else:
            value = ys[pid][ai, aj].copy()
        anchor = (pid, ai, aj, value)
        ys[pid][ai, aj] = value

    if targets is None:
        # Structure-only: build position-free pseudo targets carrying masks.
        eval_targets = {
            pid: PanelMaps(masks[pid], np.zeros((*masks[pid].grid.shape, 3)), None)
            for pid in panel_order
        }
        weights = replace(cfg.weights, rec=0.0, nor=0.0)
    else:
        eval_targets = dict(targets)
        weights = cfg.weights

    # Only masked texels are free variables. Texels outside the mask are
    # re-derived from the interior every step (the seam stencils read them),
    # so the seam term cannot park phantom geometry in unconstrained pixels.
    mask_of = {pid: masks[pid].grid for pid in panel_order}

    def refresh_extension():
        ext = extend_maps(ys, mask_of)
        for pid in panel_order:
            outside = ~mask_of[pid]
            ys[pid][outside] = ext[pid][outside]

    refresh_extension()
    arrays = [ys[pid] for pid in panel_order]
    opt = Adam(arrays, cfg.step_size)
    history: list[dict[str, float]] = []
    for step in range(cfg.steps):
        report = loss_total(ys, eval_targets, pattern, weights, cfg.spacing)
        if not np.isfinite(report.total):
            raise DivergenceError(f"non-finite loss at step {step}")
        if step % cfg.record_every == 0:
            history.append({**report.values, "total": report.total})
        grads = [report.gradients[pid] for pid in panel_order]
        for gi, pid in enumerate(panel_order):
            grads[gi][~mask_of[pid]] = 0.0
        if anchor is not None:
            pid, ai, aj, _ = anchor
            grads[panel_order.index(pid)][ai, aj] = 0.0
        lr = cfg.step_size_at(step)
        if cfg.optimizer == "sgd":
            for arr, g in zip(arrays, grads):
                arr -= lr * g
        else:
            opt.lr = lr
            opt.step(arrays, grads)
        if anchor is not None:
            pid, ai, aj, value = anchor
            ys[pid][ai, aj] = value
        refresh_extension()
    final = loss_total(ys, eval_targets, pattern, weights, cfg.spacing)
    history.append({**final.values, "total": final.total})
    return ys, history


# ---------------------------------------------------------------------------
# Checkpoints
#
# Byte layout (little-endian):
#   magic        8 bytes b"SEWKDEC1"
#   u32 x6       input_dim, hidden1, hidden2, coarse, size, slot count
#   u16+bytes    activation name
#   u32 x2       seed, epoch
#   f64 arrays   input_scale, w1, b1, w2, b2
#   per slot:    u16+bytes slot tag, f64 arrays head_w, head_b

_CKPT_MAGIC = b"SEWKDEC1"


def save_checkpoint(path, params: DecoderParams, seed: int = 0, epoch: int = 0) -> None:
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        h1 = params.w1.shape[1]
        h2 = params.w2.shape[1]
        f.write(
            struct.pack(
                "<6I", params.input_dim, h1, h2, params.coarse, params.size, len(params.slots)
            )
        )
        act = params.activation.encode()
        f.write(struct.pack("<H", len(act)) + act)
        f.write(struct.pack("<II", seed, epoch))
        for arr in (params.input_scale, params.w1, params.b1, params.w2, params.b2):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for slot, w, b in zip(params.slots, params.head_w, params.head_b):
            sb = slot.encode()
            f.write(struct.pack("<H", len(sb)) + sb)
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[DecoderParams, int, int]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != _CKPT_MAGIC:
        raise SolverError(f"not a decoder checkpoint: {path}")
    input_dim, h1, h2, coarse, size, n_slots = struct.unpack_from("<6I", data, 8)
    off = 8 + 24
    (alen,) = struct.unpack_from("<H", data, off)
    off += 2
    activation = data[off : off + alen].decode()
    off += alen
    seed, epoch = struct.unpack_from("<II", data, off)
    off += 8

    def read(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(data, "<f8", n, off).reshape(shape).copy()
        off += n * 8
        return arr

    input_scale = read((input_dim,))
    w1 = read((input_dim, h1))
    b1 = read((h1,))
    w2 = read((h1, h2))
    b2 = read((h2,))
    out_dim = coarse * coarse * 3
    slots = []
    head_w = []
    head_b = []
    for _ in range(n_slots):
        (slen,) = struct.unpack_from("<H", data, off)
        off += 2
        slots.append(data[off : off + slen].decode())
        off += slen
        head_w.append(read((h2, out_dim)))
        head_b.append(read((out_dim,)))
    params = DecoderParams(
        w1, b1, w2, b2, head_w, head_b, tuple(slots), input_scale, coarse, size, activation
    )
    return params, seed, epoch


def checkpoint_hash(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()[:16]
