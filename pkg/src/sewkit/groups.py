"""Basic-panel-group registry and per-group PCA shape spaces.

A garment is a combination of panel groups: each group bundles a fixed set
of panel roles with fixed edge counts, giving a raw tensor of shape
(l_total, m, 2) once every seamed edge is discretized to m points. Each
group gets its own PCA basis; a garment embedding concatenates the per-group
coefficient blocks, zero-filled for groups the garment does not contain.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from sewkit.geometry import DEFAULT_EDGE_POINTS, SewingPattern, discretize_edge

# Coefficient count per group. Shared by every group basis.
DEFAULT_COMPONENTS = 12

_REGISTRY_MAGIC = b"SEWKPCA1"


class GroupError(ValueError):
    """Unknown group/role, unfitted basis, or shape mismatch."""


@dataclass(frozen=True)
class GroupDef:
    """One basic panel group: ordered panel roles with fixed edge counts."""

    name: str
    panel_roles: tuple[tuple[str, int], ...]

    @property
    def l_total(self) -> int:
        return sum(n for _, n in self.panel_roles)

    def role_names(self) -> tuple[str, ...]:
        return tuple(r for r, _ in self.panel_roles)


class GroupRegistry:
    """Ordered collection of group definitions; fixes group order, panel
    slot order, and the canonical row layout of group tensors."""

    def __init__(self, groups: Sequence[GroupDef]):
        self.groups = tuple(groups)
        self._by_name = {g.name: g for g in self.groups}
        if len(self._by_name) != len(self.groups):
            raise GroupError("duplicate group names in registry")

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.groups)

    def group(self, name: str) -> GroupDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise GroupError(f"unknown group {name!r}") from None

    def index_of(self, name: str) -> int:
        return self.group_names.index(name)

    def has_tag(self, tag: str) -> bool:
        if ":" not in tag:
            return False
        g, role = tag.split(":", 1)
        gd = self._by_name.get(g)
        return gd is not None and role in gd.role_names()

    def edge_count(self, tag: str) -> int:
        g, role = tag.split(":", 1)
        for r, n in self.group(g).panel_roles:
            if r == role:
                return n
        raise GroupError(f"unknown role {role!r} in group {g!r}")

    def panel_slots(self) -> tuple[tuple[str, str], ...]:
        """(group, role) pairs in canonical order: the decoder's output slots."""
        return tuple((g.name, r) for g in self.groups for r in g.role_names())

    def to_json(self) -> str:
        return json.dumps(
            {
                "groups": [
                    {"name": g.name, "roles": [{"role": r, "edges": n} for r, n in g.panel_roles]}
                    for g in self.groups
                ]
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "GroupRegistry":
        doc = json.loads(text)
        return cls(
            [
                GroupDef(g["name"], tuple((r["role"], int(r["edges"])) for r in g["roles"]))
                for g in doc["groups"]
            ]
        )


def default_registry() -> GroupRegistry:
    """Shipped desk-scale taxonomy: 6 groups / 10 panels.

    A stand-in with the same structure as the full-scale registry (which is
    reachable by loading a custom registry JSON); membership is fixed by the
    synthetic garment generator.
    """
    return GroupRegistry(
        [
            GroupDef("waistband", (("front", 4), ("back", 4))),
            GroupDef("skirt-body", (("front", 4), ("back", 4))),
            GroupDef("dress-body", (("front", 4), ("back", 4))),
            GroupDef("pants-left", (("leg", 6),)),
            GroupDef("pants-right", (("leg", 6),)),
            GroupDef("shirt-core", (("front", 4), ("back", 4))),
        ]
    )


# ---------------------------------------------------------------------------
# Group tensors


def assemble_group_tensor(
    pattern: SewingPattern, group: GroupDef, m: int = DEFAULT_EDGE_POINTS
) -> np.ndarray:
    """Stack the group's seamed edges into an (l_total, m, 2) tensor.

    Rows follow the registry-defined role order, then each panel's own edge
    order, so structurally identical patterns produce identical tensors.
    """
    rows = []
    by_tag = {p.group_tag: p for p in pattern.panels}
    for role, edge_count in group.panel_roles:
        tag = f"{group.name}:{role}"
        panel = by_tag.get(tag)
        if panel is None:
            raise GroupError(f"missing role: no panel tagged {tag!r}")
        if len(panel.edges) != edge_count:
            raise GroupError(
                f"edge-count mismatch for {tag!r}: expected {edge_count}, got {len(panel.edges)}"
            )
        for e in panel.edges:
            rows.append(discretize_edge(e, m))
    return np.stack(rows, axis=0)


def tensor_to_contours(group: GroupDef, tensor: np.ndarray) -> dict[str, np.ndarray]:
    """Per-role closed contours from a (possibly reconstructed) group tensor.

    Adjacent edge endpoints are welded by averaging, so slightly-open PCA
    reconstructions still yield closed loops; exact tensors are unchanged
    by the weld.
    """
    out: dict[str, np.ndarray] = {}
    row = 0
    for role, edge_count in group.panel_roles:
        edges = tensor[row : row + edge_count]
        row += edge_count
        pts = []
        n = edge_count
        for k in range(n):
            first = 0.5 * (edges[k, 0] + edges[(k - 1) % n, -1])
            pts.append(np.vstack([first[None, :], edges[k, 1:-1]]))
        out[role] = np.concatenate(pts, axis=0)
    return out


# ---------------------------------------------------------------------------
# PCA bases


@dataclass(frozen=True)
class GroupBasis:
    """PCA subspace of one group: mean tensor, components, fitted metadata.

    components has shape (l_total, m, 2, h); flattened columns are
    orthonormal, zero-padded past the data rank.
    """

    mean: np.ndarray
    components: np.ndarray
    h: int
    sample_count: int

    @property
    def flat_dim(self) -> int:
        return int(np.prod(self.mean.shape))

    def components_flat(self) -> np.ndarray:
        return self.components.reshape(self.flat_dim, self.h)


def fit_group_basis(samples: Sequence[np.ndarray], h: int = DEFAULT_COMPONENTS) -> GroupBasis:
    """Fit mean + top-h principal directions of the flattened sample matrix.

    Components are right singular vectors of the centered data ordered by
    decreasing singular value, with a deterministic sign convention (the
    entry of largest magnitude is positive); directions past the data rank
    are zero.
    """
    if not len(samples):
        raise GroupError("need at least one sample")
    shape = samples[0].shape
    for s in samples:
        if s.shape != shape:
            raise GroupError(f"sample shape mismatch: {s.shape} vs {shape}")
    x = np.stack([np.asarray(s, dtype=float).ravel() for s in samples])
    mean = x.mean(axis=0)
    xc = x - mean
    _, sing, vt = np.linalg.svd(xc, full_matrices=False)
    d = x.shape[1]
    tol = (sing[0] if len(sing) else 0.0) * max(x.shape) * np.finfo(float).eps
    rank = int(np.sum(sing > tol))
    comps = np.zeros((d, h))
    take = min(h, rank)
    comps[:, :take] = vt[:take].T
    for k in range(take):
        j = int(np.argmax(np.abs(comps[:, k])))
        if comps[j, k] < 0:
            comps[:, k] = -comps[:, k]
    return GroupBasis(mean.reshape(shape), comps.reshape(*shape, h), h, len(samples))


def encode_group_tensor(basis: GroupBasis, tensor: np.ndarray) -> np.ndarray:
    if tensor.shape != basis.mean.shape:
        raise GroupError(f"tensor shape {tensor.shape} does not match basis {basis.mean.shape}")
    xc = np.asarray(tensor, dtype=float).ravel() - basis.mean.ravel()
    return basis.components_flat().T @ xc


def decode_group_tensor(basis: GroupBasis, coeffs: np.ndarray) -> np.ndarray:
    if coeffs.shape != (basis.h,):
        raise GroupError(f"coefficient shape {coeffs.shape}, expected ({basis.h},)")
    flat = basis.mean.ravel() + basis.components_flat() @ np.asarray(coeffs, dtype=float)
    return flat.reshape(basis.mean.shape)


# ---------------------------------------------------------------------------
# Embeddings


@dataclass(frozen=True)
class Embedding:
    """Concatenated per-group PCA coefficients plus a presence vector.

    Blocks of absent groups are exactly zero; presence records which groups
    the garment actually contains.
    """

    group_names: tuple[str, ...]
    coefficients: np.ndarray  # (G, h)
    presence: np.ndarray  # (G,) of 0/1

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))
        object.__setattr__(self, "presence", np.asarray(self.presence, dtype=np.uint8))
        if self.coefficients.shape[0] != len(self.group_names):
            raise GroupError("coefficient rows must match group count")
        if self.presence.shape != (len(self.group_names),):
            raise GroupError("presence length must match group count")
        self.coefficients.setflags(write=False)
        self.presence.setflags(write=False)

    @property
    def h(self) -> int:
        return self.coefficients.shape[1]

    def flat(self) -> np.ndarray:
        return self.coefficients.ravel()

    def block(self, group: str) -> np.ndarray:
        return self.coefficients[self.group_names.index(group)]

    def present_groups(self) -> tuple[str, ...]:
        return tuple(g for g, p in zip(self.group_names, self.presence) if p)


def encode(
    pattern: SewingPattern,
    registry: GroupRegistry,
    bases: Mapping[str, GroupBasis],
    m: int = DEFAULT_EDGE_POINTS,
) -> Embedding:
    """Project a pattern onto every present group's PCA basis.

    Absent groups contribute a zero block and presence 0.
    """
    present = set(pattern.group_names)
    for g in present:
        if g not in registry.group_names:
            raise GroupError(f"unknown group tag {g!r}")
        if g not in bases:
            raise GroupError(f"no fitted basis for group {g!r}")
    h = next(iter(bases.values())).h if bases else DEFAULT_COMPONENTS
    coeffs = np.zeros((len(registry), h))
    presence = np.zeros(len(registry), dtype=np.uint8)
    for gi, gdef in enumerate(registry):
        if gdef.name not in present:
            continue
        tensor = assemble_group_tensor(pattern, gdef, m)
        coeffs[gi] = encode_group_tensor(bases[gdef.name], tensor)
        presence[gi] = 1
    return Embedding(registry.group_names, coeffs, presence)


def decode_contours(
    e: Embedding, bases: Mapping[str, GroupBasis], registry: GroupRegistry
) -> dict[str, np.ndarray]:
    """Reconstruct present groups' tensors: mean + components @ coefficients."""
    out: dict[str, np.ndarray] = {}
    for gi, name in enumerate(e.group_names):
        if not e.presence[gi]:
            continue
        if name not in bases:
            raise GroupError(f"no fitted basis for group {name!r}")
        out[name] = decode_group_tensor(bases[name], e.coefficients[gi])
    return out


def gate_embedding(raw: Embedding, multihot: Sequence[int]) -> Embedding:
    """Presence := multihot; coefficient blocks zeroed where multihot is 0.

    This is the gating step that combines predicted per-group embeddings
    with a predicted multi-hot group classification.
    """
    mh = np.asarray(multihot, dtype=np.uint8)
    if mh.shape != (len(raw.group_names),):
        raise GroupError(f"multihot length {mh.shape} does not match {len(raw.group_names)} groups")
    return Embedding(raw.group_names, raw.coefficients * mh[:, None], mh)


def interpolate(source: Embedding, target: Embedding, alpha: float) -> Embedding:
    """Affine blend alpha*source + (1-alpha)*target of same-presence embeddings."""
    if source.group_names != target.group_names:
        raise GroupError("embeddings come from different registries")
    if not np.array_equal(source.presence, target.presence):
        raise GroupError("presence mismatch: interpolation across differing presence is rejected")
    coeffs = alpha * source.coefficients + (1.0 - alpha) * target.coefficients
    return Embedding(source.group_names, coeffs, source.presence)


@dataclass(frozen=True)
class SetCoefficient:
    """Replace a single coefficient: (group, component index, new value)."""

    group: str
    index: int
    value: float


@dataclass(frozen=True)
class SwapBlock:
    """Replace a group's whole coefficient block and presence bit, e.g. with
    another garment's block."""

    group: str
    coefficients: tuple[float, ...]
    presence: int


Edit = SetCoefficient | SwapBlock


def edit_embedding(e: Embedding, edits: Iterable[Edit]) -> Embedding:
    """Apply targeted edits; untouched values stay bit-identical."""
    coeffs = e.coefficients.copy()
    presence = e.presence.copy()
    for ed in edits:
        gi = e.group_names.index(ed.group) if ed.group in e.group_names else -1
        if gi < 0:
            raise GroupError(f"unknown group {ed.group!r}")
        if isinstance(ed, SetCoefficient):
            if not 0 <= ed.index < e.h:
                raise GroupError(f"component index {ed.index} out of range 0..{e.h - 1}")
            coeffs[gi, ed.index] = float(ed.value)
        else:
            block = np.asarray(ed.coefficients, dtype=float)
            if block.shape != (e.h,):
                raise GroupError(f"block length {block.shape}, expected ({e.h},)")
            coeffs[gi] = block
            presence[gi] = 1 if ed.presence else 0
            if not ed.presence:
                coeffs[gi] = 0.0
    return Embedding(e.group_names, coeffs, presence)


# ---------------------------------------------------------------------------
# Embedding documents (service wire format)


def embedding_to_doc(e: Embedding) -> dict:
    return {
        "format": "sewkit-embedding/1",
        "groups": list(e.group_names),
        "h": e.h,
        "presence": [int(p) for p in e.presence],
        "coefficients": [[float(c) for c in row] for row in e.coefficients],
    }


def embedding_from_doc(doc: dict) -> Embedding:
    if doc.get("format") != "sewkit-embedding/1":
        raise GroupError(f"unsupported embedding format {doc.get('format')!r}")
    return Embedding(
        tuple(doc["groups"]),
        np.asarray(doc["coefficients"], dtype=float),
        np.asarray(doc["presence"], dtype=np.uint8),
    )


# ---------------------------------------------------------------------------
# Basis registry container
#
# Byte layout (all little-endian):
#   magic           8 bytes  b"SEWKPCA1"
#   u32             group count G
#   per group:
#     u16 + bytes   group name (utf-8)
#     u16           role count R
#     per role:     u16 + bytes role name, u32 edge count
#     u32 x4        l_total, m, h, sample count N
#     f64 array     mean, l_total*m*2 values (C order)
#     f64 array     components, l_total*m*2*h values (C order)


def save_bases(
    path, registry: GroupRegistry, bases: Mapping[str, GroupBasis], m: int = DEFAULT_EDGE_POINTS
) -> None:
    with open(path, "wb") as f:
        f.write(_REGISTRY_MAGIC)
        f.write(struct.pack("<I", len(registry)))
        for gdef in registry:
            basis = bases[gdef.name]
            name = gdef.name.encode()
            f.write(struct.pack("<H", len(name)) + name)
            f.write(struct.pack("<H", len(gdef.panel_roles)))
            for role, count in gdef.panel_roles:
                rb = role.encode()
                f.write(struct.pack("<H", len(rb)) + rb)
                f.write(struct.pack("<I", count))
            l_total, m_pts, _ = basis.mean.shape
            f.write(struct.pack("<IIII", l_total, m_pts, basis.h, basis.sample_count))
            f.write(np.ascontiguousarray(basis.mean, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(basis.components, dtype="<f8").tobytes())


def load_bases(path) -> tuple[GroupRegistry, dict[str, GroupBasis], int]:
    """Read a basis container; returns (registry, bases, m)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != _REGISTRY_MAGIC:
        raise GroupError(f"not a basis registry file: {path}")
    off = 8
    (g_count,) = struct.unpack_from("<I", data, off)
    off += 4
    groups: list[GroupDef] = []
    bases: dict[str, GroupBasis] = {}
    m_pts = DEFAULT_EDGE_POINTS
    for _ in range(g_count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + nlen].decode()
        off += nlen
        (r_count,) = struct.unpack_from("<H", data, off)
        off += 2
        roles = []
        for _ in range(r_count):
            (rlen,) = struct.unpack_from("<H", data, off)
            off += 2
            role = data[off : off + rlen].decode()
            off += rlen
            (edges,) = struct.unpack_from("<I", data, off)
            off += 4
            roles.append((role, edges))
        l_total, m_pts, h, n = struct.unpack_from("<IIII", data, off)
        off += 16
        mean_n = l_total * m_pts * 2
        mean = np.frombuffer(data, "<f8", mean_n, off).reshape(l_total, m_pts, 2).copy()
        off += mean_n * 8
        comp_n = mean_n * h
        comps = np.frombuffer(data, "<f8", comp_n, off).reshape(l_total, m_pts, 2, h).copy()
        off += comp_n * 8
        groups.append(GroupDef(name, tuple(roles)))
        bases[name] = GroupBasis(mean, comps, h, n)
    return GroupRegistry(groups), bases, m_pts


def registry_hash(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()[:16]
