"""HTTP JSON service exposing encode/decode/edit/interp/mesh to the editor.

Stateless request handling over an immutable snapshot (registry + decoder
checkpoint); meshes and map containers are returned by reference into an
append-only in-memory cache keyed by content hash, so identical requests
produce identical ids. JSON numbers serialize via repr and round-trip
exactly.
"""

from __future__ import annotations

import hashlib
import json
import mimetypes
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from io import BytesIO
from pathlib import Path

import numpy as np

from sewkit import __version__, groups, mesh as meshmod, solver, uvmaps
from sewkit.geometry import (
    PatternError,
    PatternValidationError,
    SewingPattern,
    pattern_from_doc,
)


def _dumps(obj) -> bytes:
    return json.dumps(obj, separators=(",", ":")).encode()


class ApiError(Exception):
    def __init__(self, status: int, message: str, codes: list[str] | None = None):
        super().__init__(message)
        self.status = status
        self.codes = codes or []


@dataclass
class ServiceState:
    """Immutable model snapshot plus the append-only mesh/map caches."""

    registry: groups.GroupRegistry
    bases: dict[str, groups.GroupBasis]
    m: int
    params: solver.DecoderParams
    registry_hash: str
    checkpoint_hash: str
    ui_dir: Path | None = None
    _meshes: dict[str, str] = field(default_factory=dict)
    _maps: dict[str, bytes] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    @classmethod
    def load(cls, registry_path, checkpoint_path, ui_dir=None) -> "ServiceState":
        registry, bases, m = groups.load_bases(registry_path)
        params, _, _ = solver.load_checkpoint(checkpoint_path)
        return cls(
            registry,
            bases,
            m,
            params,
            groups.registry_hash(registry_path),
            solver.checkpoint_hash(checkpoint_path),
            Path(ui_dir) if ui_dir else None,
        )

    def cache_mesh(self, key: str, obj_text: str) -> None:
        with self._lock:
            self._meshes[key] = obj_text

    def mesh(self, key: str) -> str | None:
        with self._lock:
            return self._meshes.get(key)

    def cache_maps(self, key: str, blob: bytes) -> None:
        with self._lock:
            self._maps[key] = blob

    def maps(self, key: str) -> bytes | None:
        with self._lock:
            return self._maps.get(key)


def _parse_embedding(doc, state: ServiceState) -> groups.Embedding:
    try:
        emb = groups.embedding_from_doc(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ApiError(400, f"bad embedding document: {exc}") from exc
    if emb.group_names != state.registry.group_names:
        raise ApiError(422, "embedding groups do not match the loaded registry")
    if emb.coefficients.size != state.params.input_dim:
        raise ApiError(
            422,
            f"embedding dimension {emb.coefficients.size} does not match "
            f"decoder input {state.params.input_dim}",
        )
    return emb


def _parse_pattern_doc(doc, state: ServiceState) -> SewingPattern:
    try:
        return pattern_from_doc(doc, registry=state.registry)
    except PatternValidationError as exc:
        raise ApiError(400, "pattern validation failed", [v.code for v in exc.violations]) from exc
    except PatternError as exc:
        raise ApiError(400, str(exc)) from exc


def _skeleton_pattern(emb: groups.Embedding, state: ServiceState) -> SewingPattern:
    """Stitch-free pattern over the embedding's present groups, used when
    /decode gets no pattern document."""
    from sewkit.geometry import Panel, SeamedEdge

    tensors = groups.decode_contours(emb, state.bases, state.registry)
    panels = []
    for gname, tensor in tensors.items():
        gdef = state.registry.group(gname)
        for role, contour in groups.tensor_to_contours(gdef, tensor).items():
            edges = tuple(
                SeamedEdge(tuple(contour[i]), tuple(contour[(i + 1) % len(contour)]))
                for i in range(len(contour))
            )
            panels.append(Panel(f"{gname}:{role}", edges, group_tag=f"{gname}:{role}"))
    if not panels:
        raise ApiError(400, "embedding has no present groups")
    return SewingPattern(tuple(panels), (), "decoded")


def _decode_to_mesh(state: ServiceState, emb: groups.Embedding, pattern: SewingPattern | None):
    if pattern is None:
        pattern = _skeleton_pattern(emb, state)
    slot_maps = solver.decode(emb, state.params)
    tensors = groups.decode_contours(emb, state.bases, state.registry)
    contours = {}
    for p in pattern.panels:
        g, role = p.group_tag.split(":", 1)
        if g not in tensors:
            raise ApiError(400, f"pattern group {g!r} absent from embedding")
        contours[p.id] = groups.tensor_to_contours(state.registry.group(g), tensors[g])[role]
    try:
        masks = uvmaps.rasterize_masks(contours)
    except uvmaps.MapError as exc:
        raise ApiError(400, str(exc), [exc.code]) from exc
    panels = {
        p.id: uvmaps.PanelMaps(masks[p.id], slot_maps[p.group_tag], None) for p in pattern.panels
    }
    mesh = meshmod.readout_mesh(panels, pattern, k=state.m)
    return panels, mesh


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState  # set by serve()
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, body: bytes, ctype: str = "application/json"):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, obj):
        self._send(status, _dumps(obj))

    def _body(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ApiError(400, f"invalid JSON body: {exc}") from exc

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        try:
            state = self.state
            if self.path == "/health":
                self._send_json(
                    200,
                    {
                        "status": "ok",
                        "version": __version__,
                        "registry": state.registry_hash,
                        "checkpoint": state.checkpoint_hash,
                        "groups": list(state.registry.group_names),
                        "h": state.bases[state.registry.group_names[0]].h,
                    },
                )
            elif self.path.startswith("/mesh/"):
                obj = state.mesh(self.path.removeprefix("/mesh/"))
                if obj is None:
                    raise ApiError(404, "unknown mesh id")
                self._send(200, obj.encode(), "text/plain")
            elif self.path.startswith("/maps/"):
                blob = state.maps(self.path.removeprefix("/maps/"))
                if blob is None:
                    raise ApiError(404, "unknown maps id")
                self._send(200, blob, "application/octet-stream")
            elif state.ui_dir is not None:
                self._serve_static()
            else:
                raise ApiError(404, f"no route {self.path!r}")
        except ApiError as exc:
            self._send_json(exc.status, {"error": str(exc), "codes": exc.codes})

    def _serve_static(self):
        rel = self.path.lstrip("/") or "index.html"
        target = (self.state.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.state.ui_dir.resolve())) or not target.is_file():
            raise ApiError(404, f"no file {rel!r}")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), ctype)

    def do_POST(self):
        try:
            body = self._body()
            state = self.state
            if self.path == "/encode":
                pattern = _parse_pattern_doc(body, state)
                try:
                    emb = groups.encode(pattern, state.registry, state.bases, state.m)
                except groups.GroupError as exc:
                    raise ApiError(400, str(exc)) from exc
                self._send_json(200, groups.embedding_to_doc(emb))
            elif self.path == "/decode":
                emb = _parse_embedding(body.get("embedding", body), state)
                pattern = None
                if isinstance(body, dict) and body.get("pattern") is not None:
                    pattern = _parse_pattern_doc(body["pattern"], state)
                key = hashlib.sha256(
                    _dumps([groups.embedding_to_doc(emb), body.get("pattern"), state.checkpoint_hash])
                ).hexdigest()[:16]
                if state.mesh(key) is None:
                    panels, mesh = _decode_to_mesh(state, emb, pattern)
                    state.cache_mesh(key, meshmod.export_mesh(mesh))
                    buf = BytesIO()
                    uvmaps.save_maps(buf, panels)
                    state.cache_maps(key, buf.getvalue())
                self._send_json(200, {"mesh_id": key, "maps_id": key})
            elif self.path == "/edit":
                emb = _parse_embedding(body.get("embedding"), state)
                edits = []
                for e in body.get("edits", []):
                    if e.get("op") == "set":
                        edits.append(
                            groups.SetCoefficient(e["group"], int(e["index"]), float(e["value"]))
                        )
                    elif e.get("op") == "swap":
                        edits.append(
                            groups.SwapBlock(
                                e["group"], tuple(e["coefficients"]), int(e.get("presence", 1))
                            )
                        )
                    else:
                        raise ApiError(400, f"unknown edit op {e.get('op')!r}")
                try:
                    out = groups.edit_embedding(emb, edits)
                except groups.GroupError as exc:
                    raise ApiError(422, str(exc)) from exc
                self._send_json(200, groups.embedding_to_doc(out))
            elif self.path == "/interp":
                src = _parse_embedding(body.get("source"), state)
                tgt = _parse_embedding(body.get("target"), state)
                try:
                    out = groups.interpolate(src, tgt, float(body.get("alpha", 0.5)))
                except groups.GroupError as exc:
                    raise ApiError(422, str(exc)) from exc
                self._send_json(200, groups.embedding_to_doc(out))
            else:
                raise ApiError(404, f"no route {self.path!r}")
        except ApiError as exc:
            self._send_json(exc.status, {"error": str(exc), "codes": exc.codes})
        except Exception as exc:  # pragma: no cover
            self._send_json(500, {"error": f"internal error: {exc}", "codes": []})


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8077):
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve(state: ServiceState, host: str = "127.0.0.1", port: int = 8077):
    make_server(state, host, port).serve_forever()
