"""Command-line entry points for every pipeline stage.

Subcommands: gen-data, fit-pca, train, sew, reconstruct, interp, edit,
eval, gradcheck, serve. Report-producing commands write figures next to
their delimited outputs unless --no-figures is given. Exit codes: 0 on
success, 2 on validation errors, 64 on an unknown subcommand, 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from sewkit import figures, groups, losses, mesh as meshmod, metrics, solver, synth, uvmaps
from sewkit.geometry import (
    DEFAULT_EDGE_POINTS,
    PatternError,
    PatternValidationError,
    panel_contour,
    parse_pattern,
    serialize_pattern,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_UNKNOWN_COMMAND = 64

REGISTRY_ENV = "SEWKIT_REGISTRY"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _registry_path(args) -> Path:
    path = getattr(args, "registry", None) or os.environ.get(REGISTRY_ENV)
    if not path:
        raise CliError(f"no basis registry: pass --registry or set {REGISTRY_ENV}")
    return Path(path)


def _load_bases(args):
    path = _registry_path(args)
    if not path.exists():
        raise CliError(f"registry not found: {path}")
    return groups.load_bases(path)


def _out_path(args, default: str) -> Path:
    out = Path(args.out) if args.out else Path(default)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _read_pattern(path) -> "object":
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read pattern file {path}: {exc}") from exc
    return parse_pattern(text)


def _manifest_load(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "sewkit-manifest/1":
        raise CliError(f"not a dataset manifest: {path}", EXIT_VALIDATION)
    return doc


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_data(args) -> int:
    out_dir = Path(args.out or "dataset")
    out_dir.mkdir(parents=True, exist_ok=True)
    cats = args.categories.split(",") if args.categories else list(synth.CATEGORIES)
    for c in cats:
        if c not in synth.CATEGORIES:
            raise CliError(f"unknown category {c!r}", EXIT_VALIDATION)
    samples = synth.gen_dataset(args.n, cats, seed=args.seed, with_mesh=True)
    entries = []
    for i, s in enumerate(samples):
        sid = f"sample_{i:04d}"
        pat_path = out_dir / f"{sid}.pat"
        maps_path = out_dir / f"{sid}.maps"
        mesh_path = out_dir / f"{sid}.obj"
        pat_path.write_text(serialize_pattern(s.pattern))
        uvmaps.save_maps(maps_path, s.maps)
        mesh_path.write_text(meshmod.export_mesh(s.mesh))
        entries.append(
            {
                "id": sid,
                "category": s.spec.category,
                "seed": s.spec.seed,
                "params": dict(s.spec.params),
                "pattern": pat_path.name,
                "maps": maps_path.name,
                "mesh": mesh_path.name,
            }
        )
    manifest = {"format": "sewkit-manifest/1", "seed": args.seed, "samples": entries}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    if args.figures:
        figures.save_pattern_sheet(samples[0].pattern, out_dir / "sample_0000_pattern.png")
        figures.save_mesh_preview(samples[0].mesh, out_dir / "sample_0000_mesh.png")
    print(f"wrote {len(entries)} samples to {out_dir}")
    return EXIT_OK


def cmd_fit_pca(args) -> int:
    manifest = _manifest_load(args.manifest)
    base = Path(args.manifest).parent
    registry = groups.default_registry()
    tensors: dict[str, list[np.ndarray]] = {g: [] for g in registry.group_names}
    for entry in manifest["samples"]:
        pattern = _read_pattern(base / entry["pattern"])
        for g in pattern.group_names:
            tensors[g].append(groups.assemble_group_tensor(pattern, registry.group(g), args.m))
    bases = {}
    rows = ["group,samples,rank_used,h"]
    for g in registry.group_names:
        if not tensors[g]:
            raise CliError(f"no samples contain group {g!r}; cannot fit its basis", EXIT_VALIDATION)
        basis = groups.fit_group_basis(tensors[g], args.h)
        bases[g] = basis
        rank = int(np.sum(np.linalg.norm(basis.components_flat(), axis=0) > 0.5))
        rows.append(f"{g},{basis.sample_count},{rank},{basis.h}")
    out = _out_path(args, "bases.pca")
    groups.save_bases(out, registry, bases, args.m)
    summary = out.with_suffix(".csv")
    summary.write_text("\n".join(rows) + "\n")
    print(f"wrote {out} ({len(bases)} group bases); summary in {summary}")
    return EXIT_OK


def _load_training_items(manifest_path, registry, bases, m):
    manifest = _manifest_load(manifest_path)
    base = Path(manifest_path).parent
    items = []
    for entry in manifest["samples"]:
        pattern = _read_pattern(base / entry["pattern"])
        maps = uvmaps.load_maps(base / entry["maps"])
        emb = groups.encode(pattern, registry, bases, m)
        items.append(solver.TrainItem(emb, pattern, maps))
    return items


def cmd_train(args) -> int:
    registry, bases, m = _load_bases(args)
    items = _load_training_items(args.manifest, registry, bases, m)
    cfg = solver.TrainConfig(
        learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs, seed=args.seed
    )
    params = solver.init_decoder_params(
        registry, input_dim=len(registry) * bases[registry.group_names[0]].h, seed=args.seed
    )
    solver.fit_input_scale(params, [it.embedding for it in items])
    if args.mean_init:
        sums: dict[str, np.ndarray] = {}
        counts: dict[str, int] = {}
        for it in items:
            for pid, slot in it.slot_of_panel().items():
                sums[slot] = sums.get(slot, 0.0) + it.targets[pid].positions
                counts[slot] = counts.get(slot, 0) + 1
        solver.set_head_bias_to_mean(params, {s: sums[s] / counts[s] for s in sums})
    params, history = solver.train(items, cfg, params)
    out = _out_path(args, "decoder.ckpt")
    solver.save_checkpoint(out, params, seed=args.seed, epoch=cfg.epochs)
    hist_path = out.with_suffix(".history.csv")
    keys = ["rec", "inn", "int", "nor", "total"]
    lines = ["batch," + ",".join(keys)]
    lines += [f"{i}," + ",".join(f"{h[k]:.9g}" for k in keys) for i, h in enumerate(history)]
    hist_path.write_text("\n".join(lines) + "\n")
    if args.figures:
        figures.save_loss_curves(history, out.with_suffix(".loss.png"))
    print(f"trained {cfg.epochs} epochs on {len(items)} garments; final total "
          f"{history[-1]['total']:.6g}; checkpoint {out}")
    return EXIT_OK


def cmd_sew(args) -> int:
    pattern = _read_pattern(args.pattern)
    if args.targets:
        targets = uvmaps.load_maps(args.targets)
        masks = {pid: pm.mask for pid, pm in targets.items()}
    else:
        targets = None
        contours = {p.id: panel_contour(p, DEFAULT_EDGE_POINTS) for p in pattern.panels}
        masks = uvmaps.rasterize_masks(contours)
    weights = losses.LossWeights(rec=args.w_rec, inn=args.w_inn, int_=args.w_int, nor=args.w_nor)
    cfg = solver.SewConfig(
        steps=args.steps, step_size=args.step_size, weights=weights, init=args.init,
        seed=args.seed, record_every=max(1, args.steps // 200),
    )
    ys, history = solver.sew_direct(pattern, masks, targets, cfg)
    out = _out_path(args, "sewn.maps")
    panels = {
        pid: uvmaps.PanelMaps(masks[pid], ys[pid], uvmaps.compute_normals(ys[pid], masks[pid]))
        for pid in ys
    }
    uvmaps.save_maps(out, panels)
    mesh = meshmod.readout_mesh(panels, pattern, k=DEFAULT_EDGE_POINTS)
    out.with_suffix(".obj").write_text(meshmod.export_mesh(mesh))
    keys = ["rec", "inn", "int", "nor", "total"]
    hist_lines = ["step," + ",".join(keys)]
    hist_lines += [f"{i * cfg.record_every}," + ",".join(f"{h[k]:.9g}" for k in keys)
                   for i, h in enumerate(history)]
    out.with_suffix(".history.csv").write_text("\n".join(hist_lines) + "\n")
    if args.report:
        final = history[-1]
        report_lines = [f"{k} {final[k]:.17g}" for k in keys]
        Path(args.report).write_text("\n".join(report_lines) + "\n")
    if args.figures:
        figures.save_loss_curves(history, out.with_suffix(".loss.png"))
        figures.save_mesh_preview(mesh, out.with_suffix(".mesh.png"))
    print(f"sewed {args.pattern}: final total {history[-1]['total']:.6g}; maps {out}")
    return EXIT_OK


def _reconstruct_mesh(pattern, registry, bases, m, params, embedding=None):
    """encode -> decode -> inverse-PCA masks -> readout."""
    emb = embedding if embedding is not None else groups.encode(pattern, registry, bases, m)
    slot_maps = solver.decode(emb, params)
    tensors = groups.decode_contours(emb, bases, registry)
    contours: dict[str, np.ndarray] = {}
    panel_ids: dict[str, str] = {}
    for p in pattern.panels:
        g, role = p.group_tag.split(":", 1)
        contour_map = groups.tensor_to_contours(registry.group(g), tensors[g])
        contours[p.id] = contour_map[role]
        panel_ids[p.id] = p.group_tag
    masks = uvmaps.rasterize_masks(contours)
    panels = {
        pid: uvmaps.PanelMaps(masks[pid], slot_maps[panel_ids[pid]], None) for pid in contours
    }
    mesh = meshmod.readout_mesh(panels, pattern, k=m)
    return emb, panels, mesh


def cmd_reconstruct(args) -> int:
    registry, bases, m = _load_bases(args)
    params, _, _ = solver.load_checkpoint(args.checkpoint)
    pattern = _read_pattern(args.pattern)
    emb, panels, mesh = _reconstruct_mesh(pattern, registry, bases, m, params)
    out = _out_path(args, "reconstructed.obj")
    out.write_text(meshmod.export_mesh(mesh))
    if args.maps:
        uvmaps.save_maps(args.maps, panels)
    if args.embedding:
        Path(args.embedding).write_text(json.dumps(groups.embedding_to_doc(emb), indent=1))
    if args.figures:
        figures.save_pattern_sheet(pattern, out.with_suffix(".pattern.png"))
        figures.save_mesh_preview(mesh, out.with_suffix(".mesh.png"))
    print(f"reconstructed {args.pattern} -> {out} "
          f"({len(mesh.vertices)} vertices, {len(mesh.faces)} faces)")
    return EXIT_OK


def cmd_interp(args) -> int:
    registry, bases, m = _load_bases(args)
    params, _, _ = solver.load_checkpoint(args.checkpoint)
    pat_a = _read_pattern(args.pattern_a)
    pat_b = _read_pattern(args.pattern_b)
    emb_a = groups.encode(pat_a, registry, bases, m)
    emb_b = groups.encode(pat_b, registry, bases, m)
    emb = groups.interpolate(emb_a, emb_b, args.alpha)
    # alpha = 1 is the source pattern; its panels drive the readout
    _, panels, mesh = _reconstruct_mesh(pat_a, registry, bases, m, params, embedding=emb)
    out = _out_path(args, "interpolated.obj")
    out.write_text(meshmod.export_mesh(mesh))
    if args.figures:
        figures.save_mesh_preview(mesh, out.with_suffix(".mesh.png"))
    print(f"interpolated alpha={args.alpha}: {out}")
    return EXIT_OK


def cmd_edit(args) -> int:
    doc = json.loads(Path(args.embedding).read_text())
    emb = groups.embedding_from_doc(doc)
    edit_doc = json.loads(Path(args.edits).read_text())
    edits = []
    for e in edit_doc if isinstance(edit_doc, list) else edit_doc.get("edits", []):
        if e.get("op") == "set":
            edits.append(groups.SetCoefficient(e["group"], int(e["index"]), float(e["value"])))
        elif e.get("op") == "swap":
            edits.append(
                groups.SwapBlock(e["group"], tuple(e["coefficients"]), int(e.get("presence", 1)))
            )
        else:
            raise CliError(f"unknown edit op {e.get('op')!r}", EXIT_VALIDATION)
    out_emb = groups.edit_embedding(emb, edits)
    out = _out_path(args, "edited.embedding.json")
    out.write_text(json.dumps(groups.embedding_to_doc(out_emb), indent=1))
    print(f"applied {len(edits)} edits -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    registry, bases, m = _load_bases(args)
    params, _, _ = solver.load_checkpoint(args.checkpoint)
    manifest = _manifest_load(args.manifest)
    base = Path(args.manifest).parent
    rows = []
    for entry in manifest["samples"]:
        pattern = _read_pattern(base / entry["pattern"])
        gt_mesh = meshmod.import_mesh((base / entry["mesh"]).read_text())
        _, _, pred = _reconstruct_mesh(pattern, registry, bases, m, params)
        gt_pts = metrics.sample_surface(gt_mesh, args.samples, args.seed)
        pred_pts = metrics.sample_surface(pred, args.samples, args.seed + 1)
        rows.append(
            {
                "id": entry["id"],
                "chamfer": metrics.chamfer(gt_pts, pred_pts),
                "p2s": metrics.p2s(gt_pts, pred),
                "mgle": metrics.mgle(gt_mesh, pred, args.k, args.seed),
            }
        )
    out = _out_path(args, "metrics.csv")
    lines = ["id,chamfer,p2s,mgle"]
    lines += [f'{r["id"]},{r["chamfer"]:.6g},{r["p2s"]:.6g},{r["mgle"]:.6g}' for r in rows]
    out.write_text("\n".join(lines) + "\n")
    if args.figures:
        figures.save_metrics_bars(rows, out.with_suffix(".png"))
    means = {k: float(np.mean([r[k] for r in rows])) for k in ("chamfer", "p2s", "mgle")}
    print("\n".join(lines))
    print(f'mean,{means["chamfer"]:.6g},{means["p2s"]:.6g},{means["mgle"]:.6g}')
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rows = ["seed,rec,inn,int,nor"]
    worst = {"rec": 0.0, "inn": 0.0, "int": 0.0, "nor": 0.0}
    for seed in range(args.seed, args.seed + args.sets):
        r = losses.standard_gradient_checks(seed, size=args.size, step=args.step)
        rows.append(f'{seed},{r["rec"]:.3e},{r["inn"]:.3e},{r["int"]:.3e},{r["nor"]:.3e}')
        for k in worst:
            worst[k] = max(worst[k], r[k])
    ok = worst["rec"] < 1e-4 and worst["inn"] < 1e-4 and worst["int"] < 1e-4 and worst["nor"] < 1e-3
    rows.append(f'worst,{worst["rec"]:.3e},{worst["inn"]:.3e},{worst["int"]:.3e},{worst["nor"]:.3e}')
    print("\n".join(rows))
    if args.out:
        _out_path(args, "gradcheck.csv").write_text("\n".join(rows) + "\n")
    print("gradcheck: " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_ERROR


def cmd_serve(args) -> int:
    from sewkit.service import ServiceState, serve

    registry_path = _registry_path(args)
    state = ServiceState.load(registry_path, args.checkpoint, ui_dir=args.ui)
    host, _, port = args.bind.rpartition(":")
    print(f"serving on http://{host or '127.0.0.1'}:{port} "
          f"(registry {state.registry_hash}, checkpoint {state.checkpoint_hash})")
    serve(state, host or "127.0.0.1", int(port))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_common(p: argparse.ArgumentParser, figures_default: bool | None = None):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    if figures_default is not None:
        p.add_argument("--figures", dest="figures", action="store_true", default=figures_default)
        p.add_argument("--no-figures", dest="figures", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="sewkit", description=__doc__)
    sub = top.add_subparsers(dest="command")

    p = sub.add_parser("gen-data", help="generate a synthetic garment dataset")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--categories", type=str, default=None)
    _add_common(p, figures_default=False)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("fit-pca", help="fit per-group PCA bases from a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--h", type=int, default=groups.DEFAULT_COMPONENTS)
    p.add_argument("--m", type=int, default=DEFAULT_EDGE_POINTS)
    _add_common(p)
    p.set_defaults(fn=cmd_fit_pca)

    p = sub.add_parser("train", help="train the garment decoder")
    p.add_argument("--manifest", required=True)
    p.add_argument("--registry", default=None)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--mean-init", action="store_true", default=True)
    p.add_argument("--no-mean-init", dest="mean_init", action="store_false")
    _add_common(p, figures_default=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sew", help="optimize position maps directly under the losses")
    p.add_argument("pattern")
    p.add_argument("--targets", default=None, help="map container with baked ground truth")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--step-size", type=float, default=0.3)
    p.add_argument("--init", choices=("placement", "flat", "given"), default="placement")
    p.add_argument("--w-rec", type=float, default=1.0)
    p.add_argument("--w-inn", type=float, default=1e-3)
    p.add_argument("--w-int", type=float, default=1e-4)
    p.add_argument("--w-nor", type=float, default=1e-2)
    p.add_argument("--report", default=None, help="write the final loss record here")
    _add_common(p, figures_default=True)
    p.set_defaults(fn=cmd_sew)

    p = sub.add_parser("reconstruct", help="pattern file -> mesh via encode/decode/readout")
    p.add_argument("pattern")
    p.add_argument("--registry", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--maps", default=None)
    p.add_argument("--embedding", default=None, help="also write the embedding document")
    _add_common(p, figures_default=False)
    p.set_defaults(fn=cmd_reconstruct)

    p = sub.add_parser("interp", help="interpolate two patterns in embedding space")
    p.add_argument("pattern_a")
    p.add_argument("pattern_b")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--registry", default=None)
    p.add_argument("--checkpoint", required=True)
    _add_common(p, figures_default=False)
    p.set_defaults(fn=cmd_interp)

    p = sub.add_parser("edit", help="apply coefficient edits to an embedding document")
    p.add_argument("--embedding", required=True)
    p.add_argument("--edits", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_edit)

    p = sub.add_parser("eval", help="metrics over a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--registry", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=metrics.DEFAULT_MGLE_POINTS)
    p.add_argument("--samples", type=int, default=metrics.DEFAULT_SAMPLES)
    _add_common(p, figures_default=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference verification of the loss gradients")
    p.add_argument("--sets", type=int, default=20)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--step", type=float, default=1e-3)
    _add_common(p)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("serve", help="run the HTTP editing service")
    p.add_argument("--registry", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bind", default="127.0.0.1:8077")
    p.add_argument("--ui", default=None, help="static asset directory for the editor UI")
    _add_common(p)
    p.set_defaults(fn=cmd_serve)

    return top


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    known = {
        "gen-data", "fit-pca", "train", "sew", "reconstruct",
        "interp", "edit", "eval", "gradcheck", "serve",
    }
    if argv and not argv[0].startswith("-") and argv[0] not in known:
        print(f"sewkit: unknown subcommand {argv[0]!r}", file=sys.stderr)
        return EXIT_UNKNOWN_COMMAND
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_help()
        return EXIT_ERROR
    try:
        return args.fn(args)
    except PatternValidationError as exc:
        print(f"sewkit: invalid pattern: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (PatternError, groups.GroupError, synth.SynthError) as exc:
        print(f"sewkit: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CliError as exc:
        print(f"sewkit: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"sewkit: missing file: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # pragma: no cover - last resort
        print(f"sewkit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
