import json

import numpy as np
import pytest

from sewkit import groups, solver, synth, uvmaps
from sewkit.geometry import parse_pattern

# Hand-built two-rectangle skirt: front/back 40x50 cm panels joined on both
# side edges. Edge order per panel: bottom, right, top, left (CCW).
SKIRT_FIXTURE_DOC = {
    "format": "sewkit/1",
    "category": "skirt",
    "panels": [
        {
            "id": "front",
            "group": "skirt-body:front",
            "placement": {"t": [0.0, 0.0, 12.0], "r": [0.0, 0.0, 0.0]},
            "edges": [
                {"start": [-20.0, -50.0], "end": [20.0, -50.0], "control": None},
                {"start": [20.0, -50.0], "end": [20.0, 0.0], "control": None},
                {"start": [20.0, 0.0], "end": [-20.0, 0.0], "control": None},
                {"start": [-20.0, 0.0], "end": [-20.0, -50.0], "control": None},
            ],
        },
        {
            "id": "back",
            "group": "skirt-body:back",
            "placement": {"t": [0.0, 0.0, -12.0], "r": [0.0, 0.0, 0.0]},
            "edges": [
                {"start": [-20.0, -50.0], "end": [20.0, -50.0], "control": None},
                {"start": [20.0, -50.0], "end": [20.0, 0.0], "control": None},
                {"start": [20.0, 0.0], "end": [-20.0, 0.0], "control": None},
                {"start": [-20.0, 0.0], "end": [-20.0, -50.0], "control": None},
            ],
        },
    ],
    "stitches": [
        {"a": ["front", 1], "b": ["back", 3], "reversed": True},
        {"a": ["front", 3], "b": ["back", 1], "reversed": True},
    ],
}


@pytest.fixture
def skirt_fixture_text() -> str:
    return json.dumps(SKIRT_FIXTURE_DOC)


@pytest.fixture
def skirt_fixture(skirt_fixture_text):
    return parse_pattern(skirt_fixture_text)


@pytest.fixture(scope="session")
def registry():
    return groups.default_registry()


@pytest.fixture(scope="session")
def small_dataset():
    """12 synthetic garments (all categories), baked, no meshes."""
    return synth.gen_dataset(12, seed=101, with_mesh=False)


@pytest.fixture(scope="session")
def fitted_bases(small_dataset, registry):
    tensors = {g: [] for g in registry.group_names}
    for s in small_dataset:
        for g, t in s.tensors.items():
            tensors[g].append(t)
    return {g: groups.fit_group_basis(ts, 12) for g, ts in tensors.items() if ts}


@pytest.fixture(scope="session")
def cylinder_sample():
    """One straight skirt (cylinder + waistband) with baked ground truth."""
    spec = synth.GarmentSpec(
        "skirt", {"waist_girth": 90.0, "length": 60.0, "flare": 0.0, "band_height": 4.0}, 1
    )
    return synth.gen_sample(spec, with_mesh=True)


@pytest.fixture(scope="session")
def trained_artifacts(tmp_path_factory):
    """End-to-end tiny pipeline: dataset -> bases -> short decoder training.

    Session-scoped: the CLI, service and acceptance tests all reuse these
    files. Kept small so the whole fixture builds in well under a minute.
    """
    root = tmp_path_factory.mktemp("artifacts")
    data_dir = root / "data"
    data_dir.mkdir()
    reg = groups.default_registry()
    samples = synth.gen_dataset(8, seed=77, with_mesh=True)
    from sewkit.geometry import serialize_pattern
    from sewkit.mesh import export_mesh

    entries = []
    for i, s in enumerate(samples):
        sid = f"sample_{i:04d}"
        (data_dir / f"{sid}.pat").write_text(serialize_pattern(s.pattern))
        uvmaps.save_maps(data_dir / f"{sid}.maps", s.maps)
        (data_dir / f"{sid}.obj").write_text(export_mesh(s.mesh))
        entries.append(
            {"id": sid, "category": s.spec.category, "pattern": f"{sid}.pat",
             "maps": f"{sid}.maps", "mesh": f"{sid}.obj"}
        )
    manifest = data_dir / "manifest.json"
    manifest.write_text(
        json.dumps({"format": "sewkit-manifest/1", "seed": 77, "samples": entries}, indent=1)
    )

    tensors = {g: [] for g in reg.group_names}
    for s in samples:
        for g, t in s.tensors.items():
            tensors[g].append(t)
    bases = {g: groups.fit_group_basis(ts, 12) for g, ts in tensors.items()}
    registry_path = root / "bases.pca"
    groups.save_bases(registry_path, reg, bases)

    items = [
        solver.TrainItem(groups.encode(s.pattern, reg, bases), s.pattern, s.maps)
        for s in samples
    ]
    params = solver.init_decoder_params(reg, input_dim=len(reg) * 12, seed=5)
    solver.fit_input_scale(params, [it.embedding for it in items])
    mean_maps: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for it in items:
        for pid, slot in it.slot_of_panel().items():
            mean_maps[slot] = mean_maps.get(slot, 0.0) + it.targets[pid].positions
            counts[slot] = counts.get(slot, 0) + 1
    solver.set_head_bias_to_mean(params, {s: mean_maps[s] / counts[s] for s in mean_maps})
    cfg = solver.TrainConfig(learning_rate=0.02, batch_size=4, epochs=6, seed=5)
    params, history = solver.train(items, cfg, params)
    ckpt_path = root / "decoder.ckpt"
    solver.save_checkpoint(ckpt_path, params, seed=5, epoch=cfg.epochs)

    return {
        "root": root,
        "manifest": manifest,
        "registry": registry_path,
        "checkpoint": ckpt_path,
        "samples": samples,
        "bases": bases,
        "params": params,
        "history": history,
    }
