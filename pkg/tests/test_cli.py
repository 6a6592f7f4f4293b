import json

import numpy as np
import pytest

from sewkit.cli import EXIT_OK, EXIT_UNKNOWN_COMMAND, EXIT_VALIDATION, main
from sewkit.mesh import import_mesh


def run(*argv):
    return main(list(argv))


class TestDispatch:
    def test_unknown_subcommand(self, capsys):
        assert run("frobnicate") == EXIT_UNKNOWN_COMMAND
        assert "unknown subcommand" in capsys.readouterr().err

    def test_no_args_prints_help(self, capsys):
        assert run() == 1
        assert "subcommand" in capsys.readouterr().out.lower() or True

    def test_invalid_pattern_exit_code(self, tmp_path, trained_artifacts):
        bad = tmp_path / "bad.pat"
        bad.write_text(json.dumps({"format": "sewkit/1", "panels": [], "stitches": []}))
        code = run(
            "reconstruct", str(bad),
            "--registry", str(trained_artifacts["registry"]),
            "--checkpoint", str(trained_artifacts["checkpoint"]),
            "--out", str(tmp_path / "x.obj"),
        )
        assert code == EXIT_VALIDATION


class TestGenFit:
    def test_gen_data_and_fit(self, tmp_path):
        out = tmp_path / "ds"
        assert run("gen-data", "--n", "6", "--seed", "3", "--out", str(out)) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["format"] == "sewkit-manifest/1"
        assert len(manifest["samples"]) == 6
        for entry in manifest["samples"]:
            assert (out / entry["pattern"]).exists()
            assert (out / entry["maps"]).exists()
            assert (out / entry["mesh"]).exists()

        reg = tmp_path / "bases.pca"
        assert run("fit-pca", "--manifest", str(out / "manifest.json"), "--out", str(reg)) == EXIT_OK
        assert reg.exists() and reg.with_suffix(".csv").exists()

    def test_gen_data_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run("gen-data", "--n", "4", "--seed", "9", "--out", str(a))
        run("gen-data", "--n", "4", "--seed", "9", "--out", str(b))
        for name in ("sample_0000.pat", "sample_0000.maps", "sample_0000.obj"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestReconstructInterp:
    def test_reconstruct_writes_mesh(self, tmp_path, trained_artifacts):
        sample = trained_artifacts["samples"][0]
        pat = trained_artifacts["manifest"].parent / "sample_0000.pat"
        out = tmp_path / "g.obj"
        code = run(
            "reconstruct", str(pat),
            "--registry", str(trained_artifacts["registry"]),
            "--checkpoint", str(trained_artifacts["checkpoint"]),
            "--out", str(out),
        )
        assert code == EXIT_OK
        mesh = import_mesh(out.read_text())
        assert len(mesh.vertices) > 100
        assert len(mesh.faces) > 100

    def test_interp_alpha_one_equals_reconstruct(self, tmp_path, trained_artifacts):
        base = trained_artifacts["manifest"].parent
        pat_a = base / "sample_0000.pat"
        # find another sample of the same category for a matching presence
        manifest = json.loads(trained_artifacts["manifest"].read_text())
        cat0 = manifest["samples"][0]["category"]
        other = next(
            e["pattern"] for e in manifest["samples"][1:] if e["category"] == cat0
        )
        out_r = tmp_path / "direct.obj"
        out_i = tmp_path / "interp.obj"
        args = ["--registry", str(trained_artifacts["registry"]),
                "--checkpoint", str(trained_artifacts["checkpoint"])]
        assert run("reconstruct", str(pat_a), "--out", str(out_r), *args) == EXIT_OK
        assert run("interp", str(pat_a), str(base / other), "--alpha", "1.0",
                   "--out", str(out_i), *args) == EXIT_OK
        va = import_mesh(out_r.read_text()).vertices
        vb = import_mesh(out_i.read_text()).vertices
        assert va.shape == vb.shape
        assert np.abs(va - vb).max() < 1e-9

    def test_seed_reproducible_outputs(self, tmp_path, trained_artifacts):
        pat = trained_artifacts["manifest"].parent / "sample_0001.pat"
        outs = []
        for name in ("r1.obj", "r2.obj"):
            out = tmp_path / name
            run("reconstruct", str(pat), "--out", str(out),
                "--registry", str(trained_artifacts["registry"]),
                "--checkpoint", str(trained_artifacts["checkpoint"]))
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestSew:
    def test_sew_with_targets(self, tmp_path, trained_artifacts):
        base = trained_artifacts["manifest"].parent
        out = tmp_path / "sewn.maps"
        code = run(
            "sew", str(base / "sample_0000.pat"),
            "--targets", str(base / "sample_0000.maps"),
            "--steps", "60", "--step-size", "0.4", "--init", "flat",
            "--out", str(out), "--report", str(tmp_path / "report.txt"),
            "--no-figures",
        )
        assert code == EXIT_OK
        assert out.exists()
        assert out.with_suffix(".obj").exists()
        history = out.with_suffix(".history.csv").read_text().splitlines()
        assert history[0] == "step,rec,inn,int,nor,total"
        assert len(history) > 2
        report = (tmp_path / "report.txt").read_text()
        assert report.startswith("rec ")


class TestEval:
    def test_eval_csv_format(self, tmp_path, trained_artifacts):
        out = tmp_path / "metrics.csv"
        code = run(
            "eval", "--manifest", str(trained_artifacts["manifest"]),
            "--registry", str(trained_artifacts["registry"]),
            "--checkpoint", str(trained_artifacts["checkpoint"]),
            "--k", "6", "--samples", "800",
            "--out", str(out), "--no-figures",
        )
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "id,chamfer,p2s,mgle"
        assert len(lines) == 1 + 8
        for line in lines[1:]:
            parts = line.split(",")
            assert len(parts) == 4
            assert all(np.isfinite(float(x)) for x in parts[1:])


class TestFigures:
    def test_eval_writes_figure(self, tmp_path, trained_artifacts):
        out = tmp_path / "m.csv"
        # figures default on: the bar chart lands next to the csv
        code = run(
            "eval", "--manifest", str(trained_artifacts["manifest"]),
            "--registry", str(trained_artifacts["registry"]),
            "--checkpoint", str(trained_artifacts["checkpoint"]),
            "--k", "4", "--samples", "400",
            "--out", str(out),
        )
        assert code == EXIT_OK
        assert out.with_suffix(".png").exists()


class TestGradcheckCli:
    def test_single_set_passes(self, tmp_path, capsys):
        code = run("gradcheck", "--sets", "2", "--out", str(tmp_path / "g.csv"))
        assert code == EXIT_OK
        assert "PASS" in capsys.readouterr().out
        assert (tmp_path / "g.csv").exists()


class TestEnvRegistry:
    def test_registry_from_env(self, tmp_path, trained_artifacts, monkeypatch):
        monkeypatch.setenv("SEWKIT_REGISTRY", str(trained_artifacts["registry"]))
        pat = trained_artifacts["manifest"].parent / "sample_0000.pat"
        out = tmp_path / "env.obj"
        code = run("reconstruct", str(pat), "--out", str(out),
                   "--checkpoint", str(trained_artifacts["checkpoint"]))
        assert code == EXIT_OK
