import json
import subprocess
import sys

import numpy as np
import pytest

from litedepth import cli
from litedepth.data_io import save_depth, synth_scene, write_rgb, read_depth_raw
from litedepth.graph import save_model


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    report = json.loads(out.out) if out.out.strip() else None
    return code, report, out.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, default_model):
    root = tmp_path_factory.mktemp("cli")
    save_model(default_model, root / "model.ldw")
    s = synth_scene("slanted", 480, 640, invalid_fraction=0.05, seed=3)
    (root / "imgs").mkdir()
    write_rgb(root / "imgs" / "a.png", s.rgb)
    save_depth(root / "depth.png", s.depth, s.valid)
    return root


def test_score(capsys):
    code, rep, err = run_cli(capsys, "score", "--si-rmse", 0, "--runtime", 10, "--C", 0.01)
    assert code == 0
    assert rep["score"] == pytest.approx(10.0)
    assert rep["command"] == "score" and "config" in rep
    assert "config" in err


def test_eval_identical_dirs(capsys, tmp_path):
    for i in range(2):
        s = synth_scene("sphere", 24, 32, invalid_fraction=0.1, seed=i)
        save_depth(tmp_path / f"{i}.png", s.depth, s.valid)
    code, rep, _ = run_cli(capsys, "eval", "--pred", tmp_path, "--gt", tmp_path)
    assert code == 0
    for key in ("si_rmse", "rmse", "log10", "rel"):
        assert rep["mean_over_images"][key] == 0.0
        assert rep["pooled_pixels"][key] == 0.0


def test_infer_missing_file(capsys, workdir, tmp_path):
    missing = tmp_path / "nope.png"
    code, rep, err = run_cli(capsys, "infer", "--model", workdir / "model.ldw", "--input", missing,
                             "--output", tmp_path / "out")
    assert code != 0 and rep is None
    assert str(missing) in err


def test_infer_resolution_mismatch(capsys, workdir, tmp_path):
    write_rgb(tmp_path / "small.png", np.zeros((10, 10, 3), np.uint8))
    code, _, err = run_cli(capsys, "infer", "--model", workdir / "model.ldw", "--input",
                           tmp_path / "small.png", "--output", tmp_path / "out")
    assert code == 1 and "resolution" in err


def test_zero_weight_model_gives_zero_depth(capsys, default_model, tmp_path):
    zero = default_model.copy(weights={k: np.zeros_like(v) for k, v in default_model.weights.items()})
    save_model(zero, tmp_path / "zero.ldw")
    write_rgb(tmp_path / "black.png", np.zeros((480, 640, 3), np.uint8))
    code, rep, _ = run_cli(capsys, "infer", "--model", tmp_path / "zero.ldw", "--input",
                           tmp_path / "black.png", "--output", tmp_path / "out", "--preview")
    assert code == 0
    assert not read_depth_raw(tmp_path / "out" / "black.png").any()
    assert (tmp_path / "out" / "black_preview.png").exists()


def test_fold_and_verify(capsys, workdir, tmp_path):
    folded = tmp_path / "folded.ldw"
    code, rep, _ = run_cli(capsys, "fold", "--model", workdir / "model.ldw", "--output", folded)
    assert code == 0 and rep["parameters_before"] == rep["parameters_after"]
    code, rep, _ = run_cli(capsys, "verify-fold", workdir / "model.ldw", folded, "--trials", 2)
    assert code == 0 and rep["max_abs_diff"] <= 1e-4
    code, rep, _ = run_cli(capsys, "verify-fold", workdir / "model.ldw", workdir / "model.ldw",
                           "--trials", 1)
    assert code == 0 and rep["max_abs_diff"] == 0.0
    code, _, err = run_cli(capsys, "fold", "--model", folded, "--output", tmp_path / "again.ldw")
    assert code == 1 and "nothing to fold" in err


def test_verify_detects_perturbation(capsys, workdir, default_model, tmp_path):
    w = dict(default_model.weights)
    w["decoder.proj.bias"] = w["decoder.proj.bias"] + 0.01
    save_model(default_model.copy(weights=w), tmp_path / "bumped.ldw")
    code, rep, err = run_cli(capsys, "verify-fold", workdir / "model.ldw", tmp_path / "bumped.ldw",
                             "--trials", 1)
    assert code != 0
    assert rep["pass"] is False and "exceeds tolerance" in err


def test_losses_subcommand(capsys, tmp_path):
    s = synth_scene("slanted", 48, 64, seed=0)
    save_depth(tmp_path / "gt.png", s.depth, s.valid)
    save_depth(tmp_path / "pred.png", s.depth * 1.1, s.valid)
    code, rep, _ = run_cli(capsys, "losses", "--pred", tmp_path / "pred.png", "--gt", tmp_path / "gt.png",
                           "--weights", "1,0,0,0")
    assert code == 0
    assert rep["combined"] == pytest.approx(rep["terms"]["silog"])
    code, _, err = run_cli(capsys, "losses", "--pred", tmp_path / "pred.png", "--gt", tmp_path / "gt.png",
                           "--weights", "1,2")
    assert code == 1 and "--weights" in err


def test_bench(capsys):
    code, rep, _ = run_cli(capsys, "bench", "--trials", 5, "--backend", "compiled")
    assert code == 0
    r = rep["backends"]["compiled"]
    assert r["std_ms"] < r["mean_ms"]


def test_split_and_synth(capsys, tmp_path):
    code, rep, _ = run_cli(capsys, "synth", "--size", "16x20", "--count", 5, "--output", tmp_path / "ds")
    assert code == 0 and len(rep["ids"]) == 5
    code, rep, _ = run_cli(capsys, "split", "--root", tmp_path / "ds", "--n-val", 2,
                           "--output", tmp_path / "split.txt")
    assert code == 0 and (rep["train"], rep["val"]) == (3, 2)


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["score", "--si-rmse", "0", "--runtime", "1", "--bogus"])
    assert exc.value.code == 2


def test_report_file(capsys, tmp_path):
    code, rep, _ = run_cli(capsys, "score", "--si-rmse", 0.3, "--runtime-ms", 40, "--report",
                           tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text()) == rep


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "litedepth.cli", "score", "--si-rmse", "0",
                          "--runtime", "10", "--C", "0.01"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["score"] == pytest.approx(10.0)


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def determinism_runs(capsys, workdir, tmp_path):
    """Run infer, fold, fit-toy and augment twice each; returns {name: identical?}."""
    out = {}
    for name in ("infer", "fold", "fit-toy", "augment"):
        results = []
        for k in range(2):
            d = tmp_path / f"{name}{k}"
            argv = {
                "infer": ["infer", "--model", workdir / "model.ldw", "--input", workdir / "imgs",
                          "--output", d],
                "fold": ["fold", "--model", workdir / "model.ldw", "--output", d / "f.ldw"],
                "fit-toy": ["fit-toy", "--seed", 5, "--steps", 40, "--size", "24x32",
                            "--report", d / "trace.json"],
                "augment": ["augment", "--rgb", workdir / "imgs" / "a.png", "--depth", workdir / "depth.png",
                            "--count", 3, "--seed", 4, "--output", d],
            }[name]
            d.mkdir(parents=True, exist_ok=True)
            code, rep, _ = run_cli(capsys, *argv)
            assert code == 0
            # paths differ between the two runs by construction; compare file contents
            files = _tree_bytes(d)
            if name == "fit-toy":
                files = {"trace": json.dumps({k: v for k, v in rep.items() if k != "config"}).encode()}
            results.append(files)
        out[name] = results[0] == results[1] and bool(results[0])
    return out


def test_determinism(capsys, workdir, tmp_path):
    assert determinism_runs(capsys, workdir, tmp_path) == dict.fromkeys(
        ("infer", "fold", "fit-toy", "augment"), True)
