"""Tests for stmmreg.cli."""

import glob
import os
import numpy as np
import pandas as pd
import pytest
from stmmreg.cli import EXIT_DEGENERATE, EXIT_INPUT, EXIT_OK, build_parser, config_from_args, main
from stmmreg.geometry import rotation_error
from stmmreg.io import read_json, read_transforms, write_ply
from stmmreg.solver import Mode, RegistrationConfig


@pytest.fixture
def scene_dir(tmp_path) -> str:
    out = str(tmp_path / "scene")
    args = ["synth", "--surface", "sphere", "--views", "3", "--points", "150", "--overlap", "1.0", "-q"]
    assert main(args + ["--out", out]) == EXIT_OK
    return out


def test_synth_writes_a_scene(scene_dir, capsys) -> None:
    names = sorted(os.listdir(scene_dir))
    assert names == ["ground_truth.json", "manifest.json", "view_01.ply", "view_02.ply", "view_03.ply"]
    assert read_json(os.path.join(scene_dir, "manifest.json"))["points_per_view"] == 150


def test_synth_replays_a_manifest(scene_dir, tmp_path) -> None:
    again = str(tmp_path / "again")
    manifest = os.path.join(scene_dir, "manifest.json")
    assert main(["synth", "--manifest", manifest, "--out", again, "-q"]) == EXIT_OK
    with open(os.path.join(scene_dir, "view_02.ply"), "rb") as a, open(os.path.join(again, "view_02.ply"), "rb") as b:
        assert a.read() == b.read()


def test_register_from_ground_truth(scene_dir, tmp_path, capsys) -> None:
    paths = sorted(glob.glob(os.path.join(scene_dir, "*.ply")))
    truth = os.path.join(scene_dir, "ground_truth.json")
    out, trace, aligned = tmp_path / "t.json", tmp_path / "q.csv", tmp_path / "aligned"
    code = main(
        ["register", *paths, "--init", truth, "--out", str(out), "--trace", str(trace)]
        + ["--emit-aligned", str(aligned), "-q"]
    )
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    assert "termination: converged" in printed
    assert "d_r: " in printed and "sigma0: " in printed
    assert "'dof': 3.0" in printed
    found, want = read_transforms(out), read_transforms(truth)
    assert list(found) == [1, 2, 3]
    assert rotation_error(list(found.values()), list(want.values())) < 1e-6
    assert list(pd.read_csv(trace).columns) == ["iteration", "q"]
    assert sorted(os.listdir(aligned)) == ["aligned_01.ply", "aligned_02.ply", "aligned_03.ply"]


def test_register_plots_convergence(scene_dir, tmp_path) -> None:
    paths = sorted(glob.glob(os.path.join(scene_dir, "*.ply")))
    figure = tmp_path / "q.png"
    args = ["register", *paths, "--out", str(tmp_path / "t.json"), "--max-iters", "3", "--plot", str(figure)]
    assert main(args + ["-q"]) == EXIT_OK
    assert figure.stat().st_size > 0


def test_eval_dof_protocol(scene_dir, tmp_path) -> None:
    csv, summary = tmp_path / "trials.csv", tmp_path / "summary.json"
    args = ["eval", "--scene", scene_dir, "--protocol", "dof", "--dofs", "2,5", "--repeats", "1"]
    assert main(args + ["--csv", str(csv), "--json", str(summary), "-q"]) == EXIT_OK
    assert pd.read_csv(csv)["level"].tolist() == [2.0, 5.0]
    assert read_json(summary)["protocol"] == "dof"


def test_usage_errors_exit_with_one() -> None:
    with pytest.raises(SystemExit) as info:
        main(["register", "a.ply", "b.ply", "--bogus"])
    assert info.value.code == EXIT_INPUT
    with pytest.raises(SystemExit) as info:
        main(["eval", "--levels", "0.1,abc"])
    assert info.value.code == EXIT_INPUT


def test_version_exits_cleanly(capsys) -> None:
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.startswith("stmmreg ")


def test_missing_inputs_exit_with_one(tmp_path, scene_dir) -> None:
    assert main(["register", str(tmp_path / "a.ply"), str(tmp_path / "b.ply"), "-q"]) == EXIT_INPUT
    paths = sorted(glob.glob(os.path.join(scene_dir, "*.ply")))
    assert main(["register", paths[0], "-q"]) == EXIT_INPUT
    os.remove(os.path.join(scene_dir, "ground_truth.json"))
    assert main(["eval", "--scene", scene_dir, "--repeats", "1", "-q"]) == EXIT_INPUT


def test_malformed_init_exits_with_one(tmp_path, scene_dir) -> None:
    paths = sorted(glob.glob(os.path.join(scene_dir, "*.ply")))
    init = tmp_path / "init.json"
    init.write_text('[{"view": 1, "rotation": [[1, 0, 0], [0, 1, 0], [0, 0, -1]], "translation": [0, 0, 0]}]')
    assert main(["register", *paths, "--init", str(init), "-q"]) == EXIT_INPUT
    init.write_text("[" * 100000 + "]" * 100000)
    assert main(["register", *paths, "--init", str(init), "-q"]) == EXIT_INPUT


def test_degenerate_geometry_exits_with_two(tmp_path, capsys) -> None:
    line = np.arange(10.0)[:, None] * np.array([[1.0, 0.0, 0.0]])
    first, second = tmp_path / "a.ply", tmp_path / "b.ply"
    write_ply(line, first)
    write_ply(line + [0.2, 0.0, 0.0], second)
    code = main(["register", str(first), str(second), "--out", str(tmp_path / "t.json"), "-q"])
    assert code == EXIT_DEGENERATE
    assert "view 1" in capsys.readouterr().err


def test_default_flags_give_default_config(monkeypatch) -> None:
    monkeypatch.delenv("STMMREG_THREADS", raising=False)
    args = build_parser().parse_args(["register", "a.ply", "b.ply"])
    assert config_from_args(args) == RegistrationConfig()


def test_flags_reach_the_config(monkeypatch) -> None:
    monkeypatch.setenv("STMMREG_THREADS", "3")
    args = build_parser().parse_args(
        ["register", "a.ply", "b.ply", "--dof", "5", "--mode", "gaussian", "--anchor", "2", "--symmetric-sigma"]
    )
    config = config_from_args(args)
    assert (config.dof, config.mode, config.anchor_view, config.threads) == (5.0, Mode.GAUSSIAN, 2, 3)
    assert config.symmetric_sigma and not config.rebuild_per_view
