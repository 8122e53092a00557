import json
from importlib import resources

import numpy as np
import pytest

from sigsde.cli import main
from sigsde.config import ConfigError, bundled_config, config_from_dict, parse_config
from sigsde.estimator import empirical_moments
from sigsde.sde_model import simulate_batch
from sigsde.shuffle_algebra import word_index
from sigsde.trajectory_io import read_trajectories, write_trajectories


def exp1_raw():
    return json.loads(resources.files("sigsde").joinpath("configs/experiment1.json").read_text())


def write_cfg(tmp_path, raw, name="cfg.json"):
    fn = tmp_path / name
    fn.write_text(json.dumps(raw))
    return str(fn)


# ---------------------------------------------------------------- config

def test_bundled_experiment_one():
    cfg = bundled_config(1)
    assert cfg.true_params.tolist() == [-1, 0, 4]
    assert cfg.word_sets["W1"] == [(0, 1, 0), (0, 1, 1), (1, 0, 1)]
    assert cfg.word_sets["W2"] == [(1,), (1, 1), (0, 1, 1)]
    assert (cfg.T, cfg.dt, cfg.N, cfg.r, cfg.theta.q) == (0.2, 0.001, 2000, 3, 3)
    mat = cfg.theta.bind(cfg.true_params)
    assert mat[0, 0, 0] == 1.0 and mat[0, 0, 2] == -1.0 and mat[0, 1, 6] == 4.0


@pytest.mark.parametrize("number,d", [(1, 3), (2, 5), (3, 6)])
def test_bundled_configs_parse(number, d):
    cfg = bundled_config(number)
    assert cfg.theta.num_unknowns == d == len(cfg.true_params)
    for words in cfg.word_sets.values():
        assert len(words) == d


def test_experiment_three_model():
    cfg = bundled_config(3)
    mat = cfg.theta.bind(cfg.true_params)
    # row 3 drift -5 ((2,1) - (1,2)); diffusion only against its own noise
    assert mat[2, 0, word_index((2, 1), 4)] == -5.0 and mat[2, 0, word_index((1, 2), 4)] == 5.0
    assert mat[2, 3, 0] == 1.0 and mat[2, 1, 0] == 0.0


def test_config_errors_name_the_field(tmp_path):
    raw = exp1_raw()
    del raw["model"]["m"]
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw)
    assert exc.value.path == "model.m"
    raw = exp1_raw()
    raw["estimation"]["word_sets"]["W2"][0] = "1.7"
    with pytest.raises(ConfigError, match=r"estimation.word_sets.W2\[0\]"):
        config_from_dict(raw)
    raw = exp1_raw()
    raw["model"]["terms"][0]["param"] = 9
    with pytest.raises(ConfigError, match=r"model.terms\[0\].param"):
        config_from_dict(raw)
    raw = exp1_raw()
    raw["simulation"]["dt"] = 0.003
    with pytest.raises(ConfigError, match="simulation.dt"):
        config_from_dict(raw)
    raw = exp1_raw()
    raw["model"]["true_params"] = [1]
    with pytest.raises(ConfigError, match="model.true_params"):
        config_from_dict(raw)
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_mask_and_known_maps():
    raw = {"model": {"m": 1, "n": 1, "q": 2, "theta": {"1,0": {"e": 0.5, "1": -1}},
                     "mask": [[1, 1, "e"]], "true_params": [2.0]},
           "estimation": {"word_sets": {"A": ["1.1"]}}}
    cfg = config_from_dict(raw)
    mat = cfg.theta.bind([2.0])
    assert mat[0, 0, 0] == 0.5 and mat[0, 0, 2] == -1.0 and mat[0, 1, 0] == 2.0
    assert cfg.words == "A" and cfg.dt == 0.001 and cfg.r == 3
    raw["model"]["mask"].append([1, 1, "e"])
    raw["model"]["true_params"] = [2.0, 1.0]
    raw["estimation"]["word_sets"]["A"] = ["1.1", "1"]
    with pytest.raises(ConfigError, match="masked twice"):
        config_from_dict(raw)


# ---------------------------------------------------------------- trajectory files

@pytest.mark.parametrize("per_file", [False, True])
def test_trajectory_round_trip(tmp_path, per_file):
    cfg = bundled_config(1)
    batch = simulate_batch(cfg.theta, 0.05, 0.001, 7, seed=2, values=cfg.true_params)
    target = tmp_path / ("dir" if per_file else "paths.csv")
    write_trajectories(str(target), batch.grid, batch.paths, per_file=per_file)
    grid, paths = read_trajectories(str(target))
    assert np.array_equal(grid, batch.grid) and np.array_equal(paths, batch.paths)
    words = cfg.word_sets["W1"]
    a = empirical_moments(batch, words, 3)
    b = empirical_moments(paths, words, 3)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


def test_trajectory_file_errors(tmp_path):
    fn = tmp_path / "x.csv"
    fn.write_text("time,a\n0,0\n")
    with pytest.raises(ValueError):
        read_trajectories(str(fn))


# ---------------------------------------------------------------- commands

def test_cli_simulate_and_sig(tmp_path, capsys):
    cfg = write_cfg(tmp_path, exp1_raw())
    out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--N", "3", "--out", str(out)]) == 0
    assert (out / "paths.csv").read_text().startswith("sample,t,y0,y1\n")
    capsys.readouterr()
    assert main(["sig", "--in", str(out / "paths.csv"), "--level", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "word;coefficient" and lines[1] == "e;1.0" and len(lines) == 8


def test_cli_expected_sig(capsys):
    assert main(["expected-sig", "--n", "1", "--T", "0.2", "--level", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "word,closed_form" and "1.1,0.1" in out
    assert main(["expected-sig", "--n", "1", "--T", "0.2", "--level", "2", "--mc", "500"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "word,closed_form,mc_mean,mc_se"


def test_cli_build_poly(tmp_path, capsys):
    cfg = write_cfg(tmp_path, exp1_raw())
    assert main(["build-poly", "--config", cfg, "--words", "W2", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert text.startswith("P_3^1 = ")
    rows = (tmp_path / "polys.csv").read_text().splitlines()
    assert rows[0] == "word;exponents;coefficient" and len(rows) > 4


def test_cli_estimate_is_deterministic(tmp_path):
    raw = exp1_raw()
    raw["simulation"]["N"] = 150
    cfg = write_cfg(tmp_path, raw)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["estimate", "--config", cfg, "--trials", "2", "--out", str(out)]) == 0
        outs.append({f: (out / f).read_bytes() for f in ("roots.csv", "summary.csv", "moments.csv")})
    assert outs[0] == outs[1]


def test_cli_experiment_and_env_out_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SIGSDE_OUT_DIR", str(tmp_path / "env"))
    monkeypatch.setenv("SIGSDE_THREADS", "1")
    assert main(["experiment", "1", "--trials", "2", "--N", "200", "--seed", "7"]) == 0
    summary = (tmp_path / "env" / "summary.csv").read_text().splitlines()
    assert [row.split(",")[0] for row in summary[1:4]] == ["theta1", "theta2", "theta3"]
    assert "theta3: mean" in capsys.readouterr().out


def test_cli_nonident(tmp_path, capsys):
    assert main(["nonident-demo", "--T", "0.3", "--out", str(tmp_path)]) == 0
    assert "distance at T=0.3" in capsys.readouterr().out
    assert (tmp_path / "path_a.csv").exists() and (tmp_path / "path_b.csv").exists()


def test_cli_exit_codes(tmp_path, capsys):
    raw = exp1_raw()
    del raw["model"]["m"]
    assert main(["estimate", "--config", write_cfg(tmp_path, raw)]) == 2
    assert "model.m" in capsys.readouterr().err
    raw = {"model": {"m": 1, "n": 0, "q": 1, "mask": [[1, 0, "e"]], "true_params": [1.0]},
           "simulation": {"T": 0.1, "dt": 0.01, "N": 5},
           "estimation": {"r": 1, "word_sets": {"A": ["1"]}, "trials": 1,
                          "solver": {"starts": 0, "max_iter": 1}}}
    assert main(["estimate", "--config", write_cfg(tmp_path, raw, "c2.json"),
                 "--out", str(tmp_path / "o")]) == 3
    raw = exp1_raw()
    raw["simulation"].update(N=20, cap=1e-3)
    assert main(["estimate", "--config", write_cfg(tmp_path, raw, "c3.json"), "--trials", "1",
                 "--out", str(tmp_path / "o3")]) == 4
    assert main(["sig", "--in", str(tmp_path / "missing.csv"), "--level", "2"]) == 1
    with pytest.raises(SystemExit):
        main(["frobnicate"])
