import hashlib
import json
import math

import numpy as np
import pytest

from podstab import cli
from podstab.errors import ConfigError
from podstab.runner import load_config, make_y0, parse_config, read_numeric_csv, render_svg, thread_cap


def small_config(tmp_path, **over):
    cfg = {
        "model": {"length": math.pi, "potential_a": 15.0, "truncation_n": 32, "actuators": [[0.3, 0.8]]},
        "y0_mode": "all_ones",
        "t_step": 0.1,
        "n_values": [20],
        "m": 5,
        "eps_values": [0.01],
        "horizon": 10.0,
        "samples": 16,
        "output_dir": str(tmp_path / "out"),
        "block_system": {"eps_grid": [0.1, 0.001], "alpha_grid": [0.1, 0.001]},
    }
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def check_manifest(root):
    man = json.loads((root / "manifest.json").read_text())
    for f in man["files"]:
        assert hashlib.sha256((root / f["path"]).read_bytes()).hexdigest() == f["sha256"]
    return man


def test_run_writes_reports(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert cli.main(["run", str(cfg)]) == 0
    root = tmp_path / "out"
    lines = (root / "sweep.csv").read_text().splitlines()
    assert lines[0] == "n,eps,abscissa,gamma_star,gamma_eps,verdict"
    assert lines[1].startswith("20,0.01,") and lines[1].endswith(",stable")
    man = check_manifest(root)
    paths = {f["path"] for f in man["files"]}
    assert {"sweep.csv", "reports/report_n20_eps0.01.json", "trajectories/traj_n20_eps0.01.csv"} <= paths
    assert man["runs"][0]["verdict"] == "stable"
    assert "stable" in capsys.readouterr().out


def test_m_below_ell_exits_3(tmp_path, capsys):
    assert cli.main(["run", str(small_config(tmp_path, m=2))]) == 3
    assert "InsufficientOrder" in capsys.readouterr().err
    assert check_manifest(tmp_path / "out")["exit_code"] == 3


@pytest.mark.parametrize(
    "over",
    [{"n_values": []}, {"eps_values": []}, {"t_step": 0.0}, {"y0_mode": "bogus"}, {"tolerance_profile": {"nope": 1}}, {"m": 0}],
)
def test_config_errors_exit_2(tmp_path, over):
    assert cli.main(["run", str(small_config(tmp_path, **over))]) == 2


def test_missing_and_malformed_config(tmp_path):
    assert cli.main(["model", str(tmp_path / "absent.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["lemmas", str(bad)]) == 2


def test_lemmas_creates_missing_dir(tmp_path):
    out = tmp_path / "deep" / "er"
    assert cli.main(["lemmas", str(small_config(tmp_path)), "--out", str(out)]) == 0
    man = check_manifest(out)
    names = {f["path"] for f in man["files"]}
    assert {"lemmas_report.json", "sigma.csv", "deficiency.csv", "operator_norms.csv", "block_trace.csv"} <= names


def test_unwritable_dir_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["lemmas", str(small_config(tmp_path)), "--out", str(blocker / "sub")]) == 2


def test_model_command_prints_split(tmp_path, capsys):
    assert cli.main(["model", str(small_config(tmp_path))]) == 0
    out = capsys.readouterr().out
    assert "ell = 3" in out and "beta_ell = 6" in out and "gamma = 1" in out
    assert "kalman rank (unstable block, B) = 3 of 3" in out


def test_y0_modes(tmp_path):
    base = json.loads(small_config(tmp_path).read_text())
    seeded = parse_config({**base, "y0_mode": "random_seeded", "y0_seed": 7})
    np.testing.assert_array_equal(make_y0(seeded), make_y0(seeded))
    vec = list(range(1, 33))
    explicit = parse_config({**base, "y0_mode": "explicit", "y0_vector": vec})
    np.testing.assert_array_equal(make_y0(explicit), vec)
    with pytest.raises(ConfigError):
        parse_config({**base, "y0_mode": "explicit", "y0_vector": [1.0]})


def test_thread_cap(monkeypatch):
    monkeypatch.delenv("STAB_THREADS", raising=False)
    assert thread_cap(8) == 1
    monkeypatch.setenv("STAB_THREADS", "4")
    assert thread_cap(8) == 4 and thread_cap(2) == 2
    monkeypatch.setenv("STAB_THREADS", "x")
    with pytest.raises(ConfigError):
        thread_cap(3)


def test_parallel_run_matches_serial(tmp_path, monkeypatch):
    cfg = small_config(tmp_path, eps_values=[0.1, 0.01])
    monkeypatch.setenv("STAB_THREADS", "1")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("STAB_THREADS", "2")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("sweep.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes().replace(b"/a", b"") == (tmp_path / "b" / name).read_bytes().replace(b"/b", b"")


def test_plot_two_points(tmp_path):
    src = tmp_path / "two.csv"
    src.write_text("t,norm\n0,1\n1,0.5\n")
    out = tmp_path / "p.svg"
    assert cli.main(["plot", str(src), str(out)]) == 0
    svg = out.read_text()
    assert svg.count("<polyline") == 1 and svg.startswith("<svg")
    first = out.read_bytes()
    assert cli.main(["plot", str(src), str(out)]) == 0
    assert out.read_bytes() == first
    assert cli.main(["plot", str(src), str(tmp_path / "l.svg"), "--logy"]) == 0


@pytest.mark.parametrize("text", ["", "t,norm\n", "t,norm\n1,2\n3\n", "a,b\nx,y\n"])
def test_plot_malformed_exit_2(tmp_path, text):
    src = tmp_path / "bad.csv"
    src.write_text(text)
    assert cli.main(["plot", str(src), str(tmp_path / "o.svg")]) == 2


def test_plot_logy_rejects_nonpositive(tmp_path):
    src = tmp_path / "z.csv"
    src.write_text("t,v\n0,1\n1,0\n")
    assert cli.main(["plot", str(src), str(tmp_path / "o.svg"), "--logy"]) == 2


def test_read_numeric_csv_drops_text_columns(tmp_path):
    src = tmp_path / "s.csv"
    src.write_text("n,eps,verdict\n1,0.1,stable\n2,0.2,stable\n")
    header, data = read_numeric_csv(src)
    assert header == ["n", "eps"] and data.shape == (2, 2)
    assert render_svg(header, data).count("<polyline") == 1


def test_shipped_config_parses():
    from pathlib import Path

    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "default.json")
    assert cfg.m == 5 and cfg.model.truncation_n == 64
