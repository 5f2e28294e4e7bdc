import json
import math

import numpy as np
import pytest

from randcusp import cli
from randcusp.experiments import argmax_mode, run_sup
from randcusp.io import BASE_COLUMNS, ResultTable, RunManifest, load_config, write_outputs


def test_table_roundtrip(tmp_path):
    t = ResultTable(["extra"])
    t.add(k=60, region="compact", model="spherical", statistic="mean", value=1.0 / 3,
          stderr=float("nan"), extra=True)
    t.add(k=120, region="compact", model="gaussian", statistic="mean", value=2.5, stderr=0.1,
          extra="x", late=7)
    t.write_csv(tmp_path / "t.csv")
    t.write_json(tmp_path / "t.json")
    back = ResultTable.read_csv(tmp_path / "t.csv")
    assert tuple(back.columns[:6]) == BASE_COLUMNS
    assert back.columns[-1] == "late"
    assert back.rows[0]["value"] == 1.0 / 3  # 17 significant digits round-trip exactly
    assert math.isnan(back.rows[0]["stderr"])
    assert back.rows[0]["extra"] is True
    assert back.rows[1]["late"] == 7
    js = ResultTable.read_json(tmp_path / "t.json")
    assert js.rows[1]["value"] == 2.5


def test_table_schema_check(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="schema"):
        ResultTable.read_csv(p)


def test_config_parse(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# a comment\nn-samples = 10\n\nseed=3  # trailing\n")
    assert load_config(p) == {"n_samples": "10", "seed": "3"}
    p.write_text("oops\n")
    with pytest.raises(ValueError):
        load_config(p)


def test_manifest(tmp_path):
    t = ResultTable()
    m = RunManifest("test", {"a": 1}, seed=5)
    paths = write_outputs(t, m, tmp_path / "out", "x")
    data = json.loads(paths[-1].read_text())
    assert data["seed"] == 5 and data["finished"] >= data["started"]
    assert data["outputs"] == ["x.csv", "x.json"]


def test_cli_kernel(capsys):
    assert cli.main(["kernel", "--z", "0.2,1.1", "--w", "0.2,1.1", "--k", "200"]) == 0
    out = capsys.readouterr().out
    val = float(out.split("=")[1].split()[0])
    assert abs(val - 2) < 0.05 and "tail_bound" in out
    assert cli.main(["kernel", "--z", "0,1", "--w", "0,1", "--k", "102"]) == 0
    val = float(capsys.readouterr().out.split("=")[1].split()[0])
    assert abs(val) < 0.05


def test_cli_kernel_methods(capsys):
    for m in ("direct", "coset"):
        assert cli.main(["kernel", "--z", "0,3", "--w", "0,3", "--k", "40", "--method", m]) == 0
    a, b = [float(line.split("=")[1].split()[0]) for line in capsys.readouterr().out.splitlines()
            if line.startswith("R_")]
    assert a == pytest.approx(b, rel=1e-8)


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["kernel", "--z", "0,1", "--w", "0,1", "--k", "13"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["kernel", "--z", "0,-1", "--w", "0,1", "--k", "12"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code == 2


def test_cli_no_cusp_forms(capsys):
    assert cli.main(["kernel", "--z", "0,1.5", "--w", "0,1.5", "--k", "14"]) == 0
    assert "N = 0" in capsys.readouterr().out


def test_cli_variance_profile(tmp_path, capsys):
    k = 400
    assert cli.main(["variance-profile", "--k", str(k), "--y-min", "2", "--y-max", "80",
                     "--steps", "80", "--out", str(tmp_path)]) == 0
    t = ResultTable.read_csv(tmp_path / "profile_k400.csv")
    assert len(t) == 80
    assert (tmp_path / "profile_k400.svg").exists()
    beyond = [r for r in t.rows if r["y"] > k / (2 * math.pi)]
    assert beyond and all(r["value"] < 1e-10 for r in beyond)
    assert all(r["resonant"] for r in t.rows)  # the wide window covers everything here
    strict = [r for r in t.rows if r["strict_resonant"]]
    assert 0 < len(strict) < len(t.rows)
    assert min(r["value"] for r in strict) > 100 * max(r["value"] for r in t.rows if r["y"] > 40)


def test_cli_sup_and_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("n_samples = 64\nseed = 2\nregion = compact\n")
    out = tmp_path / "o"
    assert cli.main(["--config", str(cfg), "sup-experiment", "--k-list", "60,120,240",
                     "--n-samples", "80", "--out", str(out)]) == 0
    man = json.loads((out / "sup_compact_spherical.manifest.json").read_text())
    assert man["config"]["n_samples"] == 80  # flag beats file
    assert man["seed"] == 2  # file beats default
    assert len(man["grids"]) == 3
    assert (out / "sup_compact_spherical_growth.svg").exists()
    t = ResultTable.read_csv(out / "sup_compact_spherical.csv")
    assert [r["k"] for r in t.rows] == [60, 120, 240]


def test_cli_sup_reproducible(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["sup-experiment", "--k-list", "60", "--n-samples", "50", "--seed", "9",
                         "--no-plots", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "sup_compact_spherical.csv").read_text()
    b = (tmp_path / "b" / "sup_compact_spherical.csv").read_text()
    assert a == b


def test_cli_lp(tmp_path, capsys):
    assert cli.main(["lp-experiment", "--k", "60", "--n-samples", "400", "--out", str(tmp_path)]) == 0
    t = ResultTable.read_csv(tmp_path / "lp_k60.csv")
    row = [r for r in t.rows if r["statistic"] == "moment_root" and r["p"] == 2][0]
    assert abs(row["z"]) < 5 and row["identity_pass"] is True
    assert (tmp_path / "lp_k60.png").exists() or (tmp_path / "lp_k60.svg").exists()


def test_cli_lp_single_sample_warns(tmp_path, capsys):
    assert cli.main(["lp-experiment", "--k", "60", "--n-samples", "1", "--no-plots",
                     "--out", str(tmp_path)]) == 0
    assert "warning" in capsys.readouterr().err


def test_cli_concentration(tmp_path, capsys):
    assert cli.main(["concentration", "--k", "60", "--n-samples", "1000", "--out", str(tmp_path)]) == 0
    t = ResultTable.read_csv(tmp_path / "concentration_compact_k60.csv")
    assert t.rows[0]["value"] > 0
    assert cli.main(["concentration", "--k", "60", "--n-samples", "10", "--out", str(tmp_path)]) == 1
    assert "too few samples" in capsys.readouterr().err


def test_cli_concentration_global(tmp_path, capsys):
    assert cli.main(["concentration", "--k", "60", "--region", "global", "--n-samples", "1000",
                     "--out", str(tmp_path)]) == 0
    assert "r^2/sqrt(k)" in capsys.readouterr().out
    t = ResultTable.read_csv(tmp_path / "concentration_global_k60.csv")
    assert t.rows[0]["value"] > 0


def test_cli_validate(capsys):
    assert cli.main(["validate", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "5/5 checks passed" in out
    assert cli.main(["validate", "--quick", "--kernel-eps", "0.1"]) == 1
    out = capsys.readouterr().out
    assert "FAIL  weight-12 kernel vs Delta" in out


def test_argmax_mode_bins():
    ys = np.full(100, 9.0)
    m = argmax_mode(ys, 120)
    assert 7 < m < 11


def test_run_sup_fields():
    cache = {}
    r = run_sup(60, n_samples=64, seed=1, cache=cache)
    assert r.N == 5 and r.stats.n_samples == 64
    assert r.rank <= 5 and r.bias_cap > 0
    again = run_sup(60, n_samples=64, seed=1, cache=cache)
    assert again.stats.mean == r.stats.mean


def test_cli_lp_rejects_infinite_p(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["lp-experiment", "--k", "60", "--p-list", "2,inf", "--out", str(tmp_path)])
    assert e.value.code == 2
    cfg = tmp_path / "c.txt"
    cfg.write_text("p_list = 0.5\n")
    assert cli.main(["--config", str(cfg), "lp-experiment", "--k", "60", "--n-samples", "5",
                     "--no-plots", "--out", str(tmp_path)]) == 1
    assert "config p_list" in capsys.readouterr().err
