import csv
import json
import subprocess
import sys

import pytest

from torusrestrict import cli
from torusrestrict.lattice_shell import two_squares_count_oracle


def run_cli(*args):
    return cli.main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_shells_sweep_matches_oracle(tmp_path):
    out = tmp_path / "shells.csv"
    assert run_cli("shells", "--d", 2, "--m-min", 1, "--m-max", 100, "--out", out) == 0
    rows = read_csv(out)
    assert len(rows) == 100
    for row in rows:
        m = int(row["m"])
        assert int(row["count"]) == two_squares_count_oracle(m) == int(row["oracle"])
        assert row["experiment"] == "shells" and row["schema_version"] == "1"
        assert row["status"] == "ok" and row["seed"] == "0"


def test_empty_range_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("restrict", "--m-min", 10, "--m-max", 5, "--out", tmp_path / "x.csv")
    assert exc.value.code == 2
    assert "range" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


EXPERIMENT_ARGS = {
    "shells": ["--d", 3, "--m-min", 1, "--m-max", 40],
    "caps": ["--d", 2, "--m-list", "25,65,1105,5525"],
    "jarnik": ["--m-min", 1, "--m-max", 300],
    "meansquare": ["--d", 3, "--m-list", "100,1009,2001"],
    "sigma": ["--surface", "ellipse:a=0.3,b=0.2", "--r-min", 4, "--r-max", 32, "--samples", 6],
    "restrict": ["--m-list", "3,25,65,1105"],
    "certify": ["--surface", "sphere:rho=0.25", "--m-list", "26,54"],
    "bilinear": ["--beta-list", "100,1000", "--trials", 2],
    "cappair": ["--m-list", "1001,2001,3001"],
}


@pytest.mark.parametrize("experiment", cli.EXPERIMENTS)
def test_byte_identical_across_jobs(experiment, tmp_path):
    args = EXPERIMENT_ARGS[experiment]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert run_cli(experiment, *args, "--seed", 3, "--jobs", 1, "--out", a) == 0
    assert run_cli(experiment, *args, "--seed", 3, "--jobs", 2, "--out", b) == 0
    assert run_cli(experiment, *args, "--seed", 3, "--jobs", 1, "--out", c) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    rows = read_csv(a)
    assert rows and set(rows[0]) == set(cli.header(experiment))
    assert all(v != "" for row in rows for v in row.values())


def test_status_column_records_failures(tmp_path):
    out = tmp_path / "r.csv"
    assert run_cli("restrict", "--m-list", "3,25", "--out", out) == 0
    rows = read_csv(out)
    assert [r["m"] for r in rows] == ["3", "25"]
    assert rows[0]["status"] != "ok" and rows[1]["status"] == "ok"


def test_json_output(tmp_path):
    out = tmp_path / "b.json"
    assert run_cli("bilinear", "--beta-list", "100", "--format", "json", "--trials", 1,
                   "--patterns", "maximal_grid", "--out", out) == 0
    payload = json.loads(out.read_text())
    assert payload["schema_version"] == 1 and payload["experiment"] == "bilinear"
    (rec,) = payload["records"]
    assert rec["beta"] == 100 and rec["size_x"] == 10
    assert rec["magnitude"] <= rec["trivial_bound"]


def test_floats_have_17_digits(tmp_path):
    out = tmp_path / "j.csv"
    run_cli("jarnik", "--m-list", "25", "--out", out)
    (row,) = read_csv(out)
    assert float(row["min_arc3"]) == 4.636476090008061
    assert len(row["min_arc3"].replace(".", "")) >= 16


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[common]\nseed = 4\n\n[shells]\nd = 2\nm_min = 1\nm_max = 20\n")
    out = tmp_path / "s.csv"
    assert run_cli("shells", "--config", cfg, "--m-max", 10, "--out", out) == 0
    rows = read_csv(out)
    assert len(rows) == 10 and rows[0]["seed"] == "4"


def test_validate_well_formed(tmp_path, capsys):
    cfg = tmp_path / "ok.ini"
    cfg.write_text("[restrict]\nm_min = 1\nm_max = 50\ntol = 1e-9\nsurface = circle:rho=0.2\n")
    assert run_cli("validate", cfg) == 0
    assert capsys.readouterr().out == ""


def test_validate_negative_tol(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[restrict]\nm_min = 1\nm_max = 50\ntol = -1\n")
    assert run_cli("validate", cfg) == 1
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 and "tol" in lines[0]


def test_validate_unknown_experiment_and_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[warp]\nm_min = 1\n\n[shells]\nm_min = 1\nm_max = 2\ncolour = red\n")
    assert run_cli("validate", cfg) == 1
    out = capsys.readouterr().out
    assert "warp" in out and all(name in out for name in cli.EXPERIMENTS)
    assert "colour" in out


def test_validate_unreadable(tmp_path):
    assert run_cli("validate", tmp_path / "missing.ini") == 2


def test_config_lists_every_violation():
    cfg = cli.ExperimentConfig("bilinear", tol=-1.0, jobs=0, beta_list=[0.5], patterns=["x"])
    diags = cli.config_diagnostics(cfg)
    assert len(diags) == 4


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("old")
    cli.write_atomic(str(p), "new")
    assert p.read_text() == "new"
    assert [f.name for f in tmp_path.iterdir()] == ["f.txt"]


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run([sys.executable, "-m", "torusrestrict", "shells", "--m-list", "25",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert read_csv(out)[0]["count"] == "12"
