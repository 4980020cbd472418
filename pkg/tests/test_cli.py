import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from src.cli import SUMMARY_COLUMNS, run

PROJECT_ROOT = Path(__file__).resolve().parents[1]

CORNER_STAR = "2 1 4\n0.5 0.5\n0 0\n0 1\n1 0\n1 1\n1 2\n1 3\n1 4\n1 5\n"

CHAIN_WITH_SUPPORT = "\n".join([
    "# chain plus two supporting anchors",
    "2 3 3",
    "1 0", "0 0", "0 1", "1 1", "-1 -1", "1 -1",
    "1 2", "2 3", "3 4", "1 4", "1 5", "2 5", "2 6", "3 6",
    "",
])


def _file(tmp_path, text, name="net.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["lb", "--ns", "2", "--ds", "1", "--da", "2"], 1.5),
        (["lb", "--ns", "3", "--ds", "2", "--da", "2"], 1.2),
        (["lb", "--ns", "1", "--da", "4"], 1.0),
    ],
)
def test_lb(capsys, argv, expected):
    assert run(argv) == 0
    out = _json_out(capsys)
    assert out["lb_e_agdop"] == pytest.approx(expected)
    assert out["inputs"]["n_sensors"] == int(argv[2])


def test_lb_without_anchor_links_is_infinite(capsys):
    assert run(["lb", "--ns", "3", "--ds", "2", "--da", "0"]) == 0
    assert _json_out(capsys)["lb_e_agdop"] == "infinite"


@pytest.mark.parametrize(
    "argv",
    [
        ["lb", "--ns", "0", "--da", "2"],
        ["lb", "--ns", "1", "--ds", "1", "--da", "2"],
        ["lb", "--ns", "2", "--da", "-1"],
    ],
)
def test_lb_input_errors(capsys, argv):
    assert run(argv) == 2
    assert "error" in capsys.readouterr().err


def test_dop_corner_star(tmp_path, capsys):
    assert run(["dop", _file(tmp_path, CORNER_STAR), "--sqrt"]) == 0
    out = _json_out(capsys)
    assert out["singular"] is False
    assert out["agdop"] == pytest.approx(1.0)
    assert out["per_coord_dop"] == pytest.approx([0.5, 0.5])
    assert out["sqrt_agdop"] == pytest.approx(1.0)


def test_dop_collinear_is_singular_not_an_error(tmp_path, capsys):
    text = "2 1 2\n0.5 0\n0 0\n1 0\n1 2\n1 3\n"
    assert run(["dop", _file(tmp_path, text)]) == 0
    out = _json_out(capsys)
    assert out["singular"] is True
    assert out["agdop"] is None


def test_dop_cooperative_chain(tmp_path, capsys):
    assert run(["dop", _file(tmp_path, CHAIN_WITH_SUPPORT)]) == 0
    out = _json_out(capsys)
    assert len(out["per_coord_dop"]) == 6
    assert out["agdop"] == pytest.approx(out["gdop"] / 3)


def test_dop_parse_error_names_the_line(tmp_path, capsys):
    assert run(["dop", _file(tmp_path, "2 1 1\n0 0\n1 one\n1 2\n")]) == 2
    assert "line 3" in capsys.readouterr().err


def test_dop_rejects_anchor_links_and_missing_files(tmp_path, capsys):
    assert run(["dop", _file(tmp_path, "2 1 2\n0 0\n1 0\n0 1\n1 2\n2 3\n")]) == 2
    assert "anchor-to-anchor" in capsys.readouterr().err
    assert run(["dop", str(tmp_path / "absent.txt")]) == 2


SWEEP = "\n".join([
    "trials = 20",
    "seed = 3",
    "sweep.1.model = erg",
    "sweep.1.p = 1",
    "sweep.1.n_sensors = 1",
    "sweep.1.anchors = directions",
    "sweep.1.n_anchors = 3..5",
    "",
])


def test_simulate_writes_summary_and_manifest(tmp_path, capsys):
    out_dir = tmp_path / "out"
    assert run(["simulate", _file(tmp_path, SWEEP, "sweep.cfg"), "--out", str(out_dir)]) == 0
    summary = out_dir / "summary.csv"
    with summary.open(encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0].keys()) == list(SUMMARY_COLUMNS)
    assert [int(r["n_anchors"]) for r in rows] == [3, 4, 5]
    for r in rows:
        assert float(r["lb"]) == pytest.approx(4 / int(r["n_anchors"]), rel=1e-8)
        assert float(r["agdop_min"]) >= float(r["lb"]) - 1e-9
        assert r["status"] == "ok" and r["trials"] == "20"
    assert [r["likely_infinite"] for r in rows] == ["true", "false", "false"]

    manifest = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 3
    assert manifest["command"] == "simulate"
    assert manifest["outputs"]["summary.csv"] == hashlib.sha256(summary.read_bytes()).hexdigest()
    with (out_dir / "bins.csv").open(encoding="utf-8", newline="") as f:
        bins = list(csv.DictReader(f))
    assert [b["point"] for b in bins] == ["0", "1", "2"]
    assert [b["lb"] for b in bins] == [r["lb_at_min"] for r in rows]
    assert manifest["outputs"]["bins.csv"] == hashlib.sha256((out_dir / "bins.csv").read_bytes()).hexdigest()
    assert "[3/3]" in capsys.readouterr().err


def test_simulate_is_repeatable_and_seed_overridable(tmp_path):
    cfg = _file(tmp_path, SWEEP, "sweep.cfg")
    assert run(["simulate", cfg, "--out", str(tmp_path / "a")]) == 0
    assert run(["--threads", "3", "simulate", cfg, "--out", str(tmp_path / "b")]) == 0
    assert run(["--seed", "11", "simulate", cfg, "--out", str(tmp_path / "c")]) == 0
    a, b, c = ((tmp_path / d / "summary.csv").read_text() for d in "abc")
    assert a == b
    assert a != c
    assert json.loads((tmp_path / "c" / "manifest.json").read_text())["seed"] == 11


def test_simulate_without_points_writes_header_only(tmp_path):
    out_dir = tmp_path / "out"
    assert run(["simulate", _file(tmp_path, "trials = 5\n", "empty.cfg"), "--out", str(out_dir)]) == 0
    assert (out_dir / "summary.csv").read_text().splitlines() == [",".join(SUMMARY_COLUMNS)]


def test_simulate_bad_config(tmp_path, capsys):
    assert run(["simulate", _file(tmp_path, "trails = 5\n", "bad.cfg"), "--out", str(tmp_path)]) == 2
    assert "trails" in capsys.readouterr().err


def test_optimize_single_sensor(capsys):
    assert run(["optimize", "--single", "4", "--restarts", "2", "--max-evals", "2000"]) == 0
    out = _json_out(capsys)
    assert out["uniform_angles_gdop"] == pytest.approx(1.0)
    assert out["lb"] == pytest.approx(1.0)
    assert 1.0 - 1e-9 <= out["best_agdop"] <= 1.05
    assert len(out["positions"]) == 5


def test_optimize_reference_case(capsys):
    assert run(["optimize", "--case", "1", "--restarts", "2", "--max-evals", "2000"]) == 0
    out = _json_out(capsys)
    assert out["case"] == 1
    assert out["lb"] == pytest.approx(1.5)
    assert out["best_agdop"] >= 1.5
    assert out["positions"][0] == [0.0, 0.0]


def test_optimize_underdetermined(capsys):
    assert run(["optimize", "--single", "1", "--restarts", "1"]) == 2
    assert "never localizable" in capsys.readouterr().err


def test_locate_synthesized_noiseless(tmp_path, capsys):
    assert run(["locate", _file(tmp_path, CHAIN_WITH_SUPPORT)]) == 0
    out = _json_out(capsys)
    assert out["converged"] is True and out["synthetic"] is True
    assert out["error_norm"] < 1e-8
    assert out["positions"][1] == pytest.approx([0.0, 0.0], abs=1e-8)


def test_locate_underdetermined_reports_singular(tmp_path, capsys):
    assert run(["locate", _file(tmp_path, "2 1 1\n0.5 0.5\n0 0\n1 2\n")]) == 0
    out = _json_out(capsys)
    assert out["singular"] is True
    assert out["reason"] == "singular"
    assert out["converged"] is False


def test_locate_with_inline_ranges(tmp_path, capsys):
    text = "2 1 4\n0.4 0.6\n0 0\n0 1\n1 0\n1 1\n" + "".join(
        f"1 {a} 0.70710678118654757\n" for a in range(2, 6)
    )
    assert run(["locate", _file(tmp_path, text)]) == 0
    out = _json_out(capsys)
    assert out["converged"] is True and out["synthetic"] is False
    assert out["error_norm"] is None
    assert out["positions"][0] == pytest.approx([0.5, 0.5], abs=1e-9)


def test_no_command_prints_help(capsys):
    assert run([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_health(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LOG_FILE", str(tmp_path / "coloc.log"))
    assert run(["--health"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("HEALTHCHECK")
    assert "RESULT: OK" in out


def test_main_script_help():
    proc = subprocess.run(
        [sys.executable, "main.py", "--help"],
        cwd=PROJECT_ROOT,
        capture_output=True,
        text=True,
    )
    combined = (proc.stdout or "") + (proc.stderr or "")
    assert proc.returncode == 0, f"rc={proc.returncode}, out={combined}"
    assert "usage: coloc" in combined.lower()
