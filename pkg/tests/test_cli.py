import json
import shutil

import pytest

from swarmform.cli import main

from conftest import SCENARIO_DIR


@pytest.fixture()
def workdir(tmp_path):
    """Copy of the shipped scenarios, so path resolution mirrors real use."""
    shutil.copytree(SCENARIO_DIR, tmp_path / "scenarios")
    return tmp_path


def test_dump_table_prints_csv(workdir, capsys):
    shape = workdir / "scenarios" / "shapes" / "triangle.txt"
    rc = main(["dump-table", "--shape", str(shape), "--spacing", "1.0"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.splitlines()[0] == "label,neighbor,angle_rad,distance_m"
    assert "0,2,1.570796327,1.0" in out


def test_dump_table_missing_file_is_io_error(workdir, capsys):
    rc = main(["dump-table", "--shape", str(workdir / "nope.txt")])
    assert rc == 2


def test_validate_ok(workdir, capsys):
    rc = main(["validate", "--scenario", str(workdir / "scenarios" / "triangle_formation.json")])
    assert rc == 0
    assert "4 bots" in capsys.readouterr().out


def test_validate_bad_scenario_is_exit_1(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"arena": {"min": [0, 0], "max": [1, 1]}}), encoding="utf-8")
    rc = main(["validate", "--scenario", str(bad)])
    assert rc == 1
    assert "validation error" in capsys.readouterr().err


def test_validate_disconnected_shape_reports_connectivity(workdir, tmp_path, capsys):
    doc = json.loads((workdir / "scenarios" / "triangle_formation.json").read_text())
    doc["shape"] = {"matrix": "0 -1 -1\n-1 -1 -1\n-1 -1 1"}
    doc["spawn"] = {"poses": [[0, 0, 0], [1, 0, 0]]}
    bad = tmp_path / "disconnected.json"
    bad.write_text(json.dumps(doc), encoding="utf-8")
    rc = main(["validate", "--scenario", str(bad)])
    assert rc == 1
    assert "8-connected" in capsys.readouterr().err


def test_run_writes_artifacts_and_is_deterministic(workdir, capsys):
    scenario = str(workdir / "scenarios" / "triangle_formation.json")
    out1 = workdir / "out1"
    out2 = workdir / "out2"
    assert main(["run", "--scenario", scenario, "--out", str(out1)]) == 0
    assert main(["run", "--scenario", scenario, "--out", str(out2)]) == 0
    t1 = (out1 / "trace.csv").read_bytes()
    t2 = (out2 / "trace.csv").read_bytes()
    assert t1 == t2
    summary = json.loads((out1 / "summary.json").read_text())
    assert set(summary) >= {
        "final_states",
        "ticks_to_formation",
        "ticks_total",
        "min_bot_clearance",
        "min_obstacle_clearance",
        "peak_residual_force",
    }
    assert (out1 / "metrics.csv").read_text().startswith("kind,abscissa,value")


@pytest.mark.parametrize(
    "scenario_name",
    ["triangle_formation.json", "single_bot.json", "wedge_small_obstacle.json"],
)
def test_metrics_recomputation_matches_run_output(workdir, capsys, scenario_name):
    # single_bot and wedge_small_obstacle exercise transit-phase series,
    # where the recomputation reads back 9-digit trace coordinates
    scenario = str(workdir / "scenarios" / scenario_name)
    out = workdir / "out"
    main(["run", "--scenario", scenario, "--out", str(out)])
    rc = main(
        [
            "metrics",
            "--trace", str(out / "trace.csv"),
            "--out", str(workdir / "recomputed.csv"),
        ]
    )
    assert rc == 0
    assert (workdir / "recomputed.csv").read_bytes() == (out / "metrics.csv").read_bytes()


def test_run_seed_override(workdir, capsys):
    scenario = str(workdir / "scenarios" / "triangle_formation.json")
    out1 = workdir / "a"
    out2 = workdir / "b"
    main(["run", "--scenario", scenario, "--out", str(out1), "--seed", "9"])
    main(["run", "--scenario", scenario, "--out", str(out2)])
    assert (out1 / "trace.csv").read_bytes() != (out2 / "trace.csv").read_bytes()


def test_run_missing_scenario_is_exit_2(workdir, capsys):
    rc = main(["run", "--scenario", str(workdir / "none.json"), "--out", str(workdir / "o")])
    assert rc == 2
