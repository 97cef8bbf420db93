import json
import sys
from io import StringIO
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from coso.cli import run  # noqa: E402
from tests.instances import DATA_DIR  # noqa: E402

EXAMPLE = str(DATA_DIR / "example1.json")


def _run(*argv):
    out = StringIO()
    status = run(list(argv), out=out)
    return status, out.getvalue()


def _json(*argv):
    status, text = _run(*argv, "--format", "json")
    assert status == 0, text
    return json.loads(text)


def test_psp_command():
    document = _json("psp", EXAMPLE)
    assert document["critical_points"] == ["4", "6", "13/2"]
    assert document["min_sum_rate"] == "13/2"

    status, text = _run("psp", EXAMPLE)
    assert status == 0
    assert "R_ACO(V) = 6.5" in text
    assert "merge at α=4: [4] [5] -> [4,5]" in text


def test_psp_profile_and_workbook(tmp_path):
    document = _json("psp", EXAMPLE, "--ordering", "4,5,2,3,1", "--profile", "--xlsx", str(tmp_path / "psp.xlsx"))
    assert document["ordering"] == [4, 5, 2, 3, 1]
    assert document["psp"]["critical_points"] == ["4", "6", "13/2"]
    assert (tmp_path / "psp.xlsx").exists()


def test_minrate_command():
    document = _json("minrate", EXAMPLE, "--model", "nco", "--ordering", "4,5,2,3,1")
    assert document["min_sum_rate"] == "7"
    assert document["optimal_rates"] == {"1": "0", "2": "1", "3": "1", "4": "5", "5": "0"}

    local = _json("minrate", EXAMPLE, "--subset", "1,4,5", "--method", "bruteforce")
    assert local["min_sum_rate"] == "5"
    assert local["fundamental_partition"] == [[1], [4, 5]]


def test_region_check_command():
    inside = _json("region-check", EXAMPLE, "1,1/2,1/2,9/2,0")
    assert inside["in_region"] is True
    outside = _json("region-check", EXAMPLE, "4=1,5=1", "--subset", "4,5")
    assert outside["in_region"] is False
    assert outside["violated"] == [[4]]


def test_two_stage_command():
    document = _json("two-stage", EXAMPLE, "--ordering", "4,5,2,3,1")
    assert document["subset"] == [4, 5]
    assert document["alpha_hat"] == "4"
    assert document["alpha_lb"] == "23/4"

    status, text = _run("two-stage", EXAMPLE, "--ordering", "5,1,4,2,3", "--alpha-lb", "25/4")
    assert status == 0
    assert "C=[1,4,5] at prefix 3" in text


def test_complimentary_command():
    document = _json("complimentary", EXAMPLE)
    assert document["method"] == "oracle"
    assert document["subsets"] == [[1, 4], [4, 5], [1, 4, 5], [1, 2, 3, 4]]
    detected = _json("complimentary", EXAMPLE, "--alpha-lb", "23/4")
    assert detected["subsets"] == [[4, 5]]


def test_plan_round_trip(tmp_path):
    plan_path = tmp_path / "plans" / "nco.json"
    status, text = _run("multi-stage", EXAMPLE, "--model", "nco", "--ordering", "4,5,2,3,1", "-o", str(plan_path))
    assert status == 0
    assert "sum-rate 7" in text
    assert json.loads(plan_path.read_text())["alpha_tilde"] == ["4", "6", "7"]

    status, text = _run("validate", EXAMPLE, str(plan_path), "--strict")
    assert status == 0
    assert "FAIL" not in text

    report = _json("simulate", EXAMPLE, str(plan_path))
    assert report["block_length"] == 1
    assert report["total_transmissions"] == 7

    status, dot = _run("export-tree", str(plan_path), "--format", "dot")
    assert status == 0
    assert dot.startswith("digraph so_tree_nco")


def test_strict_validation_fails_on_a_tampered_plan(tmp_path):
    plan_path = tmp_path / "aco.json"
    assert _run("multi-stage", EXAMPLE, "--ordering", "4,5,2,3,1", "-o", str(plan_path))[0] == 0
    document = json.loads(plan_path.read_text())
    document["stages"][-1]["cumulative_rates"]["2"] = "0"
    plan_path.write_text(json.dumps(document))

    assert _run("validate", EXAMPLE, str(plan_path))[0] == 0
    assert _run("validate", EXAMPLE, str(plan_path), "--strict")[0] == 1


def test_simulate_defaults_to_the_smallest_block(tmp_path):
    plan_path = tmp_path / "aco.json"
    _run("multi-stage", EXAMPLE, "--ordering", "4,5,2,3,1", "-o", str(plan_path))
    report = _json("simulate", EXAMPLE, str(plan_path))
    assert report["block_length"] == 2
    assert report["total_transmissions"] == 13


def test_recursive_simulation():
    trace = _json("simulate", EXAMPLE, "--recursive", "--model", "nco")
    assert trace["omniscient"] is True
    assert trace["rounds"][0]["subset"] == [4, 5]


@pytest.mark.parametrize(
    "argv",
    [
        ["psp", EXAMPLE, "--ordering", "1,2,3"],
        ["two-stage", EXAMPLE, "--model", "nco", "--alpha-lb", "23/4"],
        ["multi-stage", EXAMPLE, "--policy", "explicit:9"],
        ["multi-stage", EXAMPLE, "--policy", "loudest"],
        ["region-check", EXAMPLE, "1,2,3"],
        ["simulate", EXAMPLE],
        ["psp", EXAMPLE, "--format", "yaml"],
        ["minrate", EXAMPLE, "--model", "xco"],
        ["two-stage", EXAMPLE, "--alpha-lb", "0.5.1"],
    ],
)
def test_usage_errors_exit_2(argv):
    assert _run(*argv)[0] == 2


def test_domain_errors_exit_1(tmp_path):
    assert _run("psp", str(tmp_path / "missing.json"))[0] == 1
    assert _run("simulate", str(DATA_DIR / "independent3.json"), "--recursive")[0] == 1
