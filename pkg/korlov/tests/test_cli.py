import json

import pytest

from korlov.main import main
from korlov.models.readings import CollectionReport
from korlov.services import qgr
from korlov.services.qgr import resolution_memo

TRUNCATED = {"kind": "truncated_polynomial", "power": 3}
LINE = {"kind": "koszul", "variables": ["x"], "forms": []}


@pytest.fixture
def job(tmp_path):
    def write(data, name="job.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write


def _run_json(args, tmp_path):
    out = tmp_path / "report.json"
    code = main([*args, "--format", "json", "--out", str(out)])
    return code, json.loads(out.read_text(encoding="utf-8"))


def test_validate_writes_a_json_report(job, tmp_path):
    code, report = _run_json(["validate", "--input", job(TRUNCATED)], tmp_path)
    assert code == 0
    assert report["ok"] is True
    assert report["result"]["validation"]["ok"] is True
    assert report["field"] == "Q"
    assert report["tool_version"] == "0.4.0"
    assert len(report["input_hash"]) == 64


def test_resolve_job_with_parameters(job, tmp_path):
    path = job({"algebra": LINE, "parameters": {"bound": 3, "source": "k"}})
    code, report = _run_json(["resolve", "--input", path], tmp_path)
    assert code == 0
    counts = {(row["i"], row["j"]): row["count"] for row in report["result"]["generator_counts"]}
    assert counts == {(0, 0): 1, (1, -1): 1}
    assert report["result"]["certificate"]["verified"] is True


def test_gorenstein_of_truncated_polynomial(job, tmp_path):
    code, report = _run_json(["gorenstein", "--input", job(TRUNCATED)], tmp_path)
    assert code == 0
    assert (report["result"]["reading"]["a"], report["result"]["reading"]["n"]) == (-2, 0)


def test_strong_check_text_output(job, capsys):
    code = main(["strong-check", "--input", job(TRUNCATED), "--parameter", "-2"])
    out = capsys.readouterr().out
    assert code == 0
    assert "not strong (witness -1, 1)" in out
    assert out.rstrip().splitlines()[-1].startswith("korlov 0.4.0, field Q")


def test_cohomology_csv(job, capsys):
    code = main(["cohomology", "--input", job(TRUNCATED), "--target", "A", "--format", "csv"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.splitlines()[0] == "i,j,dim,certified,stabilized"


def test_field_flag_sets_the_report_field(job, tmp_path):
    code, report = _run_json(["validate", "--input", job(TRUNCATED), "--field", "7"], tmp_path)
    assert code == 0
    assert report["field"] == "F_7"


# -------------------------
# Input hash
# -------------------------
def test_input_hash_ignores_format_and_threads(job, tmp_path, capsys):
    path = job({"algebra": LINE, "parameters": {"bound": 2}})
    _, first = _run_json(["resolve", "--input", path], tmp_path)
    _, second = _run_json(["resolve", "--input", path, "--threads", "2"], tmp_path)
    assert first["input_hash"] == second["input_hash"]
    main(["resolve", "--input", path])
    assert first["input_hash"][:12] in capsys.readouterr().out


def test_input_hash_tracks_parameters(job, tmp_path):
    path = job({"algebra": LINE, "parameters": {"bound": 2}})
    _, first = _run_json(["resolve", "--input", path], tmp_path)
    _, other = _run_json(["resolve", "--input", path, "--bound", "3"], tmp_path)
    assert first["input_hash"] != other["input_hash"]


# -------------------------
# Exit codes
# -------------------------
def test_parse_error_exits_with_two(job, capsys):
    path = job({"kind": "koszul", "variables": ["x0"], "forms": ["x0^"]})
    code = main(["validate", "--input", path])
    assert code == 2
    assert "position 3" in capsys.readouterr().err


def test_missing_required_parameter_exits_with_two(job, capsys):
    code = main(["resolve", "--input", job(LINE)])
    assert code == 2
    assert "bound" in capsys.readouterr().err


def test_bad_job_file_exits_with_two(tmp_path, capsys):
    path = tmp_path / "job.json"
    path.write_text("[1, 2]", encoding="utf-8")
    assert main(["validate", "--input", str(path)]) == 2
    assert main(["validate", "--input", str(tmp_path / "missing.json")]) == 2


def test_small_window_exits_with_three(job, capsys):
    code = main(["ext", "--input", job(LINE), "--source", "A", "--window", "0:2,-2:0", "--bound", "5", "--format", "json"])
    captured = capsys.readouterr()
    assert code == 3
    assert "i=3" in captured.err
    assert json.loads(captured.out)["error"] == "window_insufficient"


def test_unknown_task_is_rejected_by_the_parser():
    with pytest.raises(SystemExit):
        main(["factor"])


@pytest.mark.slow
def test_reference_suite_passes(tmp_path):
    code, report = _run_json(["paper-suite"], tmp_path)
    assert code == 0
    assert report["result"]["fail"] == 0


@pytest.mark.slow
def test_reference_suite_passes_over_a_prime_field(tmp_path):
    code, report = _run_json(["paper-suite", "--field", "32003"], tmp_path)
    assert code == 0
    assert report["field"] == "F_32003"
    assert report["result"]["fail"] == 0


# -------------------------
# Collections and caches
# -------------------------
PLANE = {"kind": "koszul", "variables": ["x0", "x1"], "forms": []}


def test_undecided_collection_exits_with_four(job, monkeypatch, capsys):
    undecided = CollectionReport(a=2, i=0, criterion="qgr", verdict=None, note="3 value(s) not stabilized or not certified; verdict undecided")
    monkeypatch.setattr("korlov.main.verify_exceptional_collection", lambda *args, **kwargs: undecided)
    code = main(["exc-verify", "--input", job(PLANE), "--parameter", "2"])
    assert code == 4
    assert "undecided" in capsys.readouterr().err


def test_qgr_hom_reports_the_duality_route(job, tmp_path):
    args = ["qgr-hom", "--input", job(PLANE), "--twists", "0,1", "--p", "0", "--qmax", "3", "--bound", "8"]
    code, report = _run_json(args, tmp_path)
    assert code == 0
    assert report["result"]["value"]["value"] == 2
    assert report["result"]["duality"]["value"] == 2


def test_caches_are_cleared_after_each_job(job, tmp_path):
    args = ["qgr-hom", "--input", job(PLANE), "--twists", "0,1", "--p", "0", "--qmax", "3", "--bound", "8"]
    _run_json(args, tmp_path)
    assert len(resolution_memo) == 0
    assert not qgr._twists


# -------------------------
# Reproducibility
# -------------------------
def _without_timing(report):
    return {k: v for k, v in report.items() if k != "timing_seconds"}


@pytest.mark.parametrize("task", ["gorenstein", "validate", "strong-check"])
def test_reports_are_identical_across_runs(job, tmp_path, task):
    path = job(TRUNCATED)
    _, first = _run_json([task, "--input", path], tmp_path)
    _, second = _run_json([task, "--input", path], tmp_path)
    assert _without_timing(first) == _without_timing(second)


AGREEMENT = [
    TRUNCATED,
    {"kind": "exterior", "degrees": [1, 2]},
    {"kind": "koszul", "variables": ["x0", "x1", "x2"], "forms": ["x0^2", "x0*x1", "x2^3"]},
]


@pytest.mark.parametrize("algebra", AGREEMENT)
def test_rationals_and_prime_field_agree(job, tmp_path, algebra):
    path = job(algebra)
    _, over_q = _run_json(["gorenstein", "--input", path], tmp_path)
    _, over_p = _run_json(["gorenstein", "--input", path, "--field", "32003"], tmp_path)
    assert over_p["field"] == "F_32003"
    reading_q, reading_p = over_q["result"]["reading"], over_p["result"]["reading"]
    assert (reading_q["a"], reading_q["n"]) == (reading_p["a"], reading_p["n"])
