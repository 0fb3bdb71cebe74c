import csv
import json
import subprocess
import sys

import pytest

import fixtures
from contourmot.cli import main

DATA = fixtures.DATA
CORPUS = str(DATA / "corpus.jsonl")
PERFECT = str(DATA / "perfect.jsonl")
FAR_YAW = str(DATA / "far_yaw.jsonl")
FILTER = str(DATA / "filter_corpus.jsonl")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def reports(out):
    return {r["metric"]: r for r in json.loads(out)["reports"]}


def table(out):
    return list(csv.DictReader(out.splitlines()))


class TestEvaluate:
    def test_perfect_predictions(self, capsys):
        code, out, err = run(capsys, "evaluate", "--input", PERFECT)
        assert code == 0 and err == ""
        for metric, rep in reports(out).items():
            assert rep["totals"]["ftpr"] == 100.0, metric
            assert rep["totals"]["fid"] == 0
            assert rep["totals"]["ffp"] == rep["totals"]["ffn"] == 0

    def test_extra_prediction_per_frame(self, capsys, tmp_path):
        frames = fixtures.perfect_frames()
        for f in frames:
            f["pred"].append(fixtures.obj("extra", "car", (500.0, 500.0, 0.85), fixtures.CAR, 0.0, 0.1))
        path = tmp_path / "extra.jsonl"
        path.write_text(fixtures.dumps(frames))
        code, out, _ = run(capsys, "evaluate", "--input", str(path))
        assert code == 0
        for rep in reports(out).values():
            assert rep["totals"]["ffp"] == len(frames)
            assert rep["totals"]["ftp"] == rep["totals"]["gt"]

    def test_far_yaw_failure(self, capsys):
        code, out, _ = run(capsys, "evaluate", "--input", FAR_YAW, "--metric", "ce")
        rep = reports(out)["ce"]
        assert code == 0
        assert (rep["totals"]["ftp"], rep["totals"]["ffn"], rep["totals"]["ffp"]) == (0, 1, 1)
        assert rep["thresholds"] == {"car": 2.5}
        code, out, _ = run(capsys, "scatter", "--input", FAR_YAW, "--x", "ce", "--y", "eod")
        (row,) = table(out)
        assert float(row["metric_x"]) == pytest.approx(3.5, abs=1e-3)
        assert float(row["metric_y"]) == 1.6
        assert float(row["gt_to_ego"]) == 50.0

    def test_three_metric_counts_agree(self, capsys):
        code, out, _ = run(capsys, "evaluate", "--input", CORPUS)
        reps = reports(out)
        assert code == 0 and set(reps) == {"ce", "iou", "cpd"}
        per_scene = {m: [(s["scene_id"], s["frames"], s["gt"], s["pred"]) for s in r["scenes"]] for m, r in reps.items()}
        assert per_scene["ce"] == per_scene["iou"] == per_scene["cpd"]
        for rep in reps.values():
            t = rep["totals"]
            assert t["ftp"] + t["ffn"] == t["gt"]
            assert t["ftp"] + t["ffp"] == t["pred"]

    def test_id_switch_and_ghost(self, capsys):
        code, out, _ = run(capsys, "evaluate", "--input", CORPUS, "--metric", "cpd", "--class", "car")
        rep = reports(out)["cpd"]
        clutter = next(s for s in rep["scenes"] if s["scene_id"] == "clutter")
        assert clutter["fid"] == 1
        assert clutter["ffp"] >= clutter["frames"]

    def test_csv_format(self, capsys):
        code, out, _ = run(capsys, "evaluate", "--input", CORPUS, "--metric", "ce", "--format", "csv")
        rows = table(out)
        assert code == 0 and len(rows) == 4
        assert [r["bin"] for r in rows] == ["0-10m", "10-20m", "20-30m", ">30m"]

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        code, out, _ = run(capsys, "evaluate", "--input", CORPUS, "--out", str(target))
        assert code == 0 and out == ""
        assert set(reports(target.read_text())) == {"ce", "iou", "cpd"}

    def test_byte_identical_runs(self, capsys):
        first = run(capsys, "evaluate", "--input", CORPUS)[1]
        second = run(capsys, "evaluate", "--input", CORPUS)[1]
        assert first == second

    def test_2d_object_centric(self, capsys):
        code, out, _ = run(capsys, "evaluate", "--input", PERFECT, "--dim", "2", "--perspective", "object")
        rep = reports(out)["ce"]
        assert code == 0
        assert (rep["dimension"], rep["perspective"], rep["totals"]["ftpr"]) == (2, "object", 100.0)


class TestErrors:
    def test_missing_input(self, capsys):
        code, _, err = run(capsys, "evaluate", "--input", "/nonexistent/frames.jsonl")
        assert code == 1 and "error" in err and "frames.jsonl" in err

    def test_no_input(self, capsys):
        code, _, err = run(capsys, "evaluate")
        assert code == 2 and "--input" in err

    def test_parse_error(self, capsys, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(fixtures.dumps(fixtures.far_yaw_frames()) + "{broken\n")
        code, _, err = run(capsys, "evaluate", "--input", str(path))
        assert code == 1 and "line 2" in err

    @pytest.mark.parametrize("flags", [
        ["--metric", "hota"],
        ["--threshold", "car:ce=-1"],
        ["--threshold", "car:iou=1.5"],
        ["--threshold", "car:speed=3"],
        ["--threshold", "2.0"],
        ["--class", "bicycle"],
    ])
    def test_config_errors(self, capsys, flags):
        code, out, err = run(capsys, "evaluate", "--input", CORPUS, *flags)
        assert code == 2 and out == "" and err.startswith("contourmot evaluate: error:")

    def test_unknown_class_in_data(self, capsys, tmp_path):
        frames = fixtures.far_yaw_frames()
        frames[0]["gt"][0]["class"] = "bicycle"
        path = tmp_path / "bike.jsonl"
        path.write_text(fixtures.dumps(frames))
        code, _, err = run(capsys, "evaluate", "--input", str(path))
        assert code == 2 and "bicycle" in err

    def test_bad_config_file(self, capsys, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("[1]")
        code, _, _ = run(capsys, "evaluate", "--input", CORPUS, "--config", str(path))
        assert code == 2

    def test_bad_log_level_is_ignored(self, capsys, monkeypatch):
        monkeypatch.setenv("CONTOURMOT_LOG_LEVEL", "chatty")
        assert run(capsys, "evaluate", "--input", PERFECT)[0] == 0


class TestConfigPrecedence:
    def test_file_over_defaults(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"metric": "ce", "thresholds": {"car": {"ce": 4.0}}}))
        code, out, _ = run(capsys, "evaluate", "--input", FAR_YAW, "--config", str(cfg))
        rep = reports(out)
        assert code == 0 and list(rep) == ["ce"]
        assert rep["ce"]["totals"]["ftp"] == 1

    def test_flags_over_file(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"metric": "ce", "threshold": ["car:ce=4.0"]}))
        code, out, _ = run(capsys, "evaluate", "--input", FAR_YAW, "--config", str(cfg),
                           "--threshold", "car:ce=3.0", "--metric", "ce,cpd")
        rep = reports(out)
        assert code == 0 and list(rep) == ["ce", "cpd"]
        assert rep["ce"]["totals"]["ftp"] == 0

    def test_bare_threshold_with_single_metric(self, capsys):
        code, out, _ = run(capsys, "evaluate", "--input", FAR_YAW, "--metric", "ce", "--threshold", "3.6")
        assert code == 0 and reports(out)["ce"]["totals"]["ftp"] == 1


class TestSubcommands:
    def test_bins_distance(self, capsys):
        code, out, _ = run(capsys, "bins", "--input", CORPUS, "--by", "distance")
        rows = table(out)
        assert code == 0 and len(rows) == 12
        for r in rows:
            assert int(r["ftp"]) + int(r["failures"]) == int(r["gt_count"])

    def test_bins_yaw(self, capsys):
        code, out, _ = run(capsys, "bins", "--input", CORPUS, "--by", "yaw", "--metric", "ce")
        rows = table(out)
        assert code == 0 and [r["bin"] for r in rows] == ["0-10deg", "10-30deg", "30-180deg"]

    def test_bins_with_scene_selection(self, capsys):
        code, out, _ = run(capsys, "bins", "--input", FILTER, "--select-scenes", "--metric", "ce")
        rows = table(out)
        assert code == 0
        # keep-a and keep-e: 24 frames with one car each
        assert sum(int(r["gt_count"]) for r in rows) == 24

    def test_compare(self, capsys):
        code, out, _ = run(capsys, "compare", "--input", CORPUS)
        rows = {r["class"]: r for r in table(out)}
        assert code == 0 and set(rows) == {"car", "pedestrian", "truck"}
        for r in rows.values():
            parts = sum(int(r[q]) for q in ("reliable", "contour_based", "poor", "iou_based"))
            assert parts == int(r["total"])

    def test_correlate(self, capsys):
        code, out, _ = run(capsys, "correlate", "--input", CORPUS)
        rows = {r["class"]: r for r in table(out)}
        assert code == 0 and "car" in rows
        assert -1 <= float(rows["car"]["ce_cpd"]) <= 1

    def test_scatter_columns(self, capsys):
        code, out, _ = run(capsys, "scatter", "--input", CORPUS, "--x", "ce", "--y", "cpd")
        header = out.splitlines()[0].split(",")
        assert code == 0
        assert {"metric_x", "metric_y", "class", "gt_to_ego"} <= set(header)

    def test_filter_scenes(self, capsys):
        code, out, err = run(capsys, "filter-scenes", "--input", FILTER)
        assert (code, out, err) == (0, "keep-a\nkeep-e\n", "")

    def test_filter_scenes_flags(self, capsys):
        code, out, _ = run(capsys, "filter-scenes", "--input", FILTER, "--max-dist", "50", "--min-frames", "5")
        assert out.split() == ["keep-a", "short-b", "far-d", "keep-e"]

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "contourmot.cli", "filter-scenes", "--input", FILTER],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0 and proc.stdout == "keep-a\nkeep-e\n"
