import csv
import json

import numpy as np
import pytest

import wifitopo.pipeline
from wifitopo.cli import main
from wifitopo.errors import NumericError

SMALL_SCENE = {"locations": [[2, 2], [18, 2], [2, 18], [18, 18]], "samples_per_segment": 6,
               "segments_per_location": 2}


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("WIFITOPO_OUTPUT_DIR", str(tmp_path / "out"))
    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps(SMALL_SCENE))
    assert main(["simulate", "--scene", str(scene)]) == 0
    return tmp_path / "out"


def error_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_simulate_outputs_and_manifest(out):
    for name in ("wifi.csv", "accel.csv", "labels.csv", "scene.json", "simulate.manifest.json"):
        assert (out / name).exists()
    man = json.loads((out / "simulate.manifest.json").read_text())
    assert man["command"] == "simulate" and set(man["versions"]) >= {"wifitopo", "numpy", "scipy"}
    assert man["artifacts"]["wifi.csv"]["config_hash"] == man["config_hash"]


def test_simulate_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--seed", "42", "--output-dir", str(a)]) == 0
    assert main(["simulate", "--seed", "42", "--output-dir", str(b)]) == 0
    assert (a / "wifi.csv").read_bytes() == (b / "wifi.csv").read_bytes()
    assert (a / "accel.csv").read_bytes() == (b / "accel.csv").read_bytes()


def test_full_chain(out):
    assert main(["segment"]) == 0
    rows = list(csv.DictReader(open(out / "segments.csv")))
    assert len(rows) == 8 and list(rows[0]) == ["segment_id", "device", "start_ms", "end_ms",
                                                 "n_observations"]
    assert (out / "boundaries.csv").read_text().startswith("index,timestamp_ms,parity\n")
    assert main(["fingerprint"]) == 0
    recs = [json.loads(l) for l in open(out / "fingerprints.jsonl")]
    assert len(recs) == 8 and all(r["method"] == "kde" for r in recs)
    assert main(["distances"]) == 0
    side = json.loads((out / "distances.json").read_text())
    assert side["measure"] == "emd" and side["norm"] == 2 and side["estimator"] == "kde"
    m = np.fromfile(out / "distances.f64", dtype="<f8").reshape(8, 8)
    assert np.array_equal(m, m.T)
    assert main(["evaluate"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["auc"] > 0.9 and report["n_same"] == 4 and report["n_diff"] == 24
    assert (out / "roc.csv").read_text().startswith("threshold,fpr,tpr\n")
    assert main(["embed"]) == 0
    assert (out / "embedding.csv").read_text().startswith("segment_id,x,y,label\n")
    assert (out / "embedding.svg").read_text().startswith("<svg")


def test_rerun_is_byte_identical(out):
    assert main(["segment"]) == 0
    assert main(["fingerprint"]) == 0
    assert main(["distances"]) == 0
    first = {n: (out / n).read_bytes() for n in ("segments.csv", "fingerprints.jsonl", "distances.csv")}
    assert main(["fingerprint"]) == 0 and main(["distances"]) == 0
    assert main(["segment"]) == 0
    assert {n: (out / n).read_bytes() for n in first} == first


def test_config_file_and_flag_precedence(out, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"estimator": "normal", "measure": "hellinger", "norm": 1}))
    assert main(["segment"]) == 0
    assert main(["fingerprint", "--config", str(cfg), "--estimator", "pmf"]) == 0
    recs = [json.loads(l) for l in open(out / "fingerprints.jsonl")]
    assert recs[0]["method"] == "pmf" and recs[0]["options"] == {"laplace_epsilon": 1e-6}
    assert main(["distances", "--config", str(cfg)]) == 0
    side = json.loads((out / "distances.json").read_text())
    assert side["measure"] == "hellinger" and side["norm"] == 1


def test_distances_identical_segments_zero(tmp_path):
    line = json.dumps({"segment_id": 0, "method": "kde", "invisibility": True, "options": {"h": 2.0},
                       "per_ap": {"b1": {"samples": [-60.0, -61.0], "h": 2.0}}})
    fps = tmp_path / "fp.jsonl"
    fps.write_text(line + "\n" + line.replace('"segment_id": 0', '"segment_id": 1') + "\n")
    assert main(["distances", "--fingerprints", str(fps), "--output-dir", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "distances.csv").read_text()
    assert text == "segment_id,0,1\n0,0.0,0.0\n1,0.0,0.0\n"


def test_room_day_pooling(out):
    assert main(["segment"]) == 0
    assert main(["fingerprint", "--pool", "room-day"]) == 0
    recs = [json.loads(l) for l in open(out / "fingerprints.jsonl")]
    assert len(recs) == 4 and all("@" in r["segment_id"] for r in recs)


@pytest.mark.parametrize("argv", [[], ["bogus"], ["distances", "--norm", "x"],
                                  ["distances", "--measure", "cosine"]])
def test_usage_errors(tmp_path, capsys, argv, monkeypatch):
    monkeypatch.setenv("WIFITOPO_OUTPUT_DIR", str(tmp_path))
    fps = tmp_path / "fingerprints.jsonl"
    fps.write_text("")
    assert main(argv) == 1
    assert error_json(capsys)["exit_code"] == 1


def test_missing_input_is_usage_error(tmp_path, capsys):
    assert main(["segment", "--output-dir", str(tmp_path)]) == 1
    assert "wifi" in error_json(capsys)["message"]


def test_data_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "wifi.csv"
    bad.write_text("timestamp_ms,device,bssid,ssid,rssi\n1,A,b,,-5\n")
    assert main(["segment", "--wifi", str(bad), "--output-dir", str(tmp_path)]) == 2
    doc = error_json(capsys)
    assert doc["error"] == "ValidationError" and doc["command"] == "segment"


def test_kl_matrix_is_configuration_error(out, capsys):
    assert main(["segment"]) == 0 and main(["fingerprint"]) == 0
    assert main(["distances", "--measure", "kl"]) == 1


def test_numeric_error_exit_code(out, capsys):
    assert main(["segment"]) == 0
    assert main(["fingerprint", "--estimator", "pmf", "--measure", "emd"]) == 0
    assert main(["distances", "--measure", "bhattacharyya"]) == 0
    # unsmoothed PMFs under symmetrized KL cannot be evaluated
    assert main(["distances", "--measure", "symmetrized_kl"]) == 3
    assert error_json(capsys)["error"] == "NonOverlapError"


def read_sweep(path):
    return list(csv.reader(open(path)))


def test_sweep_rows_and_determinism(out, tmp_path):
    assert main(["sweep"]) == 0
    first = (out / "sweep.csv").read_bytes()
    rows = read_sweep(out / "sweep.csv")
    assert rows[0] == ["estimator", "measure", "norm", "invisibility", "auc", "pearson",
                       "spearman", "kendall"]
    assert len(rows) == 1 + 84
    assert len({tuple(r[:4]) for r in rows[1:]}) == 84
    assert not (out / "sweep.csv.partial").exists() and not (out / "sweep.progress.json").exists()
    assert main(["sweep"]) == 0
    assert (out / "sweep.csv").read_bytes() == first


def test_sweep_failure_keeps_partial_and_resumes(out, monkeypatch, capsys):
    assert main(["sweep"]) == 0
    reference = (out / "sweep.csv").read_bytes()
    (out / "sweep.csv").unlink()

    real = wifitopo.pipeline.evaluate_matrix
    calls = {"n": 0}

    def flaky(dm, labels):
        calls["n"] += 1
        if calls["n"] == 6:
            raise NumericError("injected failure")
        return real(dm, labels)

    monkeypatch.setattr(wifitopo.pipeline, "evaluate_matrix", flaky)
    assert main(["sweep"]) == 3
    partial = read_sweep(out / "sweep.csv.partial")
    assert len(partial) == 1 + 5
    progress = json.loads((out / "sweep.progress.json").read_text())
    assert len(progress["completed"]) == 5
    assert not (out / "sweep.csv").exists()

    monkeypatch.setattr(wifitopo.pipeline, "evaluate_matrix", real)
    assert main(["sweep", "--resume"]) == 0
    assert (out / "sweep.csv").read_bytes() == reference
    assert not (out / "sweep.progress.json").exists()


def test_parallel_jobs_same_bytes(out):
    assert main(["segment"]) == 0 and main(["fingerprint"]) == 0
    assert main(["distances"]) == 0
    serial = (out / "distances.f64").read_bytes()
    assert main(["distances", "--jobs", "2"]) == 0
    assert (out / "distances.f64").read_bytes() == serial
