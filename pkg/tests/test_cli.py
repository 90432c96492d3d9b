import csv
import json
import shutil

import numpy as np
import pytest

from clusterdrift.chunk import Chunk, ManifestEntry, write_chunk_csv, write_manifest
from clusterdrift.cli import run_cli
from clusterdrift.evaluation import GAMMA_GRID
from clusterdrift.streamgen import two_gaussian_spec


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "spec.json"
    spec = two_gaussian_spec(ir=15, n_base=600, n_chunk=200, n_clean=4, n_drift=4, seed=7)
    path.write_text(json.dumps(spec.to_dict()))
    return path


def snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generate_then_detect(tmp_path, spec_file):
    streams, det = tmp_path / "streams", tmp_path / "det"
    assert run_cli(["generate", "--spec", str(spec_file), "--out", str(streams)]) == 0
    manifest = streams / "manifest.json"
    assert len(json.loads(manifest.read_text())) == 9
    assert (streams / "spec.json").exists()
    assert run_cli(["detect", "--manifest", str(manifest), "--out", str(det), "--seed", "7"]) == 0
    rows = read_rows(det / "summary.csv")
    assert [int(r["chunk_index"]) for r in rows] == list(range(1, 9))
    assert len(list((det / "reports").glob("chunk_*.json"))) == 8
    report = json.loads((det / "reports" / "chunk_00001.json").read_text())
    assert {"drifted", "stats", "drift_samples", "region_vectors"} <= set(report)
    run = json.loads((det / "run.json").read_text())
    assert run["seed"] == 7


def test_identical_chunks_never_drift(tmp_path):
    X = np.random.default_rng(0).normal(size=(120, 2))
    entries = []
    for t in range(5):
        write_chunk_csv(Chunk(X), tmp_path / f"c{t}.csv")
        entries.append(ManifestEntry(f"c{t}.csv", False))
    write_manifest(entries, tmp_path / "manifest.json")
    out = tmp_path / "out"
    assert run_cli(["detect", "--manifest", str(tmp_path / "manifest.json"), "--seed", "0",
                    "--out", str(out)]) == 0
    rows = read_rows(out / "summary.csv")
    assert len(rows) == 4
    assert all(r["drifted"] == "0" for r in rows)


def test_gamma_sweep_rows(tmp_path, spec_file):
    out = tmp_path / "sw"
    assert run_cli(["sweep", "--spec", str(spec_file), "--axis", "gamma", "--variants", "FULL",
                    "--out", str(out)]) == 0
    rows = read_rows(out / "sweep_gamma.csv")
    assert [float(r["value"]) for r in rows] == list(GAMMA_GRID)


def test_bench_writes_table_and_traces(tmp_path, spec_file):
    out = tmp_path / "b"
    assert run_cli(["bench", "--spec", str(spec_file), "--out", str(out)]) == 0
    rows = read_rows(out / "bench.csv")
    assert [r["variant"] for r in rows] == ["FULL", "A-random-init", "B-kmeans", "C-single-descriptor"]
    for name in ("FULL", "A", "B", "C"):
        assert len(read_rows(out / f"trace_{name}.csv")) == 8
    assert json.loads((out / "run.json").read_text())["detector"]["retrain_on_drift"] is False


@pytest.mark.parametrize("argv", [
    ["generate"],
    ["sweep", "--axis", "gamma"],
])
def test_reruns_are_byte_identical(tmp_path, spec_file, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(argv + ["--spec", str(spec_file), "--out", str(a)]) == 0
    assert run_cli(argv + ["--spec", str(spec_file), "--out", str(b)]) == 0
    sa, sb = snapshot(a), snapshot(b)
    sa.pop("run.json", None), sb.pop("run.json", None)  # records its own output path
    assert sa == sb


def test_detect_rerun_is_byte_identical(tmp_path, spec_file):
    streams = tmp_path / "s"
    run_cli(["generate", "--spec", str(spec_file), "--out", str(streams)])
    snaps = []
    for _ in range(2):
        out = tmp_path / "d"
        assert run_cli(["detect", "--manifest", str(streams / "manifest.json"), "--seed", "1",
                        "--out", str(out)]) == 0
        snaps.append(snapshot(out))
        shutil.rmtree(out)
    assert snaps[0] == snaps[1]


def test_config_file_and_flag_override(tmp_path, spec_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "spec": spec_file.name, "detector": {"gamma": 0.4},
                               "descriptor": {"nu": 0.1}}))
    out = tmp_path / "o"
    assert run_cli(["sweep", "--config", str(cfg), "--axis", "gamma", "--values", "0.3",
                    "--variants", "FULL", "--nu", "0.2", "--out", str(out)]) == 0
    run = json.loads((out / "run.json").read_text())
    assert run["seed"] == 3
    assert run["descriptor"]["nu"] == 0.2
    assert run["detector"]["gamma"] == 0.4


def test_exit_codes(tmp_path, spec_file, capsys):
    assert run_cli([]) == 1
    assert run_cli(["explode"]) == 1
    assert run_cli(["detect", "--manifest", str(tmp_path / "missing.json"), "--seed", "0"]) == 2
    assert run_cli(["detect", "--manifest", str(tmp_path / "missing.json")]) == 1  # no seed
    assert run_cli(["detect", "--seed", "0"]) == 1
    assert run_cli(["sweep", "--spec", str(spec_file)]) == 1  # no axis
    assert run_cli(["generate", "--spec", str(spec_file), "--gamma", "1.5"]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("x0,x1\n1.0,abc\n")
    (tmp_path / "m.json").write_text(json.dumps([{"chunk_path": "bad.csv", "drift_label": False}]))
    assert run_cli(["detect", "--manifest", str(tmp_path / "m.json"), "--seed", "0",
                    "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, spec_file, monkeypatch):
    monkeypatch.setenv("CLUSTERDRIFT_OUT", str(tmp_path / "env-out"))
    assert run_cli(["generate", "--spec", str(spec_file)]) == 0
    assert (tmp_path / "env-out" / "manifest.json").exists()


def test_report_renders_svg(tmp_path, spec_file):
    pytest.importorskip("matplotlib")
    out = tmp_path / "b"
    run_cli(["bench", "--spec", str(spec_file), "--variants", "FULL", "C", "--out", str(out)])
    figs = tmp_path / "figs"
    assert run_cli(["report", str(out / "bench.csv"), str(out / "trace_FULL.csv"), "--out", str(figs)]) == 0
    first = (figs / "trace_FULL.svg").read_bytes()
    assert first.lstrip().startswith(b"<?xml") and b"<svg" in first
    assert (figs / "bench.svg").exists()
    run_cli(["report", str(out / "trace_FULL.csv"), "--out", str(figs)])
    assert (figs / "trace_FULL.svg").read_bytes() == first
    assert run_cli(["report", str(tmp_path / "nope.csv"), "--out", str(figs)]) == 2
