import json
import subprocess
import sys

import numpy as np
import pytest

from texdr.cli import main, run_pipeline
from texdr.config import ConfigError, load_config, parse_config
from texdr.evaluation import load_embedding_csv
from texdr.image import HighDimImage, LabelRaster, save_image, save_labels


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    # output directories resolve against the working directory
    monkeypatch.chdir(tmp_path)


def small_inputs(tmp_path, pixels=None):
    rng = np.random.default_rng(0)
    if pixels is None:
        pixels = rng.random((8, 8, 2))
    save_image(HighDimImage.from_array(pixels), tmp_path / "img.bin")
    save_labels(LabelRaster(8, 8, np.repeat([1, 2], 32)), tmp_path / "gt.csv")


def write_cfg(tmp_path, distance="kind = chamfer\nradius = 1", extra_out=""):
    text = f"""
[input]
source = file
path = img.bin
labels = gt.csv

[distance]
{distance}

[tsne]
perplexity = 3
iterations = 300
seed = 1

[evaluation]
k_max = 5

[output]
directory = run
embedding = embedding.csv
recolor = recolor.ppm
curve = neighbor_hit.csv
trace = trace.csv
{extra_out}
"""
    path = tmp_path / "small.cfg"
    path.write_text(text)
    return path


def test_bundled_configs_validate(config_dir, capsys):
    cfgs = sorted(config_dir.glob("*.cfg"))
    assert len(cfgs) == 27
    assert main(["validate", *map(str, cfgs)]) == 0
    assert capsys.readouterr().out.count(": ok") == 27


def test_config_defaults_and_paths(tmp_path):
    small_inputs(tmp_path)
    cfg = load_config(write_cfg(tmp_path))
    assert cfg.input.path == tmp_path / "img.bin"
    assert cfg.k == 9
    assert str(cfg.output.directory) == "run"
    assert cfg.distance.tag == "chamfer" and cfg.distance.neighborhood.radius == 1


@pytest.mark.parametrize("text, match", [
    ("[input]\nsource = file\npath = nowhere.bin\n", "does not exist"),
    ("[input]\nsource = synthetic\n[extra]\n", "unknown sections"),
    ("[input]\nsource = synthetic\ncolour = red\n", "unknown keys"),
    ("[input]\nsource = synthetic\n[tsne]\nperplexity = 20\nk = 10\n", "exceed"),
    ("[input]\nsource = synthetic\n[distance]\nkind = cosine\n", "kind"),
    ("[input]\nsource = synthetic\n[output]\nrecolor = out.jpg\n", "recolor"),
    ("[input]\nsource = synthetic\nchannels = 3\n", "two channels"),
])
def test_bad_configs_are_rejected(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text, tmp_path)


def test_missing_input_exits_with_config_code(tmp_path, capsys):
    path = tmp_path / "c.cfg"
    path.write_text("[input]\nsource = file\npath = gone.bin\n")
    assert main(["embed", str(path)]) == 2
    assert "does not exist" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_embed_writes_artifacts_and_manifest(tmp_path, capsys):
    small_inputs(tmp_path)
    assert main(["--threads", "1", "embed", str(write_cfg(tmp_path, extra_out="knn = knn.csv"))]) == 0
    run = tmp_path / "run"
    assert sorted(p.name for p in run.iterdir()) == [
        "embedding.csv", "knn.csv", "manifest.json", "neighbor_hit.csv", "recolor.ppm", "trace.csv"]
    man = json.loads((run / "manifest.json").read_text())
    assert man["seed"] == 1 and man["threads"] == 1
    assert man["config"]["distance"]["kind"] == "chamfer"
    assert set(man["versions"]) >= {"texdr", "numpy", "numba"}
    assert man["summary"]["n"] == 64
    assert load_embedding_csv(run / "embedding.csv").shape == (64, 2)
    assert len((run / "trace.csv").read_text().splitlines()) == 301
    knn_rows = (run / "knn.csv").read_text().splitlines()
    assert len(knn_rows) == 64 and len(knn_rows[0].split(",")) == 1 + 2 * 9
    assert "neighbor hit@5=" in capsys.readouterr().out


def test_singular_covariances_exit_numerical_and_clean_up(tmp_path, capsys):
    small_inputs(tmp_path, pixels=np.zeros((8, 8, 2)))
    cfg = write_cfg(tmp_path, "kind = bhattacharyya\nradius = 1\nridge = 0")
    assert main(["embed", str(cfg)]) == 4
    assert "knn failed" in capsys.readouterr().err
    assert not (tmp_path / "run").exists()


def test_corrupt_input_exits_with_data_code(tmp_path, capsys):
    small_inputs(tmp_path)
    (tmp_path / "img.bin").write_bytes(b"\0" * 24)
    assert main(["embed", str(write_cfg(tmp_path))]) == 3
    assert "load failed" in capsys.readouterr().err


def test_write_failure_removes_partial_outputs(tmp_path):
    small_inputs(tmp_path)
    run = tmp_path / "run"
    # a directory where the recolor file should go makes the write stage fail
    (run / "recolor.ppm").mkdir(parents=True)
    assert main(["embed", str(write_cfg(tmp_path))]) == 3
    assert [p.name for p in run.iterdir()] == ["recolor.ppm"]


def test_synth_eval_recolor_chain(tmp_path, capsys):
    img, gt = tmp_path / "syn.bin", tmp_path / "gt.csv"
    assert main(["synth", "--out", str(img), "--labels", str(gt), "--seed", "3"]) == 0
    rng = np.random.default_rng(0)
    emb = tmp_path / "e.csv"
    np.savetxt(emb, rng.random((1024, 2)), delimiter=",", header="x,y", comments="")
    curve = tmp_path / "curve.csv"
    assert main(["eval", "--embedding", str(emb), "--labels", str(gt), "--out", str(curve)]) == 0
    assert len(curve.read_text().splitlines()) == 1 + 63
    out = tmp_path / "r.png"
    assert main(["recolor", "--embedding", str(emb), "--width", "32", "--height", "32",
                 "--out", str(out)]) == 0
    assert out.stat().st_size > 0
    assert main(["recolor", "--embedding", str(emb), "--width", "30", "--height", "32",
                 "--out", str(out)]) == 3


def test_bench_to_stdout(capsys):
    assert main(["bench", "--kind", "chamfer", "--eta", "1,2", "--side", "8", "--pairs", "20",
                 "--repetitions", "1"]) == 0
    rows = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("chamfer,")]
    assert len(rows) == 2


def test_bad_thread_count_is_config_error(monkeypatch):
    monkeypatch.setenv("TEXDR_THREADS", "many")
    assert main(["validate", "nothing.cfg"]) == 2


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "texdr.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
