"""Command line behavior: files written, overrides applied, errors reported."""

import json
import subprocess
import sys

import pytest

from xlnlu.cli import main

TINY = """
mode = zeroshot_softalign
seeds = 0
epochs = 1
synthetic_train = 40
synthetic_dev = 20
synthetic_test = 20
d_e = 32
d_h = 16
fertility_rate = 0.3
reversal_window = 3
"""


@pytest.fixture()
def tiny_cfg(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY)
    return path


def test_train_writes_report(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--config", str(tiny_cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["mode"] == "zeroshot_softalign"
    assert report["per_seed"][0]["seed"] == 0
    assert "slot_f1" in report["mean"]["languages"]["tgt"]
    assert "mode=zeroshot_softalign" in capsys.readouterr().out


def test_train_overrides(tiny_cfg, tmp_path):
    out = tmp_path / "run"
    code = main([
        "train", "--config", str(tiny_cfg), "--out", str(out),
        "--mode", "zeroshot_nomt", "--seed", "7",
    ])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["mode"] == "zeroshot_nomt"
    assert report["config"]["seeds"] == [7]


def test_ablate_flags_reach_config(tiny_cfg, tmp_path):
    out = tmp_path / "abl"
    assert main(["ablate", "--config", str(tiny_cfg), "--out", str(out)]) == 0
    result = json.loads((out / "ablation.json").read_text())
    assert set(result["summary"]["slot_f1"]) == {"full", "no_reconstruction", "no_joint_src"}


def test_curve(tmp_path):
    cfg = tmp_path / "curve.cfg"
    cfg.write_text(TINY + "target_sizes = 0,10\n")
    out = tmp_path / "curve"
    assert main(["curve", "--config", str(cfg), "--out", str(out)]) == 0
    curve = json.loads((out / "curve.json").read_text())
    assert curve["sizes"] == [0, 10]
    assert len(curve["reports"]) == 2
    assert "subsample_sha" in curve["reports"][1]["per_seed"][0]


def test_gen_bitext_files(tiny_cfg, tmp_path):
    out = tmp_path / "data"
    assert main(["gen-bitext", "--config", str(tiny_cfg), "--out", str(out)]) == 0
    for split in ("train", "dev", "test"):
        for stem in (f"src.{split}.tsv", f"tgt.{split}.tsv",
                     f"translations.{split}.tsv", f"alignments.{split}.txt"):
            assert (out / stem).exists(), stem
    # translations join back onto the source ids
    src_ids = [line.split("\t")[0] for line in (out / "src.train.tsv").read_text().splitlines()]
    trans_ids = [
        line.split("\t")[0] for line in (out / "translations.train.tsv").read_text().splitlines()
    ]
    assert src_ids == trans_ids


def test_align_outputs(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "aligned"
    assert main(["align", "--config", str(tiny_cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "align.json").read_text())
    ll = summary["log_likelihood"]
    assert len(ll) == 5
    assert all(b >= a for a, b in zip(ll, ll[1:]))
    assert 0.0 < summary["projection_accuracy"] <= 1.0
    assert (out / "alignments.txt").read_text().count("\n") == summary["pairs"]
    assert (out / "projected.tsv").exists()
    assert json.loads(capsys.readouterr().out.splitlines()[-1])["pairs"] == summary["pairs"]


def test_score_round_trip(tiny_cfg, tmp_path, capsys):
    data = tmp_path / "data"
    main(["gen-bitext", "--config", str(tiny_cfg), "--out", str(data)])
    capsys.readouterr()
    gold = str(data / "tgt.test.tsv")
    out = tmp_path / "scored"
    assert main(["score", gold, gold, "--out", str(out)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["intent_accuracy"] == 1.0
    assert payload["slot_f1"] == 1.0
    assert (out / "score.conll").exists()
    assert json.loads((out / "score.json").read_text()) == payload


def test_score_mismatched_ids_fails(tiny_cfg, tmp_path, capsys):
    data = tmp_path / "data"
    main(["gen-bitext", "--config", str(tiny_cfg), "--out", str(data)])
    capsys.readouterr()
    code = main(["score", str(data / "tgt.test.tsv"), str(data / "tgt.dev.tsv")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_bad_config_reports_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epochz = 3\n")
    code = main(["train", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert code == 2
    assert "unknown key" in capsys.readouterr().err


def test_module_entry_point(tiny_cfg, tmp_path):
    out = tmp_path / "run"
    done = subprocess.run(
        [sys.executable, "-m", "xlnlu.cli", "train", "--config", str(tiny_cfg),
         "--out", str(out), "--seed", "1"],
        capture_output=True, text=True,
    )
    assert done.returncode == 0, done.stderr
    assert (out / "report.json").exists()
