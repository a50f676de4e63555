import csv

import numpy as np
import pytest

from bbnn import dataio
from bbnn.bitcore import Rng
from bbnn.cli import METRIC_FIELDS, main
from bbnn.layers import Layer, Model


@pytest.fixture
def mini_mnist(tmp_path):
    """A 40/20-sample IDX directory with real MNIST file names."""
    rng = np.random.default_rng(0)
    d = tmp_path / "mnist"
    d.mkdir()
    for split, n in (("train", 40), ("test", 20)):
        labels = rng.integers(0, 10, n)
        images = (rng.random((n, 784)) < 0.2) * rng.integers(0, 256, (n, 784))
        images[np.arange(n), labels * 50] = 255  # a crude class marker
        ip, lp = dataio.MNIST_FILES[split]
        dataio.write_idx(d / ip, d / lp, images, labels)
    return d


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_train_synth_metrics(tmp_path, capsys):
    out = tmp_path / "synth.csv"
    ck = tmp_path / "synth.bbnn"
    assert main(["train", "--synth", "--widths", "16,8", "--epochs", "3", "--seed", "7",
                 "--metrics", str(out), "--checkpoint", str(ck)]) == 0
    rows = _rows(out)
    assert list(rows[0]) == METRIC_FIELDS
    assert [r["epoch"] for r in rows if r["split"] == "train"] == ["0", "1", "2"]
    assert len({r["epoch"] for r in rows}) == 3
    assert all(0 <= float(r["hamming_error_rate"]) <= 1 for r in rows)
    assert "epoch=2" in capsys.readouterr().out
    model, spec = dataio.load_checkpoint(ck)
    assert model.widths == [16, 8] and spec is None


def test_train_reproducible(tmp_path):
    args = ["train", "--synth", "--widths", "20,10,6", "--epochs", "2", "--seed", "3", "--no-timing"]
    for tag in "ab":
        assert main(args + ["--metrics", str(tmp_path / f"{tag}.csv"), "--checkpoint", str(tmp_path / f"{tag}.bbnn")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.bbnn").read_bytes() == (tmp_path / "b.bbnn").read_bytes()
    assert all(r["seconds"] == "" for r in _rows(tmp_path / "a.csv"))


def test_missing_data_dir_exit_2(tmp_path, capsys):
    assert main(["train", "--data-dir", str(tmp_path / "nope"), "--widths", "1568,160"]) == 2
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "nope" in err


@pytest.mark.parametrize("argv", [
    [],
    ["train", "--synth", "--widths", "16"],
    ["train", "--synth", "--widths", "a,b"],
    ["train", "--synth", "--widths", "16,8", "--mode", "fuzzy"],
    ["train", "--synth", "--widths", "16,8", "--batch-size", "0"],
    ["train", "--synth"],
    ["train", "--widths", "16,8"],
    ["bogus"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err.strip()


def test_full_scale_widths_accepted():
    from bbnn.cli import build_parser

    args = build_parser().parse_args(["train", "--data-dir", "x", "--layers", "6272,4096,4096,4096,320"])
    assert args.widths == [6272, 4096, 4096, 4096, 320]
    spec = dataio.EncodingSpec.for_widths(6272, 320)
    assert (spec.thermometer_levels, spec.class_block) == (8, 32)


def test_train_eval_mnist(mini_mnist, tmp_path, capsys):
    ck, met = tmp_path / "m.bbnn", tmp_path / "m.csv"
    assert main(["train", "--data-dir", str(mini_mnist), "--widths", "1568,64,160", "--epochs", "2",
                 "--batch-size", "4", "--checkpoint", str(ck), "--metrics", str(met)]) == 0
    last = [r for r in _rows(met) if r["split"] == "test"][-1]
    capsys.readouterr()
    assert main(["eval", "--data-dir", str(mini_mnist), "--checkpoint", str(ck)]) == 0
    out = capsys.readouterr().out.split()
    assert out[0] == "samples=20"
    assert out[1] == f"hamming_error_rate={last['hamming_error_rate']}"
    assert out[2] == f"accuracy={last['accuracy']}"

    assert main(["eval", "--data-dir", str(mini_mnist), "--checkpoint", str(ck), "--limit", "7"]) == 0
    assert capsys.readouterr().out.startswith("samples=7 ")

    assert main(["predict", "--data-dir", str(mini_mnist), "--checkpoint", str(ck), "--limit", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "index,predicted,label" and len(lines) == 4


def test_train_limit(mini_mnist, tmp_path, capsys):
    assert main(["train", "--data-dir", str(mini_mnist), "--widths", "1568,160", "--epochs", "1",
                 "--limit", "8", "--test-limit", "5", "--batch-size", "8"]) == 0
    assert "epoch=0 split=train" in capsys.readouterr().out


def test_train_mismatched_encoding(mini_mnist):
    assert main(["train", "--data-dir", str(mini_mnist), "--widths", "1568,155"]) == 1
    assert main(["train", "--data-dir", str(mini_mnist), "--widths", "1568,160", "--thermometer", "3"]) == 1


def test_eval_wrong_width_exit_2(mini_mnist, tmp_path):
    ck = tmp_path / "bad.bbnn"
    dataio.save_checkpoint(Model.init(Rng(0), [1568, 160]), dataio.EncodingSpec(8, 10, 32), ck)
    assert main(["eval", "--data-dir", str(mini_mnist), "--checkpoint", str(ck)]) == 2
    dataio.save_checkpoint(Model.init(Rng(0), [1568, 160]), None, ck)
    assert main(["eval", "--data-dir", str(mini_mnist), "--checkpoint", str(ck)]) == 2


def test_eval_synth(tmp_path, capsys):
    ck, met = tmp_path / "s.bbnn", tmp_path / "s.csv"
    assert main(["train", "--synth", "--widths", "12,6", "--epochs", "1", "--seed", "5",
                 "--checkpoint", str(ck), "--metrics", str(met)]) == 0
    capsys.readouterr()
    assert main(["eval", "--synth", "--seed", "5", "--checkpoint", str(ck)]) == 0
    test_row = [r for r in _rows(met) if r["split"] == "test"][-1]
    assert capsys.readouterr().out.strip() == f"samples=256 hamming_error_rate={test_row['hamming_error_rate']}"


def test_inspect(tmp_path, capsys):
    ck = tmp_path / "i.bbnn"
    dataio.save_checkpoint(Model.init(Rng(1), [1000, 400]), dataio.EncodingSpec(), ck)
    assert main(["inspect", "--checkpoint", str(ck)]) == 0
    out = capsys.readouterr().out
    assert "version=1" in out and "widths=1000,400" in out and "thermometer:8" in out
    density = float(out.split("weight_density=")[1].split()[0])
    assert density == pytest.approx(1 / 1000, rel=0.1)

    dataio.save_checkpoint(Model((Layer.zeros(5, 3),)), None, ck)
    assert main(["inspect", "--checkpoint", str(ck)]) == 0
    out = capsys.readouterr().out
    assert "weight_density=0.000000" in out and "bias_popcount=0" in out and "encoding=none" in out

    ck.write_bytes(ck.read_bytes()[:-3])
    assert main(["inspect", "--checkpoint", str(ck)]) == 2
    assert main(["inspect", "--checkpoint", str(tmp_path / "missing.bbnn")]) == 2


def test_init_from_checkpoint(tmp_path):
    ck = tmp_path / "a.bbnn"
    assert main(["train", "--synth", "--widths", "12,6", "--epochs", "1", "--checkpoint", str(ck)]) == 0
    assert main(["train", "--synth", "--init", str(ck), "--epochs", "1", "--checkpoint", str(tmp_path / "b.bbnn")]) == 0
    assert main(["train", "--synth", "--init", str(ck), "--widths", "12,7"]) == 1


def test_verify_command(capsys):
    assert main(["verify", "--trials", "20"]) == 0
    assert "projection: ok" in capsys.readouterr().out
