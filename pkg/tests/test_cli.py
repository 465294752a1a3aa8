import csv
import io

import numpy as np
import pytest

from skypesiem.cli import main
from skypesiem.flowkit import write_capture
from skypesiem.learnkit import load_dataset
from skypesiem.metrics import parse_report, read_roc_csv, roc_auc, trapezoid_area
from skypesiem.scenario import SHIPPED, shipped_text
from skypesiem.synth import SKYPE, flow_packets, synthetic_corpus, to_micros

T0 = to_micros("2017-01-30T19:20:00")


@pytest.fixture(scope="module")
def corpus_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.csv"
    path.write_text(synthetic_corpus(300, seed=3).to_csv())
    return path


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory, corpus_csv):
    out = tmp_path_factory.mktemp("models")
    assert main(["train", "--dataset", str(corpus_csv), "--out-dir", str(out), "--seed", "1"]) == 0
    return out


def test_extract_empty_capture(tmp_path, capsys):
    pcap = tmp_path / "empty.pcap"
    write_capture([], pcap)
    out = tmp_path / "f.csv"
    assert main(["extract", "--pcap", str(pcap), "--label", "Skype", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1


def test_extract_three_flows(tmp_path):
    rng = np.random.default_rng(0)
    pkts = []
    for i in range(3):
        pkts += flow_packets(rng, SKYPE, "10.0.0.1", f"10.0.1.{i}", 5000 + i, 443, T0 + i, n_packets=5)
    pcap = tmp_path / "three.pcap"
    write_capture(sorted(pkts, key=lambda p: p.timestamp), pcap)
    out = tmp_path / "f.csv"
    assert main(["extract", "--pcap", str(pcap), "--label", "Skype", "--out", str(out)]) == 0
    assert len(load_dataset(out.read_text())) == 3


def test_extract_usage_and_input_errors(tmp_path):
    pcap = tmp_path / "e.pcap"
    write_capture([], pcap)
    assert main(["extract", "--pcap", str(pcap), "--out", str(tmp_path / "x.csv")]) == 64
    bad = tmp_path / "bad.pcap"
    bad.write_bytes(b"not a capture at all")
    assert main(["extract", "--pcap", str(bad)]) == 2
    with pytest.raises(SystemExit) as err:
        main(["nonsense"])
    assert err.value.code == 64


def test_train_deterministic(tmp_path, corpus_csv, model_dir):
    again = tmp_path / "again"
    assert main(["train", "--dataset", str(corpus_csv), "--out-dir", str(again), "--seed", "1"]) == 0
    for f in sorted(p.name for p in model_dir.iterdir()):
        assert (again / f).read_bytes() == (model_dir / f).read_bytes(), f
    assert "1.000000" in (model_dir / "calibration.txt").read_text()


def test_train_single_class(tmp_path):
    ds = synthetic_corpus(40, seed=0)
    keep = ds.y == 0
    from skypesiem.learnkit import LabeledDataset
    path = tmp_path / "one.csv"
    path.write_text(LabeledDataset(ds.X[keep], ds.y[keep]).to_csv())
    assert main(["train", "--dataset", str(path), "--out-dir", str(tmp_path / "m")]) == 3


def test_eval_report(tmp_path, corpus_csv, model_dir):
    out = tmp_path / "eval"
    assert main(["eval", "--dataset", str(corpus_csv), "--models", str(model_dir), "--out-dir", str(out)]) == 0
    rows = parse_report((out / "report.txt").read_text())
    names = list(dict.fromkeys(r.classifier for r in rows))
    assert len(names) == 4 and names[-1] == "Majority vote"
    assert all(r.tp_rate == 1.0 for r in rows)
    curves = read_roc_csv((out / "roc.csv").read_text())
    for name in names:
        auc = next(r.auc for r in rows if r.classifier == name)
        assert auc == pytest.approx(trapezoid_area(curves[name]), abs=1e-3)
    errors = list(csv.DictReader(io.StringIO((out / "errors.csv").read_text())))
    assert len(errors) == 300 and set(errors[0]) == {"avg_lgt", "avg_iat", "predicted", "correct"}
    assert roc_auc([0, 1], [1.0, 0.0]).auc == 1.0


def test_simulate_shipped(capsys):
    for name in SHIPPED:
        assert main(["simulate", "--scenario", name]) == 0
    assert "PASS" in capsys.readouterr().out


def test_simulate_failure_transcript(tmp_path, capsys):
    text = shipped_text("skype_attach_and_session.scn").replace("risk=1.8", "risk=2.0")
    path = tmp_path / "wrong.scn"
    path.write_text(text)
    assert main(["simulate", "--scenario", str(path)]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "risk" in out


def test_simulate_list(capsys):
    assert main(["simulate", "--list"]) == 0
    out = capsys.readouterr().out
    assert all(n in out for n in SHIPPED)
