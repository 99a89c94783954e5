import csv
import json

import pytest

from stscuc.cli import DEFAULTS, config_hash, load_config, main

SMALL = {
    "samples": 6,
    "nc_model": {"depth": 2, "width": 4, "lstm_hidden": 4},
    "ec_model": {"depth": 2, "width": 4},
    "training": {"epochs": 2},
    "mip_gap": 0.0,
}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = root / "config.json"
    cfg.write_text(json.dumps({**SMALL, "outdir": str(root / "out")}))
    assert main(["all", "--config", str(cfg)]) == 0
    assert main(["reduce", "--config", str(cfg), "--oracle"]) == 0
    assert main(["verify", "--config", str(cfg), "--oracle", "--variant", "cr"]) == 0
    assert main(["report", "--config", str(cfg)]) == 0
    return root, cfg


def _strip_times(doc):
    if isinstance(doc, dict):
        return {k: _strip_times(v) for k, v in doc.items() if "time" not in k}
    if isinstance(doc, list):
        return [_strip_times(v) for v in doc]
    return doc


def test_layout(run_dir):
    root, _ = run_dir
    out = root / "out"
    for rel in ("samples/samples.json", "graphs/graphs_nc.json", "graphs/graphs_ec.json",
                "graphs/split.json", "models/nc.json", "models/ec.json",
                "plans/predictions.json", "reports/summary.json", "reports/summary.txt",
                "reports/verification_vcr.csv", "reports/verification_cr_oracle.csv"):
        assert (out / rel).exists(), rel
    assert not list(out.rglob("*.tmp"))


def test_oracle_cr_bnc_zero(run_dir):
    root, _ = run_dir
    rows = list(csv.DictReader(open(root / "out" / "reports" / "verification_cr_oracle.csv")))
    assert rows and all(r["feasible"] == "1" for r in rows)
    assert all(f"{float(r['bnc']):.2f}" == "0.00" for r in rows)
    text = (root / "out" / "reports" / "summary.txt").read_text()
    assert "Infeasible samples (C-R oracle): 0" in text


def test_artifacts_carry_hash(run_dir):
    root, cfg = run_dir
    h = config_hash(load_config(cfg))
    for path in (root / "out").rglob("*.json"):
        assert json.loads(path.read_text())["config_hash"] == h, path


def test_rerun_identical(run_dir):
    root, cfg = run_dir
    out = root / "out"
    before = {p: p.read_text() for p in [out / "graphs" / "graphs_nc.json", out / "models" / "nc.json",
                                         out / "plans" / "predictions.json"]}
    samples = json.loads((out / "samples" / "samples.json").read_text())
    assert main(["gen-samples", "--config", str(cfg)]) == 0
    assert main(["build-graphs", "--config", str(cfg)]) == 0
    assert main(["train-nc", "--config", str(cfg)]) == 0
    assert main(["predict", "--config", str(cfg)]) == 0
    again = json.loads((out / "samples" / "samples.json").read_text())
    assert _strip_times(again) == _strip_times(samples)
    for p, text in before.items():
        assert p.read_text() == text, p


def test_missing_upstream(tmp_path, capsys):
    assert main(["build-graphs", "--outdir", str(tmp_path / "empty")]) == 1
    assert "samples.json" in capsys.readouterr().err


def test_corrupt_upstream(tmp_path, capsys):
    bad = tmp_path / "o" / "samples" / "samples.json"
    bad.parent.mkdir(parents=True)
    bad.write_text("{not json")
    assert main(["build-graphs", "--outdir", str(tmp_path / "o")]) == 1
    assert str(bad) in capsys.readouterr().err


def test_config_validation(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"thresholds": {"fix_off": 0.7}}))
    assert main(["gen-samples", "--config", str(cfg), "--outdir", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["gen-samples", "--config", str(cfg)]) == 2
    assert "config error" in capsys.readouterr().err


def test_mixed_hash_refused(run_dir, capsys):
    root, cfg = run_dir
    # a different mip gap changes the hash; verify must refuse older inputs
    assert main(["verify", "--config", str(cfg), "--oracle", "--mipgap", "0.01"]) == 1
    assert "allow-mixed" in capsys.readouterr().err
    assert main(["verify", "--config", str(cfg), "--oracle", "--mipgap", "0.01",
                 "--allow-mixed"]) == 0


def test_hash_ignores_scheduling():
    a = dict(DEFAULTS)
    b = dict(DEFAULTS, jobs=4, outdir="elsewhere", variant="cr")
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(dict(DEFAULTS, seed=1))
