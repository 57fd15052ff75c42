import csv
import json

import numpy as np
import pytest
import yaml

from conftest import DATA
from molpix.cli import REFERENCE_PARAM_COUNTS, RunConfig, load_config, main
from molpix.exceptions import ConfigError
from molpix.net import NetSpec, build, save_checkpoint
from molpix.raster import read_pgm
from test_layout import C60


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestRender:
    def test_single_atom(self, tmp_path):
        assert main(["render", "C", "--out", str(tmp_path)]) == 0
        img = read_pgm(tmp_path / "mol1.pgm")
        assert np.count_nonzero(img.pixels) == 1 and img.pixels.max() == 12

    def test_csv_with_bad_row(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("id,smiles\na,CCO\nb,C1CC\nc,c1ccccc1\n")
        out = tmp_path / "out"
        assert main(["render", "--csv", str(src), "--out", str(out)]) == 0
        assert sorted(p.name for p in out.glob("*.pgm")) == ["a.pgm", "c.pgm"]
        manifest = rows(out / "manifest.csv")
        assert [r["status"] for r in manifest] == ["ok", "SmilesSyntaxError", "ok"]

    def test_layout_failure_row(self, tmp_path):
        assert main(["render", C60, "CC", "--out", str(tmp_path)]) == 0
        assert [r["status"] for r in rows(tmp_path / "manifest.csv")] == ["LayoutDegenerate", "ok"]

    def test_all_fail(self, tmp_path):
        assert main(["render", "C(", "--out", str(tmp_path)]) == 2


class TestInspect:
    @pytest.mark.parametrize("tier, filters", sorted(REFERENCE_PARAM_COUNTS))
    def test_reference_match(self, tier, filters, capsys):
        assert main(["inspect", "--tier", str(tier), "--filters", str(filters)]) == 0
        out = capsys.readouterr().out
        ref = REFERENCE_PARAM_COUNTS[(tier, filters)]
        assert f"total {ref:,} reference {ref:,} (match)" in out

    def test_all(self, capsys):
        assert main(["inspect", "--all"]) == 0
        assert capsys.readouterr().out.count("(match)") == 9

    def test_bad_tier(self, capsys):
        assert main(["inspect", "--tier", "0"]) == 2


class TestConfig:
    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("dataset: x.csv\ntask: y\nlearning_rate: 3\n")
        with pytest.raises(ConfigError):
            load_config(p, {})

    def test_type_error(self):
        with pytest.raises(ConfigError):
            RunConfig.from_mapping({"dataset": "x", "task": "y", "tier": "two"})

    def test_overrides_win(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("dataset: x.csv\ntask: y\nseed: 1\n")
        assert load_config(p, {"seed": 9, "tier": None}).seed == 9

    def test_invalid_spec(self):
        with pytest.raises(ConfigError):
            RunConfig.from_mapping({"dataset": "x", "task": "y", "filters": 0})

    def test_bad_yaml_exit_code(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("dataset: [unclosed\n")
        assert main(["train", "--config", str(p)]) == 1


def toy_config(tmp_path, out, **extra):
    cfg = {"dataset": str(DATA / "toy60.csv"), "name": "toy60", "task": "has_nitrogen", "filters": 4,
           "stage1_epochs": 1, "stage2_epochs": 1, "batch_size": 16, "patience": None, "seed": 3,
           "out": str(out), **extra}
    p = tmp_path / f"{out.name}.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return p


class TestTrain:
    def test_missing_dataset_leaves_nothing(self, tmp_path):
        out = tmp_path / "run"
        cfg = toy_config(tmp_path, out, dataset=str(tmp_path / "nope.csv"))
        assert main(["train", "--config", str(cfg)]) != 0
        assert not out.exists()

    def test_artifacts_and_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--config", str(toy_config(tmp_path, a))]) == 0
        assert main(["train", "--config", str(toy_config(tmp_path, b))]) == 0
        for name in ("report.csv", "learning_curve.csv", "model.ckpt", "run.json"):
            assert (a / name).exists()
        assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
        info = json.loads((a / "run.json").read_text())
        assert info["records"] == 60 and info["param_count"] == build(NetSpec(1, 4)).param_count

    def test_too_few_records(self, tmp_path):
        cfg = toy_config(tmp_path, tmp_path / "r", dataset=str(DATA / "toy20.csv"), task="has_ring")
        assert main(["train", "--config", str(cfg)]) == 2


class TestPredict:
    @pytest.fixture()
    def ckpt(self, tmp_path):
        return save_checkpoint(build(NetSpec(1, 4)).init_params(0), tmp_path / "m.ckpt")

    def test_rows(self, ckpt, tmp_path):
        out = tmp_path / "p.csv"
        assert main(["predict", "--checkpoint", str(ckpt), "CCO", "C1CC", "--out", str(out)]) == 0
        r = rows(out)
        assert [x["status"] for x in r] == ["ok", "SmilesSyntaxError"]
        assert 0 <= float(r[0]["probability"]) <= 1 and r[1]["probability"] == ""

    def test_empty_input(self, ckpt, tmp_path):
        out = tmp_path / "p.csv"
        assert main(["predict", "--checkpoint", str(ckpt), "--out", str(out)]) == 0
        assert out.read_text() == "id,smiles,probability,status,reason\n"

    def test_spec_mismatch(self, ckpt, tmp_path):
        out = tmp_path / "p.csv"
        assert main(["predict", "--checkpoint", str(ckpt), "--tier", "2", "C", "--out", str(out)]) == 2

    def test_regression_column(self, tmp_path):
        ckpt = save_checkpoint(build(NetSpec(1, 4, "regression")).init_params(0), tmp_path / "r.ckpt")
        out = tmp_path / "p.csv"
        assert main(["predict", "--checkpoint", str(ckpt), "CC", "--out", str(out)]) == 0
        assert "value" in rows(out)[0]

    def test_missing_checkpoint(self, tmp_path):
        assert main(["predict", "--checkpoint", str(tmp_path / "x.ckpt"), "C", "--out", str(tmp_path / "o.csv")]) == 2


def test_usage_error_exit_code():
    assert main(["frobnicate"]) == 1
