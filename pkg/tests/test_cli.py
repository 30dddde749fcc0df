import json
import os

import pytest

from turbo_i2i import checkpoint as ckpt
from turbo_i2i.cli import main
from turbo_i2i.data import SceneSpec, write_dataset
from turbo_i2i.generator import ModelConfig, OneStepTranslator


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data") / "ds"
    write_dataset(root, 6, SceneSpec(seed=40))
    return root


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("models") / "toy"
    model = OneStepTranslator(ModelConfig(seed=41))
    model.pretrained = True
    ckpt.save_translator(model, out, model_id="toy")
    return out


class TestGenData:
    def test_writes_layout(self, tmp_path):
        rc = main(["gen-data", "--out", str(tmp_path / "d"), "--n", "2", "--seed", "1"])
        assert rc == 0
        assert (tmp_path / "d" / "day" / "00001.png").exists()
        assert (tmp_path / "d" / "night" / "00001.png").exists()
        assert (tmp_path / "d" / "resolved_config.json").exists()

    def test_same_seed_identical(self, tmp_path):
        main(["gen-data", "--out", str(tmp_path / "a"), "--n", "1", "--seed", "3"])
        main(["gen-data", "--out", str(tmp_path / "b"), "--n", "1", "--seed", "3"])
        a = (tmp_path / "a" / "day" / "00000.png").read_bytes()
        b = (tmp_path / "b" / "day" / "00000.png").read_bytes()
        assert a == b


class TestTranslate:
    def test_gamma1_byte_identical_across_seeds(self, tmp_path, dataset_dir, model_dir):
        src = dataset_dir / "day" / "00000.png"
        for seed, name in ((7, "o1.png"), (8, "o2.png")):
            rc = main(["translate", "--in", str(src), "--out", str(tmp_path / name),
                       "--model", str(model_dir), "--domain", "night",
                       "--gamma", "1", "--seed", str(seed)])
            assert rc == 0
        assert (tmp_path / "o1.png").read_bytes() == (tmp_path / "o2.png").read_bytes()

    def test_gamma0_differs_across_seeds(self, tmp_path, dataset_dir, model_dir):
        src = dataset_dir / "day" / "00000.png"
        for seed, name in ((7, "o1.png"), (8, "o2.png")):
            main(["translate", "--in", str(src), "--out", str(tmp_path / name),
                  "--model", str(model_dir), "--domain", "night",
                  "--gamma", "0", "--seed", str(seed)])
        assert (tmp_path / "o1.png").read_bytes() != (tmp_path / "o2.png").read_bytes()

    def test_invalid_gamma_exit1(self, tmp_path, dataset_dir, model_dir):
        rc = main(["translate", "--in", str(dataset_dir / "day" / "00000.png"),
                   "--out", str(tmp_path / "o.png"), "--model", str(model_dir),
                   "--domain", "night", "--gamma", "1.5"])
        assert rc == 1


class TestEvaluate:
    def test_identical_folders_fid_zero(self, dataset_dir, capsys):
        rc = main(["evaluate", "--source", str(dataset_dir / "day"),
                   "--target", str(dataset_dir / "day")])
        assert rc == 0
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["fid"] < 1e-6
        assert metrics["dino_struct"] < 1e-6

    def test_cross_domain_positive(self, dataset_dir, capsys):
        main(["evaluate", "--source", str(dataset_dir / "day"),
              "--target", str(dataset_dir / "night")])
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["fid"] > 0.01


class TestBench:
    def test_report_contract(self, capsys, model_dir):
        rc = main(["bench", "--model", str(model_dir), "--size", "64", "--reps", "3"])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert len(report["timings_ms"]) == 3
        assert report["median_ms"] <= report["p95_ms"]

    def test_reps_validated(self):
        assert main(["bench", "--reps", "2"]) == 1

    def test_small_faster_than_large(self, capsys, model_dir):
        main(["bench", "--model", str(model_dir), "--size", "64", "--reps", "5"])
        t64 = json.loads(capsys.readouterr().out)["median_ms"]
        main(["bench", "--model", str(model_dir), "--size", "256", "--reps", "5"])
        t256 = json.loads(capsys.readouterr().out)["median_ms"]
        assert t64 < t256


class TestUsage:
    def test_unknown_command_exit2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_exit2(self):
        with pytest.raises(SystemExit) as exc:
            main(["gen-data", "--out", "x", "--no-such-flag", "1"])
        assert exc.value.code == 2

    def test_missing_required_exit1(self):
        assert main(["gen-data"]) == 1

    def test_config_file_supplies_flags(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"out": str(tmp_path / "d"), "n": 2, "seed": 5}))
        rc = main(["--config", str(cfg), "gen-data"])
        assert rc == 0
        assert (tmp_path / "d" / "day" / "00001.png").exists()

    def test_explicit_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"out": str(tmp_path / "from_config"), "n": 1}))
        rc = main(["--config", str(cfg), "gen-data", "--out", str(tmp_path / "explicit")])
        assert rc == 0
        assert (tmp_path / "explicit").exists()
        assert not (tmp_path / "from_config").exists()


class TestTrainCommands:
    def test_pretrain_then_unpaired_smoke(self, dataset_dir, tmp_path):
        bb = tmp_path / "bb"
        rc = main(["pretrain", "--data", str(dataset_dir), "--out", str(bb),
                   "--steps", "2", "--ae-steps", "2", "--gen-steps", "2",
                   "--batch-size", "2", "--eval-n", "0"])
        assert rc == 0
        assert ckpt.load_manifest(bb)["pretrained"]
        out = tmp_path / "m"
        rc = main(["train-unpaired", "--data", str(dataset_dir), "--backbone", str(bb),
                   "--out", str(out), "--steps", "2", "--batch-size", "2", "--eval-n", "2"])
        assert rc == 0
        assert (out / "history.ndjson").exists()
        assert (out / "resolved_config.json").exists()
        hist = [json.loads(l) for l in (out / "history.ndjson").read_text().splitlines()]
        assert any(h.get("kind") == "eval" and h["step"] == 0 for h in hist)

    def test_ablate_all_variants_csv(self, dataset_dir, tmp_path):
        bb = tmp_path / "bb2"
        main(["pretrain", "--data", str(dataset_dir), "--out", str(bb),
              "--steps", "2", "--ae-steps", "2", "--gen-steps", "2", "--batch-size", "2"])
        out_csv = tmp_path / "abl.csv"
        rc = main(["ablate", "--data", str(dataset_dir), "--backbone", str(bb),
                   "--variants", "A,B,C,D,FULL", "--out", str(out_csv),
                   "--steps", "2", "--batch-size", "2", "--eval-n", "2"])
        assert rc == 0
        import csv as csvmod
        with open(out_csv, newline="") as fh:
            rows = list(csvmod.DictReader(fh))
        assert len(rows) == 5
        assert [r["variant"] for r in rows] == ["A", "B", "C", "D", "FULL"]
        assert rows[0]["pretrained"] == "False" and rows[4]["pretrained"] == "True"

    def test_sweep_csv(self, dataset_dir, tmp_path):
        bb = tmp_path / "bb3"
        main(["pretrain", "--data", str(dataset_dir), "--out", str(bb),
              "--steps", "2", "--ae-steps", "2", "--gen-steps", "2", "--batch-size", "2"])
        out_csv = tmp_path / "sweep.csv"
        rc = main(["sweep", "--data", str(dataset_dir), "--backbone", str(bb),
                   "--sizes", "2,4", "--out", str(out_csv),
                   "--steps", "2", "--batch-size", "2", "--eval-n", "2"])
        assert rc == 0
        import csv as csvmod
        with open(out_csv, newline="") as fh:
            rows = list(csvmod.DictReader(fh))
        assert [int(r["size"]) for r in rows] == [2, 4]


class TestHome:
    def test_checkpoint_resolved_under_home(self, tmp_path, dataset_dir, monkeypatch, capsys):
        home = tmp_path / "home"
        model = OneStepTranslator(ModelConfig(seed=42))
        ckpt.save_translator(model, home / "named-model", model_id="named")
        monkeypatch.setenv("TURBO_I2I_HOME", str(home))
        rc = main(["bench", "--model", "named-model", "--reps", "3"])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["reps"] == 3

    def test_missing_checkpoint_exit1(self, monkeypatch, tmp_path):
        monkeypatch.setenv("TURBO_I2I_HOME", str(tmp_path))
        assert main(["bench", "--model", "nope", "--reps", "3"]) == 1
