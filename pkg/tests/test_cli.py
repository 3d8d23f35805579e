import csv
import json

import pytest

from cardiomm.cli import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, exit_code_for, main
from cardiomm.classic import CgDivergenceError
from cardiomm.container import list_records

SMALL = ["--acs-lines", "4", "--acs-block", "4", "4"]
MICRO = {"model": {"phases": 1, "unet_levels": 2, "base_channels": 4, "sens_channels": 4,
                   "sens_levels": 1, "embed_dim": 8},
         "train": {"epochs": 1, "patterns": ["uniform"], "afs": [4], "acs_lines": 4,
                   "acs_block": [4, 4], "val_af": 4},
         "val_fraction": 0.34}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    spec = write_json(root / "spec.json", {"n_phantoms": 3, "shape": [24, 24], "n_coils": 2,
                                           "frames": [0], "snr": 200})
    assert main(["synth", "--spec", spec, "--seed", "3", "--out", str(root / "synth")]) == 0
    return root / "synth" / "dataset"


@pytest.fixture(scope="module")
def checkpoint(dataset, tmp_path_factory):
    root = tmp_path_factory.mktemp("ckpt")
    cfg = write_json(root / "cfg.json", MICRO)
    assert main(["train", "--data", str(dataset), "--config", cfg, "--seed", "0", "--float64",
                 "--out", str(root / "run")]) == 0
    return root / "run" / "best"


class TestSynth:
    def test_record_count_and_manifest(self, dataset):
        assert len(list_records(dataset)) == 3
        manifest = json.loads((dataset.parent / "manifest.json").read_text())
        assert manifest["subcommand"] == "synth" and manifest["seed"] == 3
        assert "dataset/index.json" in manifest["outputs"]
        assert "wall_clock_s" in json.loads((dataset.parent / "timing.json").read_text())

    def test_rerun_identical(self, tmp_path):
        spec = write_json(tmp_path / "s.json", {"n_phantoms": 2, "shape": [16, 16], "n_coils": 2})
        for d in ("a", "b"):
            assert main(["synth", "--spec", spec, "--seed", "9", "--out", str(tmp_path / d)]) == 0
        assert (tmp_path / "a" / "manifest.json").read_bytes() == \
            (tmp_path / "b" / "manifest.json").read_bytes()

    def test_bad_field(self, tmp_path, capsys):
        spec = write_json(tmp_path / "s.json", {"n_phantom": 2})
        assert main(["synth", "--spec", spec, "--out", str(tmp_path / "o")]) == EXIT_VALIDATION
        assert "n_phantom" in capsys.readouterr().err

    def test_missing_spec(self, tmp_path):
        assert main(["synth", "--spec", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == EXIT_IO

    def test_generated_seed_recorded(self, tmp_path):
        spec = write_json(tmp_path / "s.json", {"n_phantoms": 1, "shape": [16, 16], "n_coils": 1})
        assert main(["synth", "--spec", spec, "--out", str(tmp_path / "o")]) == 0
        assert isinstance(json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"], int)


class TestMask:
    def test_writes_mask(self, tmp_path):
        assert main(["mask", "--shape", "240", "20", "--af", "8", "--seed", "1",
                     "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "mask.json").read_text())["effective_af"] == 8.0
        assert (tmp_path / "mask.png").is_file()

    def test_invalid_mask(self, tmp_path):
        assert main(["mask", "--shape", "16", "16", "--acs-lines", "40",
                     "--out", str(tmp_path)]) == EXIT_VALIDATION


class TestReconEval:
    def test_conventional_metrics_row(self, dataset, tmp_path):
        assert main(["recon", "--data", str(dataset), "--method", "conventional", "--ref",
                     "--records", "0", "--af", "4", "--seed", "0", "--out", str(tmp_path)]
                    + SMALL) == 0
        rows = read_csv(tmp_path / "metrics.csv")
        assert len(rows) == 1 and float(rows[0]["psnr"]) > 0
        assert (tmp_path / "record_00000_recon.png").is_file()

    def test_eval_row_count(self, dataset, tmp_path):
        assert main(["eval", "--data", str(dataset), "--af", "4", "--seed", "0",
                     "--out", str(tmp_path)] + SMALL) == 0
        rows = read_csv(tmp_path / "metrics.csv")
        assert len(rows) == 4 and rows[-1]["record"] == "aggregate"
        assert float(rows[-1]["psnr_ci_low"]) <= float(rows[-1]["psnr"])

    def test_jobs_do_not_change_output(self, dataset, tmp_path):
        for jobs in ("1", "3"):
            assert main(["eval", "--data", str(dataset), "--method", "conventional", "--af", "4",
                         "--seed", "0", "--float64", "--jobs", jobs,
                         "--out", str(tmp_path / jobs)] + SMALL) == 0
        assert (tmp_path / "1" / "metrics.csv").read_bytes() == \
            (tmp_path / "3" / "metrics.csv").read_bytes()

    def test_cardiomm_records_checkpoint_digest(self, dataset, checkpoint, tmp_path):
        assert main(["recon", "--data", str(dataset), "--method", "cardiomm", "--checkpoint",
                     str(checkpoint), "--af", "4", "--seed", "0", "--out", str(tmp_path)]
                    + SMALL) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert set(manifest["inputs"]) == {"data", "checkpoint"}

    def test_cardiomm_needs_checkpoint(self, dataset, tmp_path):
        assert main(["recon", "--data", str(dataset), "--method", "cardiomm",
                     "--out", str(tmp_path)] + SMALL) == EXIT_VALIDATION

    def test_record_out_of_range(self, dataset, tmp_path):
        assert main(["eval", "--data", str(dataset), "--records", "7",
                     "--out", str(tmp_path)] + SMALL) == EXIT_VALIDATION

    def test_missing_dataset(self, tmp_path):
        assert main(["eval", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "o")]
                    + SMALL) == EXIT_IO

    def test_writes_only_inside_out(self, dataset, tmp_path):
        before = sorted(p.name for p in tmp_path.iterdir())
        main(["eval", "--data", str(dataset), "--af", "4", "--seed", "0",
              "--out", str(tmp_path / "o")] + SMALL)
        assert sorted(p.name for p in tmp_path.iterdir()) == sorted(before + ["o"])


class TestTrainAnalyze:
    def test_train_outputs(self, checkpoint):
        run = checkpoint.parent
        manifest = json.loads((run / "manifest.json").read_text())
        assert manifest["config"]["train"]["dtype"] == "float64"
        assert {"best.bin", "last.bin", "epochs.csv", "steps.csv"} <= set(manifest["outputs"])

    def test_unknown_train_field(self, dataset, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"train": {"epoch": 1}})
        assert main(["train", "--data", str(dataset), "--config", cfg,
                     "--out", str(tmp_path / "o")]) == EXIT_VALIDATION

    def test_embed_dump(self, dataset, checkpoint, tmp_path):
        assert main(["embed-dump", "--data", str(dataset), "--checkpoint", str(checkpoint),
                     "--patterns", "uniform", "radial", "--afs", "4", "8", "--seed", "0",
                     "--out", str(tmp_path)] + SMALL) == 0
        rows = read_csv(tmp_path / "embeddings.csv")
        assert sum(r["kind"] == "undersampling" for r in rows) == 4

    @pytest.mark.parametrize("task", ["phenotypes", "lge", "lvmwt"])
    def test_analyze_tasks(self, tmp_path, task):
        spec = write_json(tmp_path / "s.json", {"n_phantoms": 1, "shape": [48, 48], "n_coils": 2,
                                                "frames": [0, 3, 6], "modality": "lge",
                                                "lesion_sector": [0.0, 1.0]})
        assert main(["synth", "--spec", spec, "--seed", "1", "--out", str(tmp_path / "s")]) == 0
        assert main(["analyze", "--task", task, "--data", str(tmp_path / "s" / "dataset"),
                     "--seed", "0", "--out", str(tmp_path / "a")]) == 0
        rows = read_csv(tmp_path / "a" / f"{task}.csv")
        assert len(rows) == (1 if task == "phenotypes" else 3)

    def test_agreement(self, dataset, tmp_path):
        main(["eval", "--data", str(dataset), "--af", "4", "--seed", "0",
              "--out", str(tmp_path / "e")] + SMALL)
        assert main(["analyze", "--task", "agreement", "--csv", str(tmp_path / "e" / "metrics.csv"),
                     "--a", "psnr", "--b", "ssim", "--out", str(tmp_path / "a")]) == 0
        assert len(read_csv(tmp_path / "a" / "agreement.csv")) == 1

    def test_inspect(self, dataset, capsys):
        assert main(["inspect", str(dataset)]) == 0
        assert json.loads(capsys.readouterr().out)["format_version"] == 1


class TestExitCodes:
    @pytest.mark.parametrize("exc,code", [(FloatingPointError("x"), EXIT_NUMERICAL),
                                          (CgDivergenceError("x", []), EXIT_NUMERICAL),
                                          (FileNotFoundError("x"), EXIT_IO),
                                          (ValueError("x"), EXIT_VALIDATION)])
    def test_mapping(self, exc, code):
        assert exit_code_for(exc) == code

    def test_unexpected_reraised(self):
        with pytest.raises(RuntimeError):
            exit_code_for(RuntimeError("bug"))

    def test_success_code(self):
        assert EXIT_OK == 0
