"""End-to-end exercises of the command-line front end (in-process)."""

import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from physgrd.cli import main
from physgrd.grf_model import Prediction, write_prediction_csv
from physgrd.motion_data import entry_stems, load_manifest


def run(*argv):
    return main([str(a) for a in argv])


def gen_small(out_dir, kind="hop", subjects=2, duration=1.2, seed=42, extra=()):
    code = run(
        "gen", "--kind", kind, "--subjects", subjects, "--duration", duration,
        "--seed", seed, "--out-dir", out_dir, *extra,
    )
    assert code == 0
    return Path(out_dir) / "manifest.json"


def tree_bytes(root):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(Path(root).rglob("*"))
        if p.is_file()
    }


class TestGen:
    def test_same_seed_byte_identical(self, tmp_path):
        gen_small(tmp_path / "a")
        gen_small(tmp_path / "b")
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_ballistic_final_height_matches_closed_form(self, tmp_path):
        run("gen", "--kind", "ballistic", "--duration", "1.0", "--subjects", "1",
            "--out-dir", tmp_path, "--x0", "0,0,2", "--v0", "0,0,0")
        ds = load_manifest(tmp_path / "manifest.json")
        z_end = ds.entries[0].clip.root_positions[-1, 2]
        assert z_end == pytest.approx(2.0 - 4.905, abs=1e-12)

    def test_negative_frequency_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("gen", "--kind", "hop", "--freq", "-1", "--out-dir", tmp_path)
        assert exc.value.code == 2

    def test_unknown_flag_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("gen", "--kind", "hop", "--frobnicate", "--out-dir", tmp_path)
        assert exc.value.code == 2

    def test_unknown_kind_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("gen", "--kind", "sprint", "--out-dir", tmp_path)
        assert exc.value.code == 2


class TestCalibrate:
    def test_singleton_cell(self, tmp_path):
        manifest = gen_small(tmp_path / "data")
        assert run(
            "calibrate", "--manifest", manifest, "--kp", "70", "--kd", "3",
            "--out-dir", tmp_path / "calib",
        ) == 0
        doc = json.loads((tmp_path / "calib" / "best_gains.json").read_text())
        assert (doc["kp"], doc["kd"]) == (70.0, 3.0)
        assert doc["mode"] == "closed_loop"

    def test_recovers_generating_gains_with_extra_cell(self, tmp_path):
        manifest = gen_small(
            tmp_path / "data", kind="spring_tracked", subjects=3, duration=2.0,
            extra=("--kp", "50", "--kd", "6"),
        )
        assert run(
            "calibrate", "--manifest", manifest, "--extra-cell", "50,6",
            "--out-dir", tmp_path / "calib",
        ) == 0
        doc = json.loads((tmp_path / "calib" / "best_gains.json").read_text())
        assert (doc["kp"], doc["kd"]) == (50.0, 6.0)
        report = (tmp_path / "calib" / "calibration_report.csv").read_text().splitlines()
        assert report[0] == "kp,kd,S1,S2,S3,avg,std"
        assert len(report) == 12  # ten default cells plus the extra one

    def test_missing_manifest_is_runtime_error(self, tmp_path, capfd):
        assert run(
            "calibrate", "--manifest", tmp_path / "nope.json", "--out-dir", tmp_path
        ) == 1
        err = capfd.readouterr().err.strip()
        # errors are a single machine-parseable line
        assert len(err.splitlines()) == 1
        assert err.startswith("physgrd: error:")


class TestSimulate:
    def test_writes_sim_files(self, tmp_path):
        manifest = gen_small(tmp_path / "data")
        assert run(
            "simulate", "--manifest", manifest, "--kp", "70", "--kd", "3",
            "--out-dir", tmp_path / "sim",
        ) == 0
        files = sorted(p.name for p in (tmp_path / "sim").iterdir())
        assert "S1_hop_000_sim.csv" in files
        assert "simulate_summary.csv" in files
        header = (tmp_path / "sim" / "S1_hop_000_sim.csv").read_text().splitlines()[0]
        assert header == "t,px,py,pz,vx,vy,vz,fx,fy,fz"


class TestTrainPredictMetrics:
    def pipeline(self, tmp_path, lambda2="0.005"):
        manifest = gen_small(tmp_path / "data", kind="walk", subjects=2, duration=1.5)
        assert run(
            "train", "--manifest", manifest, "--test-subject", "S2",
            "--epochs", "2", "--batch-size", "8", "--learning-rate", "1e-3",
            "--window-len", "100", "--conv-channels", "6,6,6,6", "--fc-widths", "8,6",
            "--lambda2", lambda2, "--out-dir", tmp_path / "train",
        ) == 0
        assert run(
            "predict", "--manifest", manifest,
            "--checkpoint", tmp_path / "train" / "checkpoint.json",
            "--subject", "S2", "--out-dir", tmp_path / "pred",
        ) == 0
        assert run(
            "metrics", "--manifest", manifest, "--pred-dir", tmp_path / "pred",
            "--subject", "S2", "--out-dir", tmp_path / "metrics",
        ) == 0
        return manifest

    def test_metrics_reproduce_final_log_row(self, tmp_path):
        self.pipeline(tmp_path)
        log = (tmp_path / "train" / "train_log.csv").read_text().splitlines()
        last = [float(v) for v in log[-1].split(",")]
        vgrf_l, vgrf_r, vrpe = last[4], last[5], last[6]

        rows = (tmp_path / "metrics" / "metrics_summary.csv").read_text().splitlines()[1:]
        vals = np.array([[float(v) for v in r.split(",")[3:]] for r in rows])
        means = vals.mean(axis=0)
        assert means[0] == pytest.approx(vgrf_l, abs=1e-9)
        assert means[1] == pytest.approx(vgrf_r, abs=1e-9)
        assert means[2] == pytest.approx(vrpe, abs=1e-9)

    def test_metrics_on_perfect_predictions_zero_table(self, tmp_path):
        manifest = gen_small(tmp_path / "data", kind="walk", subjects=1, duration=1.0)
        ds = load_manifest(manifest)
        pred_dir = tmp_path / "pred"
        pred_dir.mkdir()
        for entry, stem in zip(ds, entry_stems(ds)):
            write_prediction_csv(
                Prediction(forces=entry.plate.per_foot_force),
                pred_dir / f"{stem}_pred.csv",
                entry.clip.frame_rate,
            )
        assert run(
            "metrics", "--manifest", manifest, "--pred-dir", pred_dir,
            "--out-dir", tmp_path / "metrics",
        ) == 0
        table = (tmp_path / "metrics" / "table_vgrf.csv").read_text().splitlines()
        for line in table[1:]:
            _, left, right = line.split(",")
            assert float(left) == 0.0 and float(right) == 0.0
        vrpe_table = (tmp_path / "metrics" / "table_vrpe.csv").read_text().splitlines()
        assert float(vrpe_table[1].split(",")[1]) < 1e-9

    def test_missing_prediction_is_runtime_error(self, tmp_path):
        manifest = gen_small(tmp_path / "data", kind="walk", subjects=1, duration=1.0)
        (tmp_path / "pred").mkdir()
        assert run(
            "metrics", "--manifest", manifest, "--pred-dir", tmp_path / "pred",
            "--out-dir", tmp_path / "metrics",
        ) == 1

    def test_bad_checkpoint_version_is_runtime_error(self, tmp_path):
        manifest = gen_small(tmp_path / "data", kind="walk", subjects=2, duration=1.5)
        ckpt = tmp_path / "ckpt.json"
        ckpt.write_text(json.dumps({"format_version": 99}))
        assert run(
            "predict", "--manifest", manifest, "--checkpoint", ckpt,
            "--out-dir", tmp_path / "pred",
        ) == 1

    def test_physics_weight_improves_held_out_vrpe(self, tmp_path):
        # plates go missing during the walk's ramp-up, so the physics term is
        # the only supervision covering the start of every rollout
        manifest = gen_small(
            tmp_path / "data", kind="walk", subjects=3, duration=4.0, seed=11,
            extra=("--missing-lead", "0.3", "--jitter", "0.3"),
        )
        scores = {}
        for lam2 in ("0", "0.005"):
            out = tmp_path / f"train_{lam2}"
            assert run(
                "train", "--manifest", manifest, "--test-subject", "S3",
                "--epochs", "25", "--batch-size", "8", "--learning-rate", "1e-3",
                "--window-len", "120", "--conv-channels", "12,12,12,12",
                "--fc-widths", "12,8", "--lambda2", lam2, "--seed", "0",
                "--out-dir", out,
            ) == 0
            last = (out / "train_log.csv").read_text().splitlines()[-1]
            scores[lam2] = float(last.split(",")[-1])
        assert scores["0.005"] <= scores["0"]


class TestPlot:
    def test_svg_outputs_with_gaps(self, tmp_path):
        gen_small(tmp_path / "data", kind="walk", subjects=1, duration=1.5,
                  extra=("--missing-lead", "0.3"))
        data = tmp_path / "data"
        assert run(
            "plot", "--clip", data / "S1_walk_000_clip.csv",
            "--plate", data / "S1_walk_000_plate.csv",
            "--out-dir", tmp_path / "plots",
        ) == 0
        force_svg = (tmp_path / "plots" / "force.svg").read_text()
        assert force_svg.startswith("<svg")
        assert force_svg.rstrip().endswith("</svg>")
        # the masked lead span must not be drawn: the plate series splits
        # into polylines that begin after the gap
        sidecar = (tmp_path / "plots" / "force.csv").read_text().splitlines()
        lead_vals = [l.split(",")[2] for l in sidecar[1:10] if l.startswith("plate")]
        assert all(v == "NaN" for v in lead_vals)

    def test_identical_series_coincide(self, tmp_path):
        gen_small(tmp_path / "data", kind="hop", subjects=1, duration=1.0)
        data = tmp_path / "data"
        assert run(
            "plot", "--clip", data / "S1_hop_000_clip.csv",
            "--out-dir", tmp_path / "plots",
        ) == 0
        assert (tmp_path / "plots" / "trajectory.svg").exists()

    def test_mismatched_plate_length_is_runtime_error(self, tmp_path):
        gen_small(tmp_path / "a", kind="walk", subjects=1, duration=1.0)
        gen_small(tmp_path / "b", kind="walk", subjects=1, duration=2.0)
        assert run(
            "plot", "--clip", tmp_path / "a" / "S1_walk_000_clip.csv",
            "--plate", tmp_path / "b" / "S1_walk_000_plate.csv",
            "--out-dir", tmp_path / "plots",
        ) == 1


class TestIdempotence:
    def test_simulate_twice_byte_identical(self, tmp_path):
        manifest = gen_small(tmp_path / "data")
        run("simulate", "--manifest", manifest, "--out-dir", tmp_path / "s1")
        run("simulate", "--manifest", manifest, "--out-dir", tmp_path / "s2")
        assert tree_bytes(tmp_path / "s1") == tree_bytes(tmp_path / "s2")
