import hashlib
import json

import numpy as np
import pytest

from noma_fl.config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
)
from noma_fl.experiment import build_channels, run_experiment, sweep, validate_ser


def small_config(**top_level):
    payload = config_to_dict(ExperimentConfig())
    payload["geometry"]["num_devices"] = 4
    payload["channel"]["antennas"] = 4
    payload["training"]["rounds"] = 4
    payload["training"]["dataset"]["num_classes"] = 3
    payload["training"]["dataset"]["input_dim"] = 5
    payload["training"]["dataset"]["samples_per_class"] = 8
    payload["training"]["dataset"]["test_samples_per_class"] = 20
    payload["training"]["hidden_dim"] = 6
    for key, value in top_level.items():
        node = payload
        parts = key.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
    return config_from_dict(payload)


def file_digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestConfig:
    def test_defaults_validate(self):
        ExperimentConfig().validate()

    def test_roundtrip_through_json(self, tmp_path):
        cfg = small_config()
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        assert config_to_dict(load_config(path)) == config_to_dict(cfg)

    def test_unknown_key_rejected(self):
        payload = config_to_dict(ExperimentConfig())
        payload["typo"] = 1
        with pytest.raises(ConfigError):
            config_from_dict(payload)

    def test_cross_field_validation(self):
        with pytest.raises(ConfigError, match="bits_per_codeword"):
            small_config(**{"modem.bits_per_codeword": 5, "modem.bits_per_symbol": 4})
        with pytest.raises(ConfigError, match="unsupported order"):
            small_config(**{"modem.bits_per_symbol": 7, "modem.bits_per_codeword": 7})
        with pytest.raises(ConfigError, match="error_model"):
            small_config(error_model="telepathy")

    def test_missing_idx_files_reported(self):
        with pytest.raises(ConfigError, match="no such file"):
            small_config(
                **{
                    "training.dataset.source": "idx",
                    "training.dataset.train_images": "/nope/a.idx",
                    "training.dataset.train_labels": "/nope/b.idx",
                    "training.dataset.test_images": "/nope/c.idx",
                    "training.dataset.test_labels": "/nope/d.idx",
                }
            )

    def test_overrides(self):
        cfg = apply_overrides(
            ExperimentConfig(),
            ["selection.tr_ser=0.001", "selection.policy=no_selection", "seed=9"],
        )
        assert cfg.selection.tr_ser == 0.001
        assert cfg.selection.policy == "no_selection"
        assert cfg.seed == 9

    def test_override_unknown_field(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), ["selection.nope=1"])


class TestRunExperiment:
    def test_round_records_complete(self):
        cfg = small_config()
        result = run_experiment(cfg)
        assert len(result.records) == cfg.training.rounds
        for r in result.records:
            assert 0.0 <= r.test_accuracy <= 1.0
            assert r.ser.shape == (4,)
            assert set(np.asarray(r.accepted).tolist()) <= {0, 1}

    def test_deterministic_metrics_files(self, tmp_path):
        cfg = small_config()
        first = tmp_path / "a"
        second = tmp_path / "b"
        run_experiment(cfg, out_dir=first)
        run_experiment(cfg, out_dir=second)
        assert file_digest(first / "metrics.csv") == file_digest(second / "metrics.csv")

    def test_zero_threshold_excludes_lossy_device_every_round(self):
        cfg = small_config(
            **{"selection.tr_ser": 0.0, "channel.target_snr_db": 6.0}
        )
        result = run_experiment(cfg)
        assert np.any(result.link.ser > 0)
        lossy = result.link.ser > 0
        for r in result.records:
            assert np.all(np.asarray(r.accepted)[lossy] == 0)

    def test_all_rejected_keeps_model(self):
        cfg = small_config(
            **{
                "selection.tr_ser": 0.0,
                "channel.target_snr_db": -20.0,  # every device has nonzero SER
                "training.rounds": 2,
            }
        )
        result = run_experiment(cfg)
        assert all(r.event == "all_rejected" for r in result.records)
        assert result.summary["all_rejected_rounds"] == 2
        # the model never moves
        assert result.records[0].train_loss == result.records[1].train_loss

    def test_ser_override_forces_rates(self):
        cfg = small_config(ser_override=0.0)
        result = run_experiment(cfg)
        assert np.all(result.records[0].ser == 0.0)
        assert result.summary["total_symbol_errors"] == 0

    def test_huge_snr_underflows_to_exactly_zero_ser(self):
        # the analytic-injection no-error limit: every SER below the smallest
        # representable probability, so the run is exactly error-free
        cfg = small_config(**{"channel.target_snr_db": 400.0})
        result = run_experiment(cfg)
        assert np.all(result.link.ser == 0.0)
        assert result.summary["total_symbol_errors"] == 0

    def test_error_free_full_batch_loss_non_increasing(self):
        cfg = small_config(
            ser_override=0.0,
            **{
                "selection.policy": "no_selection",
                "modem.bits_per_codeword": 48,
                "modem.bits_per_symbol": 4,
                "training.learning_rate": 0.2,
                "training.rounds": 8,
            },
        )
        result = run_experiment(cfg)
        losses = [r.train_loss for r in result.records]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_full_detection_mode_runs(self):
        cfg = small_config(
            error_model="full_detection",
            **{"training.rounds": 2, "training.hidden_dim": 3},
        )
        result = run_experiment(cfg)
        assert len(result.records) == 2

    def test_rician_fading_config(self):
        cfg = small_config(**{"channel.rician_k_factor": 5.0, "training.rounds": 2})
        result = run_experiment(cfg)
        assert len(result.records) == 2
        # strong line-of-sight narrows the gain spread vs Rayleigh
        rayleigh = run_experiment(small_config(**{"training.rounds": 2}))
        assert not np.array_equal(result.link.sinr, rayleigh.link.sinr)

    def test_csv_layout(self, tmp_path):
        cfg = small_config()
        run_experiment(cfg, out_dir=tmp_path)
        lines = (tmp_path / "metrics.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + cfg.training.rounds
        header = lines[0].split(",")
        assert header[0] == "round"
        for name in ("ser_0", "sinr_3", "accepted_0", "codeword_errors_3"):
            assert name in header
        # every numeric cell is a plain parseable literal
        for line in lines[1:]:
            for cell in line.split(","):
                if cell and cell != "all_rejected":
                    float(cell)
        summary = json.loads((tmp_path / "metrics_summary.json").read_text())
        assert summary["rounds"] == cfg.training.rounds
        assert summary["config"]["seed"] == cfg.seed


class TestSweep:
    def test_single_value_sweep_equals_run(self, tmp_path):
        cfg = small_config()
        results, comparison = sweep(cfg, "tr_ser", [cfg.selection.tr_ser])
        direct = run_experiment(cfg)
        assert comparison[0]["final_test_accuracy"] == direct.summary["final_test_accuracy"]
        np.testing.assert_array_equal(results[0].params, direct.params)

    def test_swept_axis_only_changes_that_axis(self):
        cfg = small_config()
        results, _ = sweep(cfg, "modulation_order", [4, 64])
        a, b = results
        np.testing.assert_array_equal(
            a.config.seed, b.config.seed
        )
        # same placement and channels: identical link gains
        ca = build_channels(a.config)[2].coefficients
        cb = build_channels(b.config)[2].coefficients
        np.testing.assert_array_equal(ca, cb)
        assert a.config.modem.bits_per_symbol == 2
        assert b.config.modem.bits_per_symbol == 6

    def test_policy_axis(self):
        cfg = small_config()
        _, comparison = sweep(cfg, "policy", ["no_selection", "packet_error_baseline"])
        assert [row["value"] for row in comparison] == [
            "no_selection",
            "packet_error_baseline",
        ]

    def test_summary_file(self, tmp_path):
        cfg = small_config()
        sweep(cfg, "tr_ser", [0.1, 0.01], out_dir=tmp_path)
        summary = json.loads((tmp_path / "sweep_summary.json").read_text())
        assert summary["axis"] == "tr_ser"
        assert len(summary["members"]) == 2
        member_dirs = sorted(p.name for p in tmp_path.iterdir() if p.is_dir())
        assert member_dirs == ["tr_ser_0p01", "tr_ser_0p1"]

    def test_unknown_axis(self):
        with pytest.raises(ValueError):
            sweep(small_config(), "carrier", [1, 2])

    def test_empty_values(self):
        with pytest.raises(ValueError):
            sweep(small_config(), "tr_ser", [])


class TestValidateSer:
    def test_report_rows(self):
        rows = validate_ser(16, [12.0], num_symbols=20_000, seed=1)
        assert len(rows) == 1
        row = rows[0]
        assert row["order"] == 16
        assert 0 <= row["empirical_ser"] <= 1
        assert abs(row["z_score"]) < 5


class TestIdxSource:
    def test_env_var_resolves_relative_paths(self, tmp_path, monkeypatch):
        from tests.test_data import write_idx_images, write_idx_labels

        rng = np.random.default_rng(0)
        n_train, n_test, dim = 40, 20, 9
        write_idx_images(
            tmp_path / "train_x.idx",
            rng.integers(0, 256, size=(n_train, dim), dtype=np.uint8), 3, 3,
        )
        write_idx_labels(
            tmp_path / "train_y.idx", rng.integers(0, 3, size=n_train).astype(np.uint8)
        )
        write_idx_images(
            tmp_path / "test_x.idx",
            rng.integers(0, 256, size=(n_test, dim), dtype=np.uint8), 3, 3,
        )
        write_idx_labels(
            tmp_path / "test_y.idx", rng.integers(0, 3, size=n_test).astype(np.uint8)
        )
        monkeypatch.setenv("NOMA_FL_DATA_DIR", str(tmp_path))
        cfg = small_config(
            **{
                "training.dataset.source": "idx",
                "training.dataset.train_images": "train_x.idx",
                "training.dataset.train_labels": "train_y.idx",
                "training.dataset.test_images": "test_x.idx",
                "training.dataset.test_labels": "test_y.idx",
                "training.dataset.num_classes": 3,
                "training.rounds": 2,
            }
        )
        result = run_experiment(cfg)
        assert len(result.records) == 2

    def test_subset_size_limits_training_samples(self, tmp_path, monkeypatch):
        from noma_fl.experiment import prepare_data
        from tests.test_data import write_idx_images, write_idx_labels

        rng = np.random.default_rng(1)
        write_idx_images(
            tmp_path / "x.idx", rng.integers(0, 256, size=(50, 4), dtype=np.uint8), 2, 2
        )
        write_idx_labels(tmp_path / "y.idx", rng.integers(0, 2, size=50).astype(np.uint8))
        monkeypatch.setenv("NOMA_FL_DATA_DIR", str(tmp_path))
        cfg = small_config(
            **{
                "training.dataset.source": "idx",
                "training.dataset.train_images": "x.idx",
                "training.dataset.train_labels": "y.idx",
                "training.dataset.test_images": "x.idx",
                "training.dataset.test_labels": "y.idx",
                "training.dataset.subset_size": 24,
            }
        )
        shards, pooled, _ = prepare_data(cfg)
        assert pooled[0].shape[0] == 24
        assert sum(x.shape[0] for x, _ in shards) == 24
