import copy
import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from dfrcsim import cli
from dfrcsim.experiment import (
    ConfigError,
    EXPERIMENT_SCHEMA,
    RESULT_CSV_DROP,
    cell_channel_seed,
    cell_init_seed,
    derive_seed,
    emit_beampattern,
    load_spec,
    run_experiment,
    spec_from_dict,
    summarize,
    write_csv,
    write_manifest,
)
from dfrcsim.model import SystemConfig, steering_vector
from dfrcsim.metrics import stack_columns

FAST_DOC = {
    "system": {"num_tx_antennas": 8, "num_rx_antennas": 4,
               "num_tx_rf_chains": 2, "num_rx_rf_chains": 2,
               "num_users": 2, "num_user_antennas": 2, "streams_per_user": 1,
               "tx_power_dbm": 40.0, "user_noise_dbm": -90.0,
               "radar_noise_dbm": 20.0},
    "scene": {"target_deg": 0.0, "clutter_deg": [-30.0, 30.0],
              "target_power_db": 10.0, "clutter_power_db": 20.0},
    "channel": {"distance_m": 80.0, "num_paths": 3},
    "sweep": {"variable": "gamma_db", "values": [10.0]},
    "run": {"architectures": ["RS"], "trials": 1, "master_seed": 11,
            "pfa_grid": [1e-6]},
}


def fast_doc(**overrides):
    doc = copy.deepcopy(FAST_DOC)
    for key, value in overrides.items():
        if isinstance(value, dict) and key in doc:
            doc[key].update(value)
        else:
            doc[key] = value
    return doc


def write_yaml(tmp_path, doc, name="spec.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


class TestSpecLoading:
    def test_load_and_defaults(self, tmp_path):
        spec = load_spec(write_yaml(tmp_path, fast_doc()))
        assert spec.base_cfg.M_T == 8
        assert spec.base_cfg.P_T == pytest.approx(10.0)
        assert spec.base_cfg.sigma2_user == pytest.approx(1e-12)
        assert spec.scene.num_clutter == 2
        assert spec.gamma_db == 10.0
        assert len(spec.config_sha256) == 64

    def test_unknown_key_rejected(self, tmp_path):
        doc = fast_doc()
        doc["system"]["bogus"] = 1
        with pytest.raises(ConfigError, match="bogus"):
            load_spec(write_yaml(tmp_path, doc))

    def test_missing_required_rejected(self, tmp_path):
        doc = fast_doc()
        del doc["run"]["trials"]
        with pytest.raises(ConfigError):
            load_spec(write_yaml(tmp_path, doc))

    def test_bad_yaml_rejected(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("run: [unclosed")
        with pytest.raises(ConfigError):
            load_spec(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_spec(tmp_path / "nope.yaml")

    def test_invalid_sweep_configuration_rejected(self):
        doc = fast_doc(sweep={"variable": "num_users", "values": [1, 7]})
        with pytest.raises(ConfigError, match="sweep value"):
            spec_from_dict(doc)

    def test_schema_is_draft_2020(self):
        assert EXPERIMENT_SCHEMA["$schema"].endswith("2020-12/schema")


class TestSeedDerivation:
    def test_distinct_across_cells(self):
        seeds = {derive_seed(1, s, a, t, "init")
                 for s in range(3) for a in ("RS", "PC") for t in range(4)}
        assert len(seeds) == 24

    def test_channel_seed_ignores_architecture(self):
        spec = spec_from_dict(fast_doc())
        assert cell_channel_seed(spec, 0, 2) == cell_channel_seed(spec, 0, 2)
        assert cell_init_seed(spec, 0, "RS", 2) != cell_init_seed(spec, 0, "PC", 2)

    def test_documented_hash(self):
        import hashlib

        key = "5:1:RS:2:init".encode()
        expected = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
        assert derive_seed(5, 1, "RS", 2, "init") == expected


@pytest.fixture(scope="module")
def fast_rows():
    spec = spec_from_dict(fast_doc())
    return spec, run_experiment(spec)


class TestRunExperiment:
    def test_row_schema(self, fast_rows):
        spec, rows = fast_rows
        assert len(rows) == 1
        row = rows[0]
        assert row["feasible"] == 1
        assert row["sum_rate_bps_hz"] > 0
        assert row["scnr_constraint"] >= 10.0 * (1 - 1e-4)
        assert 0 <= row["pd_at_pfa_1e-06"] <= 1
        assert row["power_w"] > 0

    def test_byte_identical_rerun(self, tmp_path, fast_rows):
        spec, rows1 = fast_rows
        rows2 = run_experiment(spec)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(rows1, p1, drop=RESULT_CSV_DROP)
        write_csv(rows2, p2, drop=RESULT_CSV_DROP)
        assert p1.read_bytes() == p2.read_bytes()

    def test_architecture_order_irrelevant(self):
        doc_a = fast_doc(run={"architectures": ["RS", "PC"]})
        doc_b = fast_doc(run={"architectures": ["PC", "RS"]})
        rows_a = run_experiment(spec_from_dict(doc_a))
        rows_b = run_experiment(spec_from_dict(doc_b))
        by_arch_a = {r["architecture"]: r for r in rows_a}
        by_arch_b = {r["architecture"]: r for r in rows_b}
        for arch in ("RS", "PC"):
            ra, rb = by_arch_a[arch], by_arch_b[arch]
            assert ra["sum_rate_bps_hz"] == rb["sum_rate_bps_hz"]
            assert ra["channel_seed"] == rb["channel_seed"]

    def test_infeasible_trial_flagged_not_fatal(self):
        doc = fast_doc(run={"gamma_db": 90.0, "architectures": ["RS"]})
        doc["sweep"] = {"variable": "pt_dbm", "values": [40.0]}
        rows = run_experiment(spec_from_dict(doc))
        assert len(rows) == 1
        assert rows[0]["feasible"] == 0
        assert rows[0]["status"] == "infeasible_gamma"
        assert math.isnan(rows[0]["sum_rate_bps_hz"])

    def test_summary_aggregation(self, fast_rows):
        spec, rows = fast_rows
        summary = summarize(spec, rows)
        assert len(summary) == 1
        assert summary[0]["feasible_trials"] == 1
        assert summary[0]["sum_rate_bps_hz_mean"] == rows[0]["sum_rate_bps_hz"]
        assert summary[0]["sum_rate_bps_hz_std"] == 0.0

    def test_manifest(self, tmp_path, fast_rows):
        spec, rows = fast_rows
        path = tmp_path / "run.manifest.json"
        write_manifest(spec, rows, path)
        doc = json.loads(path.read_text())
        assert doc["master_seed"] == 11
        assert doc["infeasible_trials"] == 0
        assert doc["total_wall_time_s"] > 0

    def test_threaded_matches_serial(self, fast_rows):
        spec, rows = fast_rows
        doc = fast_doc(run={"trials": 2, "architectures": ["RS"]})
        spec2 = spec_from_dict(doc)
        serial = run_experiment(spec2, threads=1)
        parallel = run_experiment(spec2, threads=2)
        assert [r["sum_rate_bps_hz"] for r in serial] == \
            [r["sum_rate_bps_hz"] for r in parallel]


class TestBeampatternEmission:
    def test_matched_filter_file(self, tmp_path):
        cfg = SystemConfig(M_T=8, M_R=8, N_RF_t=2, N_RF_r=2, K=1, M_U=2, d_s=1)
        a_t = steering_vector(0.3, cfg.M_T, cfg)
        a_r = steering_vector(0.3, cfg.M_R, cfg)
        t = stack_columns(a_t.conj()[:, None])
        w = stack_columns(a_r[:, None])
        path = tmp_path / "bp.csv"
        pattern = emit_beampattern(w, t, cfg, path, step_deg=0.5)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 361 == len(pattern)
        angles = np.array([float(r["angle_deg"]) for r in rows])
        powers = np.array([float(r["power_db"]) for r in rows])
        assert abs(angles[np.argmax(powers)] - math.degrees(0.3)) <= 1.0
        assert powers.max() == pytest.approx(0.0, abs=1e-9)

    def test_bad_step_rejected(self, tmp_path):
        cfg = SystemConfig(M_T=8, M_R=8, N_RF_t=2, N_RF_r=2, K=1, M_U=2, d_s=1)
        with pytest.raises(ValueError):
            emit_beampattern(np.ones(cfg.M_R), np.ones(cfg.M_T), cfg,
                             tmp_path / "x.csv", step_deg=0.0)


class TestCli:
    def test_validate_ok(self, tmp_path, capsys):
        path = write_yaml(tmp_path, fast_doc())
        assert cli.main(["validate", str(path)]) == 0
        assert "spec OK" in capsys.readouterr().out

    def test_validate_bad_spec_exit_2(self, tmp_path, capsys):
        doc = fast_doc()
        doc["run"]["architectures"] = ["XX"]
        path = write_yaml(tmp_path, doc)
        with pytest.raises(SystemExit) as exc:
            cli.main(["validate", str(path)])
        assert exc.value.code == 2

    def test_run_writes_outputs(self, tmp_path):
        doc = fast_doc()
        path = write_yaml(tmp_path, doc)
        out = tmp_path / "out" / "res"
        code = cli.main(["run", str(path), "--out", str(out), "--trials", "1"])
        assert code == 0
        assert (tmp_path / "out" / "res.csv").exists()
        assert (tmp_path / "out" / "res_summary.csv").exists()
        assert (tmp_path / "out" / "res.manifest.json").exists()
        fig = tmp_path / "out" / "res.png"
        assert fig.exists() and fig.stat().st_size > 0
        with open(tmp_path / "out" / "res.csv") as fh:
            header = fh.readline().strip().split(",")
        assert "wall_time_s" not in header
        assert header[0] == "schema_version"

    def test_run_strict_exit_3_on_infeasible(self, tmp_path):
        doc = fast_doc(run={"gamma_db": 90.0})
        doc["sweep"] = {"variable": "pt_dbm", "values": [40.0]}
        path = write_yaml(tmp_path, doc)
        out = tmp_path / "res"
        code = cli.main(["run", str(path), "--strict", "--out", str(out),
                         "--no-figures"])
        assert code == 3

    def test_seed_override_changes_results(self, tmp_path):
        path = write_yaml(tmp_path, fast_doc())
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert cli.main(["run", str(path), "--out", str(out1), "--seed", "1",
                         "--no-figures"]) == 0
        assert cli.main(["run", str(path), "--out", str(out2), "--seed", "2",
                         "--no-figures"]) == 0
        assert Path(str(out1) + ".csv").read_bytes() != \
            Path(str(out2) + ".csv").read_bytes()

    def test_beampattern_command(self, tmp_path):
        doc = fast_doc()
        doc["beampattern"] = {"grid_step_deg": 1.0, "gamma_db": 12.0}
        path = write_yaml(tmp_path, doc)
        out = tmp_path / "bp"
        code = cli.main(["beampattern", str(path), "--out", str(out)])
        assert code == 0
        assert (tmp_path / "bp_rs.csv").exists()
        fig = Path(str(out) + ".png")
        assert fig.exists() and fig.stat().st_size > 0
