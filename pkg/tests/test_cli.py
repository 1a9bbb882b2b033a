import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

SRC = str(Path(__file__).resolve().parent.parent / "src")


def run_cli(*args, env_extra=None):
    env = dict(os.environ)
    env["PYTHONPATH"] = SRC + os.pathsep + env.get("PYTHONPATH", "")
    if env_extra:
        env.update(env_extra)
    proc = subprocess.run(
        [sys.executable, "-m", "cheaptalk.cli", *args],
        capture_output=True, text=True, env=env,
    )
    record = None
    if proc.stdout.strip():
        record = json.loads(proc.stdout.strip().splitlines()[-1])
    return proc.returncode, record, proc.stderr


def write_config(tmp_path, name, config):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


@pytest.fixture
def classify_config(tmp_path):
    return write_config(tmp_path, "classify.json", {
        "source": {"family": "iid-uniform", "dim": 2, "lo": 0.0, "hi": 1.0},
        "bias": [1.0, -1.0],
    })


@pytest.fixture
def planted_config(tmp_path):
    return write_config(tmp_path, "planted.json", {
        "source": {"family": "iid-gaussian", "dim": 2, "sigma_sq": 1.0},
        "bias": [1.0, 0.0],
        "policy": {"kind": "quantizer", "actions": [[0.0, 0.0], [1.0, 0.0]]},
        "solver": {"samples": 40000},
    })


class TestExitCodes:
    def test_classify_exists_is_zero(self, classify_config):
        code, record, _ = run_cli("classify", "--config", classify_config)
        assert code == 0
        assert record["payload"]["exists"] == "yes"
        assert record["payload"]["theorem_case"] == "antisymmetric-bias"

    def test_classify_not_exists_is_one(self, tmp_path):
        cfg = write_config(tmp_path, "c.json", {
            "source": {"family": "iid-exponential", "dim": 2, "rate": 1.0},
            "bias": [1.0, 1.0],
        })
        code, record, _ = run_cli("classify", "--config", cfg)
        assert code == 1
        assert record["payload"]["exists"] == "no"

    def test_classify_correlated_gaussian(self, tmp_path):
        cfg = write_config(tmp_path, "corr.json", {
            "source": {"family": "correlated-gaussian-2d",
                        "sigma1_sq": 1.0, "sigma2_sq": 2.0, "rho": 2.0 / 3.0},
            "bias": [1.0, 2.0],
        })
        code, record, _ = run_cli("classify", "--config", cfg)
        assert code == 0
        assert record["payload"]["exists"] == "yes"
        assert abs(record["payload"]["evidence"]["eq_residual"]) < 1e-12
        # a failing condition is sufficient-only: undetermined, still exit 0
        cfg2 = write_config(tmp_path, "corr2.json", {
            "source": {"family": "correlated-gaussian-2d",
                        "sigma1_sq": 1.0, "sigma2_sq": 2.0, "rho": 0.0},
            "bias": [1.0, 1.0],
        })
        code2, record2, _ = run_cli("classify", "--config", cfg2)
        assert code2 == 0
        assert record2["payload"]["exists"] == "undetermined"

    def test_verification_failure_is_one(self, planted_config):
        code, record, _ = run_cli("verify", "--config", planted_config)
        assert code == 1
        assert record["payload"]["min_pairwise_geo_slack"] < 0

    def test_malformed_source_is_two_without_output(self, tmp_path):
        out = tmp_path / "records.jsonl"
        cfg = write_config(tmp_path, "bad.json", {
            "source": {"family": "not-a-family"},
            "bias": [1.0, 1.0],
            "output": {"records": str(out)},
        })
        code, record, err = run_cli("classify", "--config", cfg)
        assert code == 2
        assert record is None
        assert "source" in err or "family" in err
        assert not out.exists()

    def test_missing_config_is_two(self):
        code, _, _ = run_cli("classify", "--config", "/nonexistent/x.json")
        assert code == 2

    def test_numerical_failure_is_three(self, tmp_path):
        cfg = write_config(tmp_path, "k4.json", {
            "source": {"family": "iid-uniform", "dim": 1, "lo": 0.0, "hi": 1.0},
            "bias": [0.05],
            "solver": {"k": 4, "samples": 100000, "max_iterations": 300},
        })
        code, _, err = run_cli("solve", "--config", cfg)
        assert code == 3
        assert "bin" in err.lower() or "numerical" in err.lower()


class TestDeterminism:
    @pytest.mark.parametrize("command,config", [
        ("classify", {
            "source": {"family": "iid-gaussian", "dim": 2, "sigma_sq": 1.0},
            "bias": [1.0, 2.0],
        }),
        ("rd", {
            "rd": {"sigma_sq": 1.0, "b": 1.0, "d_team": 0.25,
                    "n_list": [4], "rate_bits": 1, "samples": 50000},
        }),
        ("transform", {"transform": {"kind": "bias-aligning", "bias": [3.0, 4.0, 0.0]}}),
    ])
    def test_payloads_byte_identical(self, tmp_path, command, config):
        cfg = write_config(tmp_path, "cfg.json", config)
        _, first, _ = run_cli(command, "--config", cfg)
        _, second, _ = run_cli(command, "--config", cfg)
        assert json.dumps(first["payload"], sort_keys=True) == json.dumps(
            second["payload"], sort_keys=True
        )
        assert first["config_hash"] == second["config_hash"]

    def test_verify_payload_byte_identical(self, planted_config):
        _, first, _ = run_cli("verify", "--config", planted_config)
        _, second, _ = run_cli("verify", "--config", planted_config)
        assert json.dumps(first["payload"], sort_keys=True) == json.dumps(
            second["payload"], sort_keys=True
        )


class TestSeedHandling:
    def test_env_seed_overrides_config(self, planted_config):
        _, record, _ = run_cli("verify", "--config", planted_config,
                               env_extra={"CHEAPTALK_SEED": "7"})
        assert record["payload"]["seed"] == 7

    def test_flag_overrides_env(self, planted_config):
        _, record, _ = run_cli("verify", "--config", planted_config, "--seed", "9",
                               env_extra={"CHEAPTALK_SEED": "7"})
        assert record["payload"]["seed"] == 9

    def test_dotted_override(self, planted_config):
        _, record, _ = run_cli("verify", "--config", planted_config,
                               "--solver.samples=20000")
        assert record["payload"]["samples"] == 20000

    def test_bad_env_seed_rejected(self, planted_config):
        code, _, _ = run_cli("verify", "--config", planted_config,
                             env_extra={"CHEAPTALK_SEED": "not-a-number"})
        assert code == 2


class TestOutputs:
    def test_solve_uniform(self, tmp_path):
        cfg = write_config(tmp_path, "solve.json", {
            "source": {"family": "iid-uniform", "dim": 1, "lo": 0.0, "hi": 1.0},
            "bias": [0.05],
            "solver": {"k": 3, "samples": 200000},
        })
        code, record, _ = run_cli("solve", "--config", cfg)
        assert code == 0
        actions = sorted(a[0] for a in record["payload"]["actions"])
        assert actions == pytest.approx([4 / 15, 0.7, 14 / 15], abs=5e-4)

    def test_record_file_written(self, tmp_path, classify_config):
        out = tmp_path / "records.jsonl"
        cfg = json.loads(Path(classify_config).read_text())
        cfg["output"] = {"records": str(out)}
        path = write_config(tmp_path, "c2.json", cfg)
        run_cli("classify", "--config", path)
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])["command"] == "classify"

    def test_rd_csv_schema(self, tmp_path):
        cfg = write_config(tmp_path, "rd.json", {
            "rd": {"sigma_sq": 1.0, "b": 1.0, "n_list": [4], "rate_bits": 1,
                    "samples": 50000},
        })
        csv_path = tmp_path / "table.csv"
        code, _, _ = run_cli("rd", "--config", cfg, "--csv", str(csv_path))
        assert code == 0
        header = csv_path.read_text().splitlines()[0]
        assert header == "n,R,Jd_emp,Jd_stderr,Je_emp,Je_stderr,Jd_exact"

    def test_transform_csv_matrix(self, tmp_path):
        cfg = write_config(tmp_path, "t.json", {
            "transform": {"kind": "pair2d", "bias": [1.0, 1.0]},
        })
        csv_path = tmp_path / "matrix.csv"
        run_cli("transform", "--config", cfg, "--csv", str(csv_path))
        rows = [line.split(",") for line in csv_path.read_text().strip().splitlines()]
        assert [[float(v) for v in row] for row in rows] == [[-1.0, 1.0], [1.0, 1.0]]

    def test_sweep_over_bin_counts(self, tmp_path):
        cfg = write_config(tmp_path, "sweep.json", {
            "source": {"family": "iid-uniform", "dim": 1, "lo": 0.0, "hi": 1.0},
            "bias": [0.05],
            "solver": {"k": 1, "samples": 50000},
            "sweep": {"command": "solve", "path": "solver.k", "values": [1, 2, 3]},
        })
        code, record, _ = run_cli("sweep", "--config", cfg)
        assert code == 0
        points = record["payload"]["points"]
        assert [p["value"] for p in points] == [1, 2, 3]
        assert all(p["payload"]["converged"] for p in points)

    def test_reveal_quantize_verify_passes(self, tmp_path):
        cfg = write_config(tmp_path, "rq.json", {
            "source": {"family": "iid-gaussian", "dim": 2, "sigma_sq": 1.0},
            "bias": [1.0, 1.0],
            "policy": {"kind": "reveal-quantize", "k_last": 2},
            "solver": {"samples": 150000},
        })
        code, record, _ = run_cli("verify", "--config", cfg)
        assert code == 0
        assert record["payload"]["passed"] is True
        assert record["payload"]["policy_kind"] == "linear-plus-quantizer"
