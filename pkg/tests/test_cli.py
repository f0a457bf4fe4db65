import numpy as np
import pytest

from opo_lab import cli
from opo_lab.environments import make_env
from opo_lab.harness import (
    METRIC_COLUMNS,
    SuiteFailure,
    compare_runs,
    read_csv,
    window,
    write_csv,
)
from opo_lab.trainer import TrainConfig


def body(path):
    return path.read_bytes()


def manifest(path):
    return dict(line.split(" = ", 1) for line in (path / "manifest").read_text().splitlines())


def test_dynamics_contract(tmp_path):
    out = tmp_path / "d1"
    assert cli.main(["dynamics", "--mu", "1.0", "--eta", "0.5", "--out", str(out)]) == 0
    for name in ("contraction_trace.csv", "hessian_probe.csv", "saturation_profile.csv"):
        assert (out / name).exists()
    m = manifest(out)
    assert m["status"] == "ok" and m["config.eta"] == "0.5"
    header, rows = read_csv(out / "contraction_trace.csv")
    assert header == ["step", "distance", "rate", "theoretical_rate"]
    assert rows[1][2] == pytest.approx(0.5, abs=1e-9)


def test_bounds_contract(tmp_path):
    out = tmp_path / "b"
    assert cli.main(["bounds", "--trials", "200", "--seed", "42", "--out", str(out)]) == 0
    for name in ("log_approx_bounds.csv", "tv_chi2_bounds.csv", "dual_equivalence.csv"):
        assert (out / name).exists()
    _, rows = read_csv(out / "tv_chi2_bounds.csv")
    assert len(rows) == 200 and min(r[2] for r in rows) >= -1e-12


def test_train_contract_and_determinism(tmp_path):
    argv = ["train", "--algo", "opo", "--env", "bandit10", "--alpha", "0.6", "--mu", "1.0",
            "--eta", "0.05", "--steps", "400", "--rollouts", "6", "--seed", "7"]
    assert cli.main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(argv + ["--out", str(tmp_path / "b")]) == 0
    lines = (tmp_path / "a" / "metrics.csv").read_text().splitlines()
    assert lines[0] == "step,mean_reward,grad_norm,entropy,chi2_to_ref,kl_to_ref,tv_to_ref,loss"
    assert len(lines) == 401
    assert body(tmp_path / "a" / "metrics.csv") == body(tmp_path / "b" / "metrics.csv")
    assert manifest(tmp_path / "a")["config.anchor"] == "onpolicy"


def test_rerun_bounds_byte_identical(tmp_path):
    for d in ("x", "y"):
        assert cli.main(["bounds", "--trials", "50", "--seed", "3", "--out", str(tmp_path / d)]) == 0
    for name in ("log_approx_bounds.csv", "tv_chi2_bounds.csv", "dual_equivalence.csv"):
        assert body(tmp_path / "x" / name) == body(tmp_path / "y" / name)


@pytest.mark.parametrize("argv", [
    ["launch"],
    ["train", "--bogus", "1"],
    ["train", "--algo", "ppo"],
    ["bounds", "--alpha", "0.5"],
    ["compare", "--algo", "opo", "--seed", "1"],
    ["compare", "--algo", "opo,ppo"],
])
def test_usage_errors_exit_2(tmp_path, capsys, argv):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2
    assert "usage" in capsys.readouterr().err


def test_assertion_failure_exits_1(tmp_path, monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise SuiteFailure("forced")

    monkeypatch.setattr(cli, "run_dynamics_suite", broken)
    assert cli.main(["dynamics", "--out", str(tmp_path)]) == 1
    assert "forced" in capsys.readouterr().err
    assert manifest(tmp_path)["status"] == "failed"


def test_config_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# shorter run\nsteps = 12\neta = 0.2   # trailing comment\n")
    out = tmp_path / "t"
    assert cli.main(["train", "--config", str(conf), "--eta", "0.3", "--out", str(out)]) == 0
    m = manifest(out)
    assert m["config.steps"] == "12"
    assert m["config.eta"] == "0.3"
    assert m["config.mu"] == "1.0"
    assert len((out / "metrics.csv").read_text().splitlines()) == 13


def test_config_file_unknown_key(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("tau = 0.5\n")
    assert cli.main(["train", "--config", str(conf), "--out", str(tmp_path)]) == 2


def test_env_var_sets_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("OPO_LAB_OUT", str(tmp_path / "from_env"))
    assert cli.main(["train", "--steps", "3"]) == 0
    assert (tmp_path / "from_env" / "metrics.csv").exists()


def test_compare_four_algorithms(tmp_path):
    out = tmp_path / "c"
    assert cli.main(["compare", "--env", "bandit10", "--steps", "50", "--seed", "7", "--out", str(out)]) == 0
    header, rows = read_csv(out / "summary.csv")
    assert header[:4] == ["algo", "mean_reward_final20", "grad_norm_final20", "entropy_final"]
    assert [r[0] for r in rows] == ["opo", "grpo", "dpo", "l2pg"]
    for algo in ("opo", "grpo", "dpo", "l2pg"):
        assert (out / "runs" / f"{algo}_s7" / "metrics.csv").exists()
        assert (out / "plotdata" / f"grad_norm_{algo}.csv").exists()
    artifacts = [v for k, v in (l.split(" = ", 1) for l in (out / "manifest").read_text().splitlines())
                 if k == "artifact"]
    assert "summary.csv" in artifacts


def test_compare_needs_two(tmp_path):
    with pytest.raises(ValueError):
        compare_runs([TrainConfig(steps=2)], make_env("bandit10"), tmp_path)


def test_compare_abort_writes_partial_manifest(tmp_path, monkeypatch):
    from opo_lab import harness
    calls = []
    real = harness.run_training

    def flaky(env, cfg):
        calls.append(cfg)
        if len(calls) == 2:
            raise RuntimeError("boom")
        return real(env, cfg)

    monkeypatch.setattr(harness, "run_training", flaky)
    with pytest.raises(RuntimeError):
        compare_runs([TrainConfig(steps=3), TrainConfig(algo="grpo", steps=3)], make_env("bandit10"), tmp_path)
    m = manifest(tmp_path)
    assert m["status"] == "aborted" and m["config.completed"] == "opo_s7"


def test_final_window_arithmetic():
    w = window(400)
    assert w == 80
    assert list(range(1, 401))[-w:][0] == 321


def test_csv_is_plain(tmp_path):
    p = write_csv(tmp_path / "x.csv", ("a", "b"), [(1, 0.1), (2, float("nan"))])
    assert p.read_text() == "a,b\n1,0.1\n2,nan\n"
    assert not list(tmp_path.glob(".*tmp"))
    assert METRIC_COLUMNS == ("step", "mean_reward", "grad_norm", "entropy",
                              "chi2_to_ref", "kl_to_ref", "tv_to_ref", "loss")
