import csv
from pathlib import Path

import numpy as np
import pytest

from xpmarl.envs import GridTraffic
from xpmarl.harness import ConfigError, ExperimentConfig, load_config, save_config, smooth, train, wire_variant
from xpmarl.harness import cli
from xpmarl.harness.checkpoint import CheckpointError
from xpmarl.harness.evaluation import MetricsReport, evaluate_pipeline, run_evaluation
from xpmarl.harness.experiment import run_cell
from xpmarl.harness.pipeline import make_env, seed_streams
from xpmarl.harness.recount import recount
from xpmarl.harness.report import change, comparison_rows, emit_report, improvement
from xpmarl.mappo import DivergenceError, PPOConfig
from xpmarl.propagation import NoiseSpec

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_traffic(variant="M1", **kw):
    base = dict(variant=variant, env="grid_traffic", train_episodes=3, train_horizon=40,
                eval_episodes=2, eval_horizon=30, eval_agents=5,
                ppo=PPOConfig(rollout=64, minibatch=32, epochs=2, hidden=(16,)))
    base.update(kw)
    return ExperimentConfig(**base)


# -- smoothing and report arithmetic --------------------------------------------

def test_smoothing_examples():
    np.testing.assert_array_equal(smooth([3.0] * 8), [3.0] * 8)
    assert smooth([0, 0, 0, 0, 5])[-1] == 1.0
    np.testing.assert_allclose(smooth([1, 2, 3, 4, 5, 6]), [1, 1.5, 2, 2.5, 3, 4])


def test_improvement_formula():
    assert improvement(0.02, 0.01) == 50.0
    assert improvement(0.0109, 0.0017) == pytest.approx(84.4, abs=0.05)
    assert improvement(0.3, 0.3) == 0.0
    assert improvement(0.0, 0.0) == 0.0
    assert change(0.5, 0.6) == pytest.approx(20.0)


def _report(variant, coll, speed):
    return MetricsReport(variant, list(range(len(coll))), np.array(coll), np.array(speed))


def test_report_self_comparison_is_zero(tmp_path):
    rows = comparison_rows([_report("M2_vanilla", [0.1, 0.2, 0.3], [0.5, 0.6, 0.7])])
    assert all(r["vs_baseline_pct"] == 0.0 for r in rows)
    paths = emit_report([_report("M2_vanilla", [0.1, 0.2], [0.5, 0.6]),
                         _report("M1_xp", [0.05, 0.1], [0.6, 0.7])], tmp_path)
    assert [p.name for p in paths] == ["comparison.csv", "collision_rate.png", "relative_average_speed.png"]
    rows = list(csv.DictReader(open(paths[0])))
    m1 = next(r for r in rows if r["variant"] == "M1_xp" and r["metric"] == "collision_rate")
    assert float(m1["vs_baseline_pct"]) == pytest.approx(50.0)


def test_report_requires_input():
    with pytest.raises(ValueError):
        comparison_rows([])


# -- configuration ----------------------------------------------------------------

def test_config_roundtrip(tmp_path):
    cfg = load_config(CONFIGS / "grid_traffic.yaml")
    save_config(cfg, tmp_path / "c.yaml")
    again = load_config(tmp_path / "c.yaml")
    assert again.digest() == cfg.digest()


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(variant="M9")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"variant": "M1", "episodes": 3})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema_version": 2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"noise": {"variance_fraction": -1}})
    bad = tmp_path / "bad.yaml"
    bad.write_text("- not a mapping\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_variant_aliases():
    assert ExperimentConfig(variant="m3").variant == "M3_opponent_model"
    assert ExperimentConfig(variant="M5_noisy_comm").variant == "M5_noisy_comm"


# -- variant wiring ------------------------------------------------------------------

@pytest.mark.parametrize("variant,has_priority", [("M1", True), ("M2", False), ("M3", False),
                                                 ("M4", False), ("M5", True)])
def test_wiring(variant, has_priority):
    cfg = small_traffic(variant)
    env = make_env(cfg)
    pipe = wire_variant(cfg, env, seed_streams(0))
    assert (pipe.priority is not None) == has_priority
    assert pipe.uses_rank == (variant in ("M1", "M4", "M5"))
    assert (pipe.noise is not None) == (variant == "M5")


def test_variants_share_architecture():
    archs = set()
    for v in ("M1", "M2", "M3", "M4", "M5"):
        cfg = small_traffic(v)
        pipe = wire_variant(cfg, make_env(cfg), seed_streams(0))
        archs.add(repr(pipe.decision.architecture()))
    assert len(archs) == 1


def test_m4_priority_never_trained_rank_random():
    cfg = small_traffic("M4")
    env = make_env(cfg)
    pipe = wire_variant(cfg, env, seed_streams(0))
    streams = seed_streams(1)
    obs = env.reset(0)
    ranks = {tuple(pipe.decide(obs, env.observable_sets(2), streams).rank) for _ in range(40)}
    assert len(ranks) > 5


def test_m5_zero_noise_bit_identical_to_m1(tmp_path):
    paths = []
    for v, noise in (("M1", NoiseSpec(0.1)), ("M5", NoiseSpec(0.0))):
        cfg = small_traffic(v, noise=noise)
        path = tmp_path / f"{v}.csv"
        res, _ = run_cell(cfg, 4, trajectory_path=path)
        paths.append((path, res.pipeline.decision.digest()))
    assert paths[0][1] == paths[1][1]
    assert paths[0][0].read_bytes() == paths[1][0].read_bytes()


# -- training, persistence, evaluation --------------------------------------------

def test_training_curve_deterministic(tmp_path):
    cfg = small_traffic("M1")
    train(cfg, 2, tmp_path / "a")
    train(cfg, 2, tmp_path / "b")
    a = (tmp_path / "a" / "M1_xp_seed2_curve.csv").read_bytes()
    b = (tmp_path / "b" / "M1_xp_seed2_curve.csv").read_bytes()
    assert a == b
    rows = list(csv.DictReader(open(tmp_path / "a" / "M1_xp_seed2_curve.csv")))
    assert len(rows) == 3 and set(rows[0]) == {"episode", "env_steps", "mean_reward", "smoothed_reward"}


def test_checkpoint_roundtrip_and_eval(tmp_path):
    cfg = small_traffic("M5")
    res = train(cfg, 0, tmp_path)
    ckpt = tmp_path / "M5_noisy_comm_seed0.npz"
    direct = evaluate_pipeline(res.pipeline, make_env(cfg, training=False), [7, 8], 30)
    rep = run_evaluation(ckpt, episodes=2, trajectory_path=tmp_path / "t.csv")
    assert rep.variant == "M5_noisy_comm"
    assert rep.collision_rate.shape == (2,)
    direct2 = run_evaluation(ckpt, episodes=2)
    np.testing.assert_array_equal(rep.collision_rate, direct2.collision_rate)
    assert direct.collision_rate.shape == (2,)


def test_checkpoint_dimension_mismatch(tmp_path):
    cfg = small_traffic("M2")
    train(cfg, 0, tmp_path)
    other = cfg.with_variant("M2", k_obs=3)
    with pytest.raises(CheckpointError):
        run_evaluation(tmp_path / "M2_vanilla_seed0.npz", cfg=other)


def test_recount_matches_report(tmp_path):
    cfg = small_traffic("M3")
    path = tmp_path / "traj.csv"
    _, rep = run_cell(cfg, 1, trajectory_path=path)
    rc = recount(path, GridTraffic().dyn.v_max)
    for s, c, v in zip(rep.episode_seeds, rep.collision_rate, rep.relative_average_speed):
        assert abs(rc[s]["collision_rate"] - c) <= 1e-12
        assert abs(rc[s]["relative_average_speed"] - v) <= 1e-12


class _Scripted:
    """Stand-in pipeline with fixed actions."""

    variant = "scripted"
    k_obs = 2

    def __init__(self, actions):
        self._a = actions

    def decide(self, obs, sets, streams, deterministic=False):
        from xpmarl.harness.pipeline import StepDecision
        from xpmarl.propagation import DecisionStep

        n = obs.shape[0]
        dec = DecisionStep(self._a.copy(), self._a.copy(), np.zeros(n), obs,
                           [[] for _ in range(n)], [{} for _ in range(n)], np.zeros(n, bool))
        return StepDecision(None, None, None, None, dec)


class _PinnedTraffic(GridTraffic):
    def reset(self, seed):
        super().reset(seed)
        st = self.state.copy()
        st.lane[:] = 0
        st.s[:] = [1.0, 1.0 + self.dyn.radius, 1.0 + 2 * self.dyn.radius]
        st.v[:] = 0.0
        self.set_state(st)
        return self.observe()


def test_scripted_colliding_and_stationary_metrics():
    env = _PinnedTraffic(num_agents=3, horizon=20)
    stop = np.tile([-env.dyn.a_max, 0.0], (3, 1))
    rep = evaluate_pipeline(_Scripted(stop), env, [0, 1], 20)
    np.testing.assert_array_equal(rep.collision_rate, [1.0, 1.0])
    np.testing.assert_array_equal(rep.relative_average_speed, [0.0, 0.0])


def test_nav_game_checkpoint_eval(tmp_path):
    cfg = load_config(CONFIGS / "nav_game.yaml").with_variant("M1", train_episodes=300)
    train(cfg, 0, tmp_path)
    rep = run_evaluation(tmp_path / "M1_xp_seed0.npz")
    assert rep.meta["greedy_team_value"] in (-10.0, 5.0, 10.0)


# -- command line -----------------------------------------------------------------

def test_cli_train_eval_report(tmp_path, capsys):
    cfg = small_traffic("M2")
    cpath = tmp_path / "c.yaml"
    save_config(cfg, cpath)
    out = tmp_path / "runs"
    assert cli.main(["train", "--config", str(cpath), "--seed", "1", "--out", str(out)]) == 0
    assert cli.main(["train", "--config", str(cpath), "--variant", "M4", "--seed", "1", "--out", str(out)]) == 0
    for name in ("M2_vanilla_seed1.npz", "M4_random_priority_seed1.npz"):
        assert cli.main(["eval", "--checkpoint", str(out / name), "--episodes", "2", "--trajectory"]) == 0
    assert cli.main(["report", "--inputs", str(out), "--no-plots"]) == 0
    assert (out / "comparison.csv").exists()
    assert (out / "M4_random_priority_seed1_trajectory.csv").exists()


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert cli.main(["train", "--config", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("variant: M7\n")
    assert cli.main(["train", "--config", str(bad)]) == cli.EXIT_CONFIG

    cfg = small_traffic("M2")
    save_config(cfg, tmp_path / "c.yaml")

    def diverge(*a, **k):
        raise DivergenceError("boom", {"value_loss": float("nan")})

    monkeypatch.setattr(cli, "train", diverge)
    assert cli.main(["train", "--config", str(tmp_path / "c.yaml")]) == cli.EXIT_DIVERGENCE

    from xpmarl.harness.selftest import Check

    monkeypatch.setattr(cli, "run_selftest", lambda seed: [Check("x", 1.0, 0.5)])
    assert cli.main(["selftest"]) == cli.EXIT_ORACLE
    monkeypatch.setattr(cli, "run_selftest", lambda seed: [Check("x", 0.1, 0.5)])
    assert cli.main(["selftest"]) == cli.EXIT_OK
