"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical divergence,
3 self-test failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..envs import ScenarioError
from ..mappo import DivergenceError
from .checkpoint import CheckpointError
from .config import ConfigError, load_config
from .evaluation import run_evaluation
from .report import emit_report, load_reports
from .selftest import run_selftest
from .trainer import train

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_ORACLE = 0, 1, 2, 3


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.variant:
        cfg = cfg.with_variant(args.variant)
    out = Path(args.out)
    res = train(cfg, args.seed, out, max_env_steps=args.max_steps)
    print(json.dumps({"variant": cfg.variant, "seed": args.seed, "env_steps": res.env_steps,
                      "final_smoothed_reward": float(res.smoothed[-1]),
                      "checkpoint": str(out / f"{cfg.variant}_seed{args.seed}.npz")}))
    return EXIT_OK


def _cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    out = Path(args.out) if args.out else ckpt.parent
    stem = ckpt.stem
    traj = out / f"{stem}_trajectory.csv" if args.trajectory else None
    rep = run_evaluation(ckpt, scenario_path=args.scenario, episodes=args.episodes,
                         num_agents=args.agents, horizon=args.horizon, trajectory_path=traj)
    if "greedy_team_value" in rep.meta:
        print(json.dumps({"variant": rep.variant, "greedy_team_value": rep.meta["greedy_team_value"]}))
        return EXIT_OK
    rep.write_csv(out / f"{stem}_metrics.csv")
    print(json.dumps({"variant": rep.variant, **rep.summary}))
    return EXIT_OK


def _cmd_report(args) -> int:
    paths = emit_report(load_reports(args.inputs), args.out or args.inputs, plots=not args.no_plots)
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    checks = run_selftest(args.seed)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xpmarl", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one (variant, seed) cell")
    t.add_argument("--config", required=True)
    t.add_argument("--variant", help="override the config's variant (M1..M5 or full name)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="runs")
    t.add_argument("--max-steps", type=int, default=None, help="stop after this many env steps")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint with greedy policies")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--scenario", default=None, help="evaluation scenario file (default: from config)")
    e.add_argument("--episodes", type=int, default=None)
    e.add_argument("--agents", type=int, default=None)
    e.add_argument("--horizon", type=int, default=None)
    e.add_argument("--out", default=None)
    e.add_argument("--trajectory", action="store_true", help="also write the per-step trajectory log")
    e.set_defaults(func=_cmd_eval)

    r = sub.add_parser("report", help="compare metrics CSVs across variants")
    r.add_argument("--inputs", required=True)
    r.add_argument("--out", default=None)
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=_cmd_report)

    s = sub.add_parser("selftest", help="gradient checks and estimator oracles")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
