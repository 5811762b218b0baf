"""Command-line front end.

Subcommands: simulate, rate-test-s, rate-test-theta, replay,
gen-replay-data.  A JSON config file supplies any experiment field; command
line flags override it.  All outputs are plot-ready CSV/JSON and depend only
on the config and seed, so a rerun reproduces them byte for byte (wall-clock
timing goes to stderr only).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .harness import (
    ExperimentConfig,
    estimate_slope,
    rate_test_s,
    rate_test_theta,
    run_simulation,
    default_market,
    write_checkpoint_csv,
    write_summary_json,
    write_trace_csv,
)
from .replay import generate_replay_csv, run_replay

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antitonic-pricing",
        description="Shape-constrained contextual dynamic pricing experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--reps", type=int, help="number of replications")
        p.add_argument("--horizon", type=int, help="total number of rounds")
        p.add_argument("--tau1", type=int, help="first episode length")
        p.add_argument("--alpha", type=float, help="smoothness exponent in (0, 1]")
        p.add_argument("--noise", type=str, help="noise family name")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--checkpoint-every", type=int, help="extra checkpoint spacing")
        p.add_argument("--policy", type=str, help="antitonic | uniform_random | clairvoyant")

    for name in ("simulate", "rate-test-s", "rate-test-theta", "replay"):
        p = sub.add_parser(name)
        add_common(p)
    sub.choices["replay"].add_argument("--replay-csv", type=Path, help="input data file")

    gen = sub.add_parser("gen-replay-data")
    gen.add_argument("--out", type=Path, required=True, help="output CSV path")
    gen.add_argument("--rows", type=int, default=3000)
    gen.add_argument("--seed", type=int, default=0)
    return parser


_FLAG_TO_FIELD = {
    "seed": "seed",
    "reps": "replications",
    "horizon": "horizon",
    "tau1": "tau1",
    "alpha": "alpha",
    "noise": "noise",
    "checkpoint_every": "checkpoint_every",
    "policy": "policy",
    "replay_csv": "replay_csv",
}


def load_config(args, mode: str) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        with open(args.config) as fh:
            data = json.load(fh)
    data["mode"] = mode
    for flag, fieldname in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[fieldname] = str(value) if fieldname == "replay_csv" else value
    if args.out is not None:
        data["out_dir"] = str(args.out)
    return ExperimentConfig.from_dict(data)


def _out_dir(cfg: ExperimentConfig) -> Path:
    if cfg.out_dir is None:
        raise SystemExit("an output directory is required (--out or out_dir in config)")
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_simulate(cfg: ExperimentConfig) -> None:
    out = _out_dir(cfg)
    result = run_simulation(cfg)
    for r, trace in enumerate(result.traces):
        write_trace_csv(out / f"rep_{r:03d}.csv", trace)
    write_checkpoint_csv(out / "summary.csv", result.checkpoints)
    write_summary_json(
        out / "summary.json",
        {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "replications": cfg.replications,
            "horizon": cfg.horizon,
            "policy": cfg.policy,
            "noise": cfg.noise,
            "episodes": result.schedule.K,
            "slope": result.slope,
            "slope_stderr": result.slope_stderr,
            "mean_final_regret": result.checkpoints[-1].mean,
        },
    )


def _cmd_rate_s(cfg: ExperimentConfig) -> None:
    out = _out_dir(cfg)
    noise = default_market(cfg).noise
    result = rate_test_s(
        cfg.alpha, cfg.rate_n_values, cfg.replications, cfg.seed,
        noise=noise, kappa=cfg.rate_kappa,
    )
    with open(out / "rate_s.csv", "w") as fh:
        fh.write("n,rho_n,delta_n,median_sup_error\n")
        for n, rho, delta, med in result.rows:
            fh.write(f"{n},{rho!r},{delta!r},{med!r}\n")
    write_summary_json(
        out / "summary.json",
        {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "alpha": cfg.alpha,
            "replications": cfg.replications,
            "exponent": result.exponent,
            "stderr": result.stderr,
            "target": result.target,
        },
    )


def _cmd_rate_theta(cfg: ExperimentConfig) -> None:
    out = _out_dir(cfg)
    spec = default_market(cfg)
    result = rate_test_theta(spec, replications=cfg.replications, seed=cfg.seed)
    with open(out / "rate_theta.csv", "w") as fh:
        fh.write("n,median_error\n")
        for n, med in result.rows:
            fh.write(f"{n},{med!r}\n")
    write_summary_json(
        out / "summary.json",
        {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "replications": cfg.replications,
            "ratio": result.ratio,
            "n_values": [n for n, _ in result.rows],
        },
    )


def _cmd_replay(cfg: ExperimentConfig) -> None:
    out = _out_dir(cfg)
    result = run_replay(cfg)
    for r, trace in enumerate(result.traces):
        with open(out / f"rev_rep_{r:03d}.csv", "w") as fh:
            fh.write(",".join(trace.columns) + "\n")
            for row in trace.rows():
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    write_checkpoint_csv(out / "summary.csv", result.checkpoints)
    write_summary_json(
        out / "summary.json",
        {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "replications": cfg.replications,
            "horizon": cfg.horizon,
            "policy": cfg.policy,
            "p_min": result.p_min,
            "p_max": result.p_max,
            "standardize": cfg.standardize,
            "mean_final_revenue": result.mean_final_revenue,
        },
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()

    if args.command == "gen-replay-data":
        meta = generate_replay_csv(args.out, rows=args.rows, seed=args.seed)
        print(json.dumps(meta, indent=2, sort_keys=True))
    else:
        mode = args.command.replace("-", "_")
        cfg = load_config(args, mode)
        {
            "simulate": _cmd_simulate,
            "rate_test_s": _cmd_rate_s,
            "rate_test_theta": _cmd_rate_theta,
            "replay": _cmd_replay,
        }[mode](cfg)

    print(f"done in {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
