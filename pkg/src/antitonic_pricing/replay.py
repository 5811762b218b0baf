"""Revenue replay on transaction-price data.

Each row of the input CSV is one historical transaction whose recorded
price acts as the (hidden) customer valuation: the policy posts a price, a
sale occurs when the valuation clears it, and cumulative revenue is logged.
Rows are reshuffled per replication.  The price window is set from the
observed valuation column; the noise support is a config input.

A synthetic generator with the same schema ships alongside, since the
original dataset is proprietary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .baseline import UniformRandomPolicy
from .harness import (
    CheckpointRow,
    ExperimentConfig,
    checkpoint_times,
    context_digest,
    pricing_config,
    summarize_traces,
)
from .market import make_noise
from .policy import EpochSchedule, PolicyState, build_schedule

__all__ = [
    "REPLAY_NUMERIC",
    "REPLAY_COLUMNS",
    "ReplayData",
    "RevenueTrace",
    "ReplayResult",
    "load_replay_csv",
    "run_replay",
    "generate_replay_csv",
]

REPLAY_NUMERIC = ("mkt_rate_d", "sqft", "med_home")
REPLAY_COLUMNS = REPLAY_NUMERIC + ("unit_type", "act_rate_d")
REFERENCE_UNIT_TYPE = "1 bed"


@dataclass
class ReplayData:
    X: np.ndarray
    valuations: np.ndarray
    feature_names: list[str]
    standardized: bool

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def load_replay_csv(path, standardize: bool = True) -> ReplayData:
    """Read and encode a replay CSV.

    Numeric regressors may be standardized (the default: raw magnitudes span
    five orders, which wrecks the conditioning of the exploration-phase least
    squares); the categorical unit type is one-hot encoded against the
    "1 bed" reference level.
    """
    df = pd.read_csv(path)
    missing = sorted(set(REPLAY_COLUMNS) - set(df.columns))
    if missing:
        raise ValueError(f"replay CSV missing columns: {missing}")
    numeric = {}
    for col in REPLAY_NUMERIC + ("act_rate_d",):
        try:
            numeric[col] = pd.to_numeric(df[col], errors="raise").to_numpy(dtype=float)
        except (ValueError, TypeError) as err:
            raise ValueError(f"non-numeric values in column {col!r}") from err

    names = []
    cols = []
    for col in REPLAY_NUMERIC:
        vals = numeric[col]
        if standardize:
            sd = vals.std()
            if sd > 0:
                vals = (vals - vals.mean()) / sd
        cols.append(vals)
        names.append(col)

    levels = sorted(str(v) for v in df["unit_type"].unique())
    reference = REFERENCE_UNIT_TYPE if REFERENCE_UNIT_TYPE in levels else levels[0]
    unit = df["unit_type"].astype(str).to_numpy()
    for level in levels:
        if level == reference:
            continue
        cols.append((unit == level).astype(float))
        names.append(f"unit_type={level}")

    X = np.column_stack([np.ones(len(df))] + cols)
    return ReplayData(X, numeric["act_rate_d"], ["intercept"] + names, standardize)


class RevenueTrace:
    """Per-round revenue log of one shuffle."""

    columns = ("t", "episode", "phase", "price", "sold", "revenue", "cum_revenue")

    def __init__(self, horizon: int):
        self.t = np.arange(1, horizon + 1)
        self.episode = np.zeros(horizon, dtype=int)
        self.phase: list[str] = [""] * horizon
        self.x_digest: list[str] = [""] * horizon
        self.price = np.zeros(horizon)
        self.sold = np.zeros(horizon, dtype=int)
        self.revenue = np.zeros(horizon)
        self.cum_revenue = np.zeros(horizon)

    def rows(self):
        for i in range(len(self.t)):
            yield (
                int(self.t[i]),
                int(self.episode[i]),
                self.phase[i],
                float(self.price[i]),
                int(self.sold[i]),
                float(self.revenue[i]),
                float(self.cum_revenue[i]),
            )


def replay_trace(data: ReplayData, order, policy, schedule: EpochSchedule) -> RevenueTrace:
    """Drive any policy over the rows in `order`; sale iff valuation >= price."""
    T = schedule.horizon
    trace = RevenueTrace(T)
    ep_iter = iter(schedule.episodes)
    ep = next(ep_iter)
    cum = 0.0
    for t in range(T):
        if t >= ep.end:
            ep = next(ep_iter)
        x = data.X[order[t]]
        v = data.valuations[order[t]]
        price, phase = policy.next_price(x)
        sold = int(v >= price)
        policy.observe(x, price, sold)
        revenue = price * sold
        cum += revenue
        trace.episode[t] = ep.k
        trace.phase[t] = phase
        trace.x_digest[t] = context_digest(x)
        trace.price[t] = price
        trace.sold[t] = sold
        trace.revenue[t] = revenue
        trace.cum_revenue[t] = cum
    return trace


@dataclass
class ReplayResult:
    config: ExperimentConfig
    schedule: EpochSchedule
    p_min: float
    p_max: float
    traces: list[RevenueTrace]
    checkpoints: list[CheckpointRow]

    @property
    def mean_final_revenue(self) -> float:
        return float(np.mean([tr.cum_revenue[-1] for tr in self.traces]))


def run_replay(cfg: ExperimentConfig, data: ReplayData | None = None) -> ReplayResult:
    """Replicated replay; shuffles are shared across policies for a given seed."""
    if cfg.policy == "clairvoyant":
        raise ValueError("clairvoyant pricing requires the market spec "
                         "(not available in replay mode)")
    if data is None:
        if cfg.replay_csv is None:
            raise ValueError("replay mode needs replay_csv")
        data = load_replay_csv(cfg.replay_csv, cfg.standardize)
    if data.n < cfg.horizon:
        raise ValueError(f"replay file has {data.n} rows, fewer than horizon {cfg.horizon}")

    p_min = float(data.valuations.min())
    p_max = float(data.valuations.max())
    cfg_prices = ExperimentConfig.from_dict({**cfg.to_dict(), "p_min": p_min, "p_max": p_max})
    pcfg = pricing_config(cfg_prices, data.d)
    schedule = build_schedule(pcfg, cfg.horizon)

    traces = []
    for r in range(cfg.replications):
        shuffle_rng = np.random.default_rng([cfg.seed, r, 0])
        policy_rng = np.random.default_rng([cfg.seed, r, 1])
        order = shuffle_rng.permutation(data.n)
        if cfg.policy == "antitonic":
            policy = PolicyState(pcfg, cfg.horizon, policy_rng)
        else:
            policy = UniformRandomPolicy(p_min, p_max, policy_rng)
        traces.append(replay_trace(data, order, policy, schedule))

    times = checkpoint_times(schedule, cfg.checkpoint_every)
    rows = summarize_traces(
        lambda r, c: traces[r].cum_revenue[c - 1], times, schedule, cfg.replications
    )
    return ReplayResult(cfg, schedule, p_min, p_max, traces, rows)


# coefficients of the synthetic valuation model, in display units:
# per $1000 market rate, per sqft, per $100k median home value
_GEN_COEF = {
    "base": 40.0,
    "mkt_rate_d": 12.0,
    "sqft": 0.12,
    "med_home": 6.0,
    "unit_effects": {"1 bed": 0.0, "2 bed": 12.0, "studio": -10.0, "other": 5.0},
    "noise_sigma": 4.0,
    "noise_half_width": 12.0,
}


def generate_replay_csv(path, rows: int = 3000, seed: int = 0, coef: dict | None = None) -> dict:
    """Write a synthetic replay CSV with the documented schema.

    Feature marginals imitate the published summary magnitudes (market rates
    in the thousands, square footage in the hundreds, median home values in
    the hundreds of thousands); valuations follow a linear model with
    mean-zero truncated-gaussian noise.  Returns the generating coefficients,
    including the noise support to pass to the replay config.
    """
    coef = {**_GEN_COEF, **(coef or {})}
    rng = np.random.default_rng(seed)
    mkt = np.clip(rng.lognormal(np.log(3000.0), 0.45, rows), 500.0, 9000.0)
    sqft = np.clip(rng.normal(465.0, 120.0, rows), 150.0, 900.0)
    med_home = np.clip(rng.normal(561000.0, 180000.0, rows), 131000.0, 1200000.0)
    unit_types = np.asarray(sorted(coef["unit_effects"]))
    probs = {"1 bed": 0.40, "2 bed": 0.25, "other": 0.15, "studio": 0.20}
    unit = rng.choice(unit_types, size=rows, p=[probs[u] for u in unit_types])
    noise = make_noise(
        "trunc_gaussian", sigma=coef["noise_sigma"], half_width=coef["noise_half_width"]
    )
    z = noise.sample(rng, rows)
    effects = np.array([coef["unit_effects"][u] for u in unit])
    v = (
        coef["base"]
        + coef["mkt_rate_d"] * mkt / 1000.0
        + coef["sqft"] * sqft
        + coef["med_home"] * med_home / 100000.0
        + effects
        + z
    )
    with open(path, "w", newline="") as fh:
        fh.write(",".join(REPLAY_COLUMNS) + "\n")
        for i in range(rows):
            fh.write(
                f"{mkt[i]:.2f},{sqft[i]:.2f},{med_home[i]:.2f},{unit[i]},{v[i]:.4f}\n"
            )
    return {
        **{k: coef[k] for k in ("base", "mkt_rate_d", "sqft", "med_home")},
        "unit_effects": dict(coef["unit_effects"]),
        "noise_support": (-coef["noise_half_width"], coef["noise_half_width"]),
        "rows": rows,
        "seed": seed,
    }
