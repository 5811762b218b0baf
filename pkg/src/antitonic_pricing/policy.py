"""Epoch-doubling pricing policy with shape-constrained demand estimation.

Each episode doubles in length and runs three phases: uniform-price
exploration (fits the linear valuation parameter), offset-sampling
exploration (fits the noise survival function by antitonic regression), and
exploitation (posts the exact maximizer of estimated revenue).  Estimates are
frozen within an episode and rebuilt from scratch in the next one.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from math import ceil

import numpy as np

from .antitonic import StepFunction, aggregate, fit_pava
from .ols import OlsFit, fit_ols, intercept_correction

__all__ = [
    "ProtocolError",
    "PricingConfig",
    "Episode",
    "EpochSchedule",
    "PolicyState",
    "nu",
    "build_schedule",
    "maximize_step_revenue",
    "PHASE_EXPLORE_THETA",
    "PHASE_EXPLORE_S",
    "PHASE_EXPLOIT",
]

PHASE_EXPLORE_THETA = "explore_theta"
PHASE_EXPLORE_S = "explore_s"
PHASE_EXPLOIT = "exploit"


class ProtocolError(RuntimeError):
    """Raised when price/feedback calls break the post-then-observe protocol."""


def nu(alpha: float) -> float:
    """Regret-rate exponent: 2/(2+a) below a=1/2, (2a+1)/(3a+1) from 1/2 up.

    Continuous at 1/2 (both branches give 0.8); also sizes the exploration
    phase of each episode.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    if alpha < 0.5:
        return 2.0 / (2.0 + alpha)
    return (2.0 * alpha + 1.0) / (3.0 * alpha + 1.0)


@dataclass(frozen=True)
class PricingConfig:
    """Static inputs of the pricing policy."""

    p_min: float
    p_max: float
    u_lo: float
    u_hi: float
    alpha: float
    tau1: int
    d: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.p_min < self.p_max:
            raise ValueError("need 0 <= p_min < p_max")
        if not self.u_lo < self.u_hi:
            raise ValueError("noise support must be a non-empty interval")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.tau1 < 2:
            raise ValueError("tau1 must be at least 2")
        if self.d < 1:
            raise ValueError("d must be at least 1")

    @property
    def H(self) -> float:
        return self.p_max - self.p_min


@dataclass(frozen=True)
class Episode:
    """Index ranges of one episode: [start, explore_theta_end) uniform-price
    exploration, [explore_theta_end, explore_s_end) offset sampling,
    [explore_s_end, end) exploitation."""

    k: int
    tau: int
    a: int
    start: int
    explore_theta_end: int
    explore_s_end: int
    end: int

    def phase_of(self, t: int) -> str:
        if not self.start <= t < self.end:
            raise IndexError(f"round {t} outside episode {self.k}")
        if t < self.explore_theta_end:
            return PHASE_EXPLORE_THETA
        if t < self.explore_s_end:
            return PHASE_EXPLORE_S
        return PHASE_EXPLOIT


@dataclass(frozen=True)
class EpochSchedule:
    """Deterministic partition of {0, ..., T-1} into doubling episodes."""

    episodes: tuple[Episode, ...]
    horizon: int

    @property
    def K(self) -> int:
        return len(self.episodes)

    def episode_of(self, t: int) -> Episode:
        if not 0 <= t < self.horizon:
            raise IndexError(f"round {t} outside horizon {self.horizon}")
        starts = [ep.start for ep in self.episodes]
        return self.episodes[bisect_right(starts, t) - 1]

    def episode_ends(self) -> list[int]:
        return [ep.end for ep in self.episodes]


def exploration_length(tau: int, d: int, alpha: float) -> int:
    """Half-length of the exploration phase for an episode of tau rounds."""
    return ceil(d ** (alpha / (2.0 + alpha)) * tau ** nu(alpha) / 2.0)


def build_schedule(cfg: PricingConfig, T: int) -> EpochSchedule:
    """Lay out episodes of length tau1 * 2^(k-1) covering exactly T rounds.

    K is the smallest episode count whose total length reaches T; the final
    episode is truncated to land exactly on T and its exploration length is
    recomputed from the truncated length so the three phases always fit.
    """
    if T < cfg.tau1:
        raise ValueError("horizon shorter than the first episode")
    a1 = exploration_length(cfg.tau1, cfg.d, cfg.alpha)
    if 2 * a1 > cfg.tau1:
        raise ValueError("tau1 too small for given d, alpha")

    K = 1
    while cfg.tau1 * (2**K - 1) < T:
        K += 1

    episodes = []
    start = 0
    for k in range(1, K + 1):
        nominal = cfg.tau1 * 2 ** (k - 1)
        tau = min(nominal, T - start)
        a = exploration_length(tau, cfg.d, cfg.alpha)
        if 2 * a > tau:
            if tau == nominal:
                raise ValueError("tau1 too small for given d, alpha")
            a = tau // 2  # truncated tail too short for the nominal formula
        episodes.append(
            Episode(
                k=k,
                tau=tau,
                a=a,
                start=start,
                explore_theta_end=start + a,
                explore_s_end=start + 2 * a,
                end=start + tau,
            )
        )
        start += tau
    assert start == T
    return EpochSchedule(tuple(episodes), T)


def maximize_step_revenue(s: StepFunction, offset: float, p_min: float, p_max: float) -> float:
    """Exact argmax of p * s(p - offset) on [p_min, p_max].

    On every interval where the step level is constant the revenue is linear
    in p, so the supremum sits at an interval endpoint; the candidate set is
    both window ends plus every jump location, each jump scored with the level
    of the piece ending there (its left limit).  Ties break toward the
    smallest price.  When a jump candidate wins, the returned price is nudged
    just below the jump so that evaluating s at (price - offset) in floating
    point actually lands on the winning piece.
    """
    if not p_min < p_max:
        raise ValueError("p_min must be below p_max")
    jumps = s.breakpoints + offset
    # a jump at exactly p_min cannot be scored by its left level: the piece it
    # closes lies outside the window
    idx_left = np.nonzero((jumps > p_min) & (jumps <= p_max))[0]
    idx_right = np.nonzero((jumps >= p_min) & (jumps < p_max))[0]
    # levels come straight from the level array: re-deriving the design point
    # from the shifted price can land several ulp off the breakpoint
    prices = np.concatenate([[p_min, p_max], jumps[idx_left], jumps[idx_right]])
    values = np.concatenate(
        [
            [s(p_min - offset), s(p_max - offset)],
            s.levels[np.maximum(idx_left - 1, 0)],
            s.levels[idx_right],
        ]
    )
    revenue = prices * values
    best = np.max(revenue)
    winner = int(np.argmin(np.where(revenue >= best, prices, np.inf)))
    price = float(prices[winner])
    # align the returned float with the winning piece under right-continuous
    # evaluation of s at (price - offset)
    if 2 <= winner < 2 + len(idx_left):
        edge = float(s.breakpoints[idx_left[winner - 2]])
        while price > p_min and price - offset >= edge:
            price = float(np.nextafter(price, -np.inf))
        price = max(price, p_min)
    elif winner >= 2 + len(idx_left):
        edge = float(s.breakpoints[idx_right[winner - 2 - len(idx_left)]])
        while price < p_max and price - offset < edge:
            price = float(np.nextafter(price, np.inf))
        price = min(price, p_max)
    return price


class PolicyState:
    """Sequential state machine: alternate next_price and observe calls.

    Owns a deterministic random stream; a fresh instance with the same seed
    and the same feedback sequence reproduces its price sequence exactly.
    Estimates depend only on data gathered inside the current episode.
    """

    def __init__(self, cfg: PricingConfig, T: int, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.schedule = build_schedule(cfg, T)
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.t = 0
        self.theta_hat: OlsFit | None = None
        self.s_hat: StepFunction | None = None
        self._prev_theta: OlsFit | None = None
        self._episode_idx = 0
        self._pending = None
        self._xs: list[np.ndarray] = []
        self._scaled_sales: list[float] = []
        self._offsets: list[float] = []
        self._offset_sales: list[float] = []

    @property
    def horizon(self) -> int:
        return self.schedule.horizon

    def _episode(self) -> Episode:
        return self.schedule.episodes[self._episode_idx]

    def _mean_estimate(self, x: np.ndarray) -> float:
        return float(self.theta_hat.theta @ x)

    def next_price(self, x) -> tuple[float, str]:
        """Price for the current round given context x (x[0] must be 1)."""
        if self.t >= self.horizon:
            raise ProtocolError("horizon exhausted")
        if self._pending is not None:
            raise ProtocolError("previous price still awaiting feedback")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cfg.d,):
            raise ValueError(f"context must have {self.cfg.d} components")
        if x[0] != 1.0:
            raise ValueError("context must carry 1 in the first component")

        ep = self._episode()
        phase = ep.phase_of(self.t)
        if phase == PHASE_EXPLORE_THETA:
            price = float(self.rng.uniform(self.cfg.p_min, self.cfg.p_max))
            w = None
        elif phase == PHASE_EXPLORE_S and self.theta_hat is not None:
            w = float(self.rng.uniform(self.cfg.u_lo, self.cfg.u_hi))
            price = w + self._mean_estimate(x)  # deliberately not clamped
        elif phase == PHASE_EXPLOIT and self.theta_hat is not None and self.s_hat is not None:
            price = maximize_step_revenue(
                self.s_hat, self._mean_estimate(x), self.cfg.p_min, self.cfg.p_max
            )
            w = None
        else:
            # missing estimates (singular exploration design): price uniformly
            price = float(self.rng.uniform(self.cfg.p_min, self.cfg.p_max))
            w = None
        self._pending = (x, price, phase, w)
        return price, phase

    def observe(self, x, price: float, sold) -> None:
        """Record the sale indicator for the price most recently posted."""
        if self._pending is None:
            raise ProtocolError("no outstanding price; call next_price first")
        px, pprice, phase, w = self._pending
        x = np.asarray(x, dtype=float)
        if not np.array_equal(x, px) or price != pprice:
            raise ProtocolError("feedback does not match the outstanding (context, price)")
        sold = float(sold)
        if sold not in (0.0, 1.0):
            raise ValueError("sold must be binary")
        self._pending = None

        ep = self._episode()
        if phase == PHASE_EXPLORE_THETA:
            self._xs.append(px)
            self._scaled_sales.append(self.cfg.H * sold)
            if self.t == ep.explore_theta_end - 1:
                self._fit_theta()
        elif phase == PHASE_EXPLORE_S:
            if w is not None:
                self._offsets.append(w)
                self._offset_sales.append(sold)
            if self.t == ep.explore_s_end - 1:
                self._fit_survival()

        self.t += 1
        if self.t >= ep.end and self.t < self.horizon:
            self._episode_idx += 1
            self._start_episode()

    def _start_episode(self) -> None:
        # episodes are statistically independent: buffers cleared, estimates
        # rebuilt from this episode's own data
        self._xs.clear()
        self._scaled_sales.clear()
        self._offsets.clear()
        self._offset_sales.clear()
        self._prev_theta = self.theta_hat
        self.theta_hat = None
        self.s_hat = None

    def _fit_theta(self) -> None:
        try:
            fit = fit_ols(np.vstack(self._xs), np.asarray(self._scaled_sales))
        except ValueError as err:
            if "singular design" not in str(err):
                raise
            # carry the previous episode's estimate forward (uniform pricing
            # in episode 1); vanishing probability under bounded i.i.d. contexts
            self.theta_hat = self._prev_theta
            return
        self.theta_hat = intercept_correction(fit, self.cfg.p_min)

    def _fit_survival(self) -> None:
        if not self._offsets or self.theta_hat is None:
            self.s_hat = None
            return
        samples = aggregate((np.asarray(self._offsets), np.asarray(self._offset_sales)))
        self.s_hat = fit_pava(samples)
