"""Reference policies: uniform-random pricing and the clairvoyant oracle.

These bracket the main policy in experiments: uniform-random gives the
linear-regret floor any learning method must beat, the clairvoyant gives the
zero-regret ceiling (and is only available in simulation, where the market
spec is known).
"""
from __future__ import annotations

import numpy as np

from .market import MarketSpec, oracle_price

__all__ = ["BASELINE_KINDS", "baseline_price", "UniformRandomPolicy", "ClairvoyantPolicy"]

BASELINE_KINDS = ("uniform_random", "clairvoyant")


def baseline_price(kind: str, x, rng: np.random.Generator | None = None, *,
                   bounds: tuple[float, float] | None = None,
                   spec: MarketSpec | None = None) -> float:
    """Price for one round under a baseline policy.

    uniform_random needs `bounds` = (p_min, p_max) and an rng; clairvoyant
    needs the market spec (hence is unavailable when replaying real data).
    """
    if kind == "uniform_random":
        if bounds is None or rng is None:
            raise ValueError("uniform_random requires bounds and rng")
        return float(rng.uniform(bounds[0], bounds[1]))
    if kind == "clairvoyant":
        if spec is None:
            raise ValueError("clairvoyant pricing requires the market spec "
                             "(not available in replay mode)")
        return oracle_price(spec, x)[0]
    raise ValueError(f"unknown baseline {kind!r}; choose from {BASELINE_KINDS}")


class UniformRandomPolicy:
    """Drop-in policy posting uniform prices; feedback is ignored."""

    phase = "baseline"

    def __init__(self, p_min: float, p_max: float, rng: np.random.Generator):
        self.bounds = (p_min, p_max)
        self.rng = rng

    def next_price(self, x) -> tuple[float, str]:
        return baseline_price("uniform_random", x, self.rng, bounds=self.bounds), self.phase

    def observe(self, x, price: float, sold) -> None:
        pass


class ClairvoyantPolicy:
    """Drop-in policy posting the oracle price each round."""

    phase = "baseline"

    def __init__(self, spec: MarketSpec):
        self.spec = spec

    def next_price(self, x) -> tuple[float, str]:
        return baseline_price("clairvoyant", x, spec=self.spec), self.phase

    def observe(self, x, price: float, sold) -> None:
        pass
