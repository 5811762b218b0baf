"""Weighted antitonic (non-increasing) least squares.

The production fitter is a single-pass pool-adjacent-violators sweep over
sorted design points.  A quadratic-memory minimax/maximin evaluator is kept
alongside as an independent cross-check for testing: both must produce the
same projection onto the non-increasing cone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "WeightedSample",
    "WeightedSamples",
    "StepFunction",
    "aggregate",
    "fit_pava",
    "minimax_oracle",
    "evaluate",
]


@dataclass(frozen=True)
class WeightedSample:
    """One design point with its averaged response and multiplicity."""

    u: float
    y: float
    o: int

    def __post_init__(self) -> None:
        if self.o < 1:
            raise ValueError("multiplicity o must be >= 1")


class WeightedSamples(Sequence):
    """Array-backed sequence of :class:`WeightedSample`, sorted by `u`.

    Stores parallel numpy arrays so that fitting a million points does not
    require a million Python objects; indexing still yields WeightedSample
    records.
    """

    def __init__(self, u, y, o) -> None:
        u = np.array(u, dtype=float)
        y = np.array(y, dtype=float)
        o = np.array(o, dtype=float)
        if not (u.ndim == y.ndim == o.ndim == 1) or not (len(u) == len(y) == len(o)):
            raise ValueError("u, y, o must be 1-d arrays of equal length")
        if len(u) == 0:
            raise ValueError("no samples")
        if np.any(np.diff(u) <= 0):
            raise ValueError("design points must be strictly increasing")
        if np.any(o < 1):
            raise ValueError("multiplicities must be >= 1")
        self.u = u
        self.y = y
        self.o = o
        for arr in (u, y, o):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.u)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return WeightedSamples(self.u[i], self.y[i], self.o[i])
        return WeightedSample(float(self.u[i]), float(self.y[i]), int(self.o[i]))

    def __repr__(self) -> str:
        return f"WeightedSamples(m={len(self)})"


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant non-increasing function.

    Value on [breakpoints[j], breakpoints[j+1]) is levels[j]; constant
    extrapolation with levels[0] left of the first breakpoint and levels[-1]
    right of the last one.  Immutable once constructed.
    """

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self) -> None:
        b = np.array(self.breakpoints, dtype=float)
        l = np.array(self.levels, dtype=float)
        if b.ndim != 1 or l.ndim != 1 or len(b) != len(l):
            raise ValueError("breakpoints and levels must be 1-d of equal length")
        if len(b) == 0:
            raise ValueError("step function needs at least one breakpoint")
        if not np.all(np.isfinite(b)):
            raise ValueError("breakpoints must be finite")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(l) > 0):
            raise ValueError("levels must be non-increasing")
        b.flags.writeable = False
        l.flags.writeable = False
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "levels", l)

    def __call__(self, u):
        """Right-continuous evaluation with constant tails; accepts arrays."""
        idx = np.searchsorted(self.breakpoints, u, side="right") - 1
        idx = np.clip(idx, 0, len(self.levels) - 1)
        out = self.levels[idx]
        return float(out) if np.isscalar(u) else out

    def left_limit(self, u):
        """Value just left of `u` (differs from __call__ only at jumps)."""
        idx = np.searchsorted(self.breakpoints, u, side="left") - 1
        idx = np.clip(idx, 0, len(self.levels) - 1)
        out = self.levels[idx]
        return float(out) if np.isscalar(u) else out


def evaluate(f: StepFunction, u):
    """Evaluate a fitted step function at `u` (scalar or array)."""
    return f(u)


def aggregate(samples) -> WeightedSamples:
    """Group binary responses by design point.

    `samples` is a sequence of (u, y) pairs with y in {0, 1}, or a pair of
    parallel arrays (u, y).  Returns the distinct design points in increasing
    order, the mean response at each point, and the multiplicity.
    """
    if isinstance(samples, tuple) and len(samples) == 2:
        u, y = (np.asarray(a, dtype=float) for a in samples)
    else:
        arr = np.asarray(samples, dtype=float)
        if arr.size == 0:
            raise ValueError("no samples")
        u, y = arr[:, 0], arr[:, 1]
    if u.size == 0:
        raise ValueError("no samples")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("responses must be binary")
    uniq, inverse = np.unique(u, return_inverse=True)
    counts = np.bincount(inverse)
    means = np.bincount(inverse, weights=y) / counts
    return WeightedSamples(uniq, means, counts)


def _as_arrays(samples):
    if isinstance(samples, WeightedSamples):
        return samples.u, samples.y, samples.o
    rows = [(s.u, s.y, s.o) if isinstance(s, WeightedSample) else tuple(s) for s in samples]
    if not rows:
        raise ValueError("no samples")
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def fit_pava(samples) -> StepFunction:
    """Weighted least-squares projection onto the non-increasing cone.

    Single forward pass: each point opens a block; while the previous block
    mean is strictly below the current one (an antitonicity violation) the two
    blocks are pooled into their weighted mean.  Linear time in the number of
    design points.
    """
    u, y, o = _as_arrays(samples)
    if np.any(np.diff(u) <= 0):
        raise ValueError("design points must be strictly increasing")
    if np.any(o <= 0):
        raise ValueError("weights must be positive")

    n = len(y)
    means = y.tolist()
    weights = o.tolist()
    counts = [1] * n
    top = -1
    for i in range(n):
        top += 1
        if top != i:
            means[top] = means[i]
            weights[top] = weights[i]
            counts[top] = 1
        while top > 0 and means[top - 1] < means[top]:
            wa = weights[top - 1]
            wb = weights[top]
            means[top - 1] = (wa * means[top - 1] + wb * means[top]) / (wa + wb)
            weights[top - 1] = wa + wb
            counts[top - 1] += counts[top]
            top -= 1

    levels = np.empty(n)
    pos = 0
    for b in range(top + 1):
        nxt = pos + counts[b]
        levels[pos:nxt] = means[b]
        pos = nxt
    return StepFunction(u, levels)


def minimax_oracle(samples) -> StepFunction:
    """Antitonic fit evaluated directly from the minimax representation.

    Fitted value at the j-th design point is min over r <= j of the max over
    s >= j of the weighted block mean on [r, s].  The dual maximin form is
    computed as well; disagreement beyond 1e-9 signals an arithmetic bug.
    Quadratic memory, intended for modest point counts (<= ~500).
    """
    u, y, o = _as_arrays(samples)
    if np.any(np.diff(u) <= 0):
        raise ValueError("design points must be strictly increasing")
    if np.any(o <= 0):
        raise ValueError("weights must be positive")

    m = len(y)
    cw = np.concatenate(([0.0], np.cumsum(o)))
    cs = np.concatenate(([0.0], np.cumsum(o * y)))
    with np.errstate(invalid="ignore", divide="ignore"):
        block_mean = (cs[None, 1:] - cs[:-1, None]) / (cw[None, 1:] - cw[:-1, None])
    upper = np.triu(np.ones((m, m), dtype=bool))

    # minimax: suffix max over s, then prefix min over r, read on the diagonal
    a = np.where(upper, block_mean, -np.inf)
    a = np.maximum.accumulate(a[:, ::-1], axis=1)[:, ::-1]
    a = np.where(upper, a, np.inf)
    minimax = np.minimum.accumulate(a, axis=0).diagonal()

    # maximin: prefix min over r, then suffix max over s
    b = np.where(upper, block_mean, np.inf)
    b = np.minimum.accumulate(b, axis=0)
    b = np.where(upper, b, -np.inf)
    maximin = np.maximum.accumulate(b[:, ::-1], axis=1)[:, ::-1].diagonal()

    gap = float(np.max(np.abs(minimax - maximin)))
    if gap > 1e-9:
        raise RuntimeError(
            f"minimax and maximin representations disagree by {gap:.3e}; "
            "this indicates an arithmetic bug"
        )
    return StepFunction(u, np.array(minimax))
