"""Ordinary least squares for the valuation parameter.

The exploration phase regresses the range-scaled sale indicator on the
context vector.  With uniform exploration prices on [p_min, p_max] and
mean-zero bounded noise, the conditional mean of that response is the linear
valuation minus p_min, so the fitted intercept is shifted back by p_min
before the estimate is used for pricing.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["OlsFit", "fit_ols", "intercept_correction", "SINGULAR_TOL"]

# lower bound on the smallest singular value of the normalized Gram matrix
SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class OlsFit:
    """Least-squares estimate with basic diagnostics.

    theta[0] is the intercept estimate; condition_hint is the smallest
    singular value of (1/n) X'X, useful for spotting near-singular designs.
    """

    theta: np.ndarray
    n: int
    condition_hint: float

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=float)
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        if not np.all(np.isfinite(theta)):
            raise ValueError("estimate contains non-finite coordinates")


def fit_ols(contexts, responses) -> OlsFit:
    """Solve the least-squares problem via SVD (rank revealing, no Gram inverse).

    Raises ValueError("singular design") when the design is numerically rank
    deficient; callers are expected to fall back rather than regularize, since
    the pricing method is deliberately tuning-parameter free.
    """
    X = np.asarray(contexts, dtype=float)
    y = np.asarray(responses, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError("contexts and responses must have matching length")
    if n < d:
        raise ValueError(f"need at least d={d} observations, got {n}")

    singvals = np.linalg.svd(X, compute_uv=False)
    condition_hint = float(singvals[-1] ** 2 / n)
    if condition_hint < SINGULAR_TOL:
        raise ValueError("singular design")

    theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return OlsFit(theta=theta, n=n, condition_hint=condition_hint)


def intercept_correction(fit: OlsFit, p_min: float) -> OlsFit:
    """Shift the intercept by p_min; other coordinates unchanged."""
    theta = fit.theta.copy()
    theta[0] += p_min
    return replace(fit, theta=theta)
