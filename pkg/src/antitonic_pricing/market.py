"""Synthetic market environment for the linear valuation model.

Valuations are v = theta0' x + z with i.i.d. mean-zero noise z supported on a
bounded interval.  The module provides the noise families used in the
simulation study, a context sampler, the clairvoyant oracle price, and a
Monte-Carlo evaluator of the surrogate survival function seen by the policy
when its parameter estimate is off by a known amount.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

__all__ = [
    "NoiseModel",
    "MarketSpec",
    "holder_noise",
    "fan_quadratic_noise",
    "trunc_gaussian_noise",
    "trunc_laplace_noise",
    "trunc_cauchy_noise",
    "make_noise",
    "sample_round",
    "oracle_price",
    "s_theta_oracle",
]


@dataclass(frozen=True)
class NoiseModel:
    """Mean-zero noise distribution on a bounded interval.

    cdf/survival/quantile are vectorized callables.  `kinks` lists interior
    points where the cdf is not smooth (used by the oracle maximizer to place
    exact candidates).  `hoelder_alpha`/`hoelder_const` describe the modulus
    of continuity of the cdf: |F(u)-F(v)| <= hoelder_const * |u-v|**alpha.
    """

    kind: str
    support: tuple[float, float]
    cdf: Callable[[np.ndarray], np.ndarray]
    quantile: Callable[[np.ndarray], np.ndarray]
    hoelder_alpha: float
    hoelder_const: float
    kinks: tuple[float, ...] = ()

    @property
    def u_lo(self) -> float:
        return self.support[0]

    @property
    def u_hi(self) -> float:
        return self.support[1]

    def survival(self, z):
        return 1.0 - self.cdf(z)

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-cdf sampling."""
        return self.quantile(rng.uniform(0.0, 1.0, size))


def _check_symmetric(loc: float, half_width: float, kind: str) -> None:
    if loc != 0.0:
        raise ValueError(
            f"{kind} noise must have location 0: truncating a shifted density "
            "on a symmetric interval gives non-zero-mean noise"
        )
    if half_width <= 0:
        raise ValueError("support half width must be positive")


def holder_noise(alpha: float, half_width: float = 0.5) -> NoiseModel:
    """Family with cdf 1/2 + (1/2)(|z|/h)^alpha sign(z); exactly alpha-Hoelder.

    At half_width 1/2 this is 1/2 + (1/2)^(1-alpha) sign(z) |z|^alpha; the
    alpha=1 member is the uniform distribution.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    h = float(half_width)
    _check_symmetric(0.0, h, "holder")
    scale = 0.5 / h**alpha

    def cdf(z):
        zc = np.clip(z, -h, h)
        return 0.5 + scale * np.sign(zc) * np.abs(zc) ** alpha

    def quantile(q):
        d = np.asarray(q, dtype=float) - 0.5
        return np.sign(d) * (np.abs(d) / scale) ** (1.0 / alpha)

    # sign(u)|u|^a - sign(v)|v|^a is 2^(1-a)-Hoelder, hence the constant
    const = scale * 2 ** (1 - alpha)
    kinks = (0.0,) if alpha < 1 else ()
    return NoiseModel(f"holder({alpha:g})", (-h, h), cdf, quantile, alpha, const, kinks)


def fan_quadratic_noise() -> NoiseModel:
    """Density 6(1/4 - z^2) on (-1/2, 1/2); cdf 1/2 + 3z/2 - 2z^3."""

    def cdf(z):
        zc = np.clip(z, -0.5, 0.5)
        return 0.5 + 1.5 * zc - 2.0 * zc**3

    def quantile(q):
        q = np.asarray(q, dtype=float)
        lo = np.full(q.shape, -0.5)
        hi = np.full(q.shape, 0.5)
        # bisection on the monotone cubic; robust, 1e-12 accurate
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            below = cdf(mid) < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return out if out.shape else float(out)

    return NoiseModel("fan_quadratic", (-0.5, 0.5), cdf, quantile, 1.0, 1.5)


def _truncated(parent_cdf, parent_ppf, parent_pdf0, kind: str, scale: float,
               half_width: float, loc: float) -> NoiseModel:
    # parent callables are plain ufunc-backed closed forms: the generic
    # scipy.stats dispatch is far too slow for per-round oracle calls
    _check_symmetric(loc, half_width, kind)
    if scale <= 0:
        raise ValueError("scale must be positive")
    h = float(half_width)
    f_lo = float(parent_cdf(-h / scale))
    f_hi = float(parent_cdf(h / scale))
    mass = f_hi - f_lo

    def cdf(z):
        zc = np.clip(np.asarray(z, dtype=float), -h, h)
        return (parent_cdf(zc / scale) - f_lo) / mass

    def quantile(q):
        q = np.asarray(q, dtype=float)
        out = scale * parent_ppf(f_lo + q * mass)
        return np.clip(out, -h, h)

    lipschitz = float(parent_pdf0 / scale / mass)
    return NoiseModel(f"{kind}(scale={scale:g})", (-h, h), cdf, quantile, 1.0, lipschitz)


def trunc_gaussian_noise(sigma: float = 1.0, half_width: float = 0.5, mu: float = 0.0) -> NoiseModel:
    """Normal(0, sigma^2) truncated to (-half_width, half_width)."""
    return _truncated(
        special.ndtr, special.ndtri, 1.0 / np.sqrt(2.0 * np.pi),
        "trunc_gaussian", sigma, half_width, mu,
    )


def trunc_laplace_noise(scale: float = 0.2, half_width: float = 0.5, loc: float = 0.0) -> NoiseModel:
    def cdf(z):
        return np.where(z < 0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))

    def ppf(q):
        return np.where(q < 0.5, np.log(2.0 * q), -np.log(2.0 * (1.0 - q)))

    return _truncated(cdf, ppf, 0.5, "trunc_laplace", scale, half_width, loc)


def trunc_cauchy_noise(scale: float = 0.2, half_width: float = 0.5, loc: float = 0.0) -> NoiseModel:
    def cdf(z):
        return 0.5 + np.arctan(z) / np.pi

    def ppf(q):
        return np.tan(np.pi * (q - 0.5))

    return _truncated(cdf, ppf, 1.0 / np.pi, "trunc_cauchy", scale, half_width, loc)


_NOISE_FACTORIES = {
    "holder": holder_noise,
    "fan_quadratic": fan_quadratic_noise,
    "trunc_gaussian": trunc_gaussian_noise,
    "trunc_laplace": trunc_laplace_noise,
    "trunc_cauchy": trunc_cauchy_noise,
}


def make_noise(name: str, **params) -> NoiseModel:
    """Build a noise model by name; `variance` is accepted for the gaussian."""
    if name not in _NOISE_FACTORIES:
        raise ValueError(f"unknown noise family {name!r}; choose from {sorted(_NOISE_FACTORIES)}")
    if name == "trunc_gaussian" and "variance" in params:
        if "sigma" in params:
            raise ValueError("give either sigma or variance, not both")
        params["sigma"] = float(np.sqrt(params.pop("variance")))
    return _NOISE_FACTORIES[name](**params)


@dataclass(frozen=True)
class MarketSpec:
    """Ground truth for a synthetic market.

    Contexts are (1, x_1, ..., x_{d-1}) with features i.i.d. uniform on
    [feature_low, feature_high]; valuations are theta0' x + z.
    """

    theta0: np.ndarray
    feature_low: float
    feature_high: float
    noise: NoiseModel
    p_min: float
    p_max: float
    _survival_grid: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        theta0 = np.array(self.theta0, dtype=float)
        theta0.flags.writeable = False
        object.__setattr__(self, "theta0", theta0)
        if theta0.ndim != 1 or theta0.size < 1:
            raise ValueError("theta0 must be a non-empty vector")
        if not self.p_min < self.p_max:
            raise ValueError("p_min must be below p_max")
        if self.feature_low > self.feature_high:
            raise ValueError("feature bounds must be ordered")
        if not self.valuations_within_price_window:
            lo, hi = self.valuation_bounds
            warnings.warn(
                f"valuations range over ({lo:.4g}, {hi:.4g}), beyond the price window "
                f"({self.p_min:g}, {self.p_max:g}); the exploration-phase intercept "
                "identity holds only approximately",
                stacklevel=2,
            )
        # cached survival values on a fixed grid over the noise support,
        # shared by every oracle_price call
        grid = np.linspace(self.noise.u_lo, self.noise.u_hi, 2049)
        kinks = [k for k in self.noise.kinks if self.noise.u_lo < k < self.noise.u_hi]
        if kinks:
            grid = np.unique(np.concatenate([grid, np.asarray(kinks)]))
        sv = 1.0 - self.noise.cdf(grid)
        grid.flags.writeable = False
        sv.flags.writeable = False
        object.__setattr__(self, "_survival_grid", (grid, sv))

    @property
    def d(self) -> int:
        return self.theta0.size

    @property
    def mean_value_bounds(self) -> tuple[float, float]:
        """Range of theta0' x under the context sampler."""
        slopes = self.theta0[1:]
        lo = self.theta0[0] + np.sum(
            np.minimum(slopes * self.feature_low, slopes * self.feature_high)
        )
        hi = self.theta0[0] + np.sum(
            np.maximum(slopes * self.feature_low, slopes * self.feature_high)
        )
        return float(lo), float(hi)

    @property
    def valuation_bounds(self) -> tuple[float, float]:
        m_lo, m_hi = self.mean_value_bounds
        return m_lo + self.noise.u_lo, m_hi + self.noise.u_hi

    @property
    def valuations_within_price_window(self) -> bool:
        lo, hi = self.valuation_bounds
        return self.p_min <= lo and hi <= self.p_max


def sample_round(spec: MarketSpec, rng: np.random.Generator):
    """Draw one (context, valuation) pair; features first, then noise."""
    x = np.empty(spec.d)
    x[0] = 1.0
    x[1:] = rng.uniform(spec.feature_low, spec.feature_high, spec.d - 1)
    z = float(spec.noise.quantile(rng.uniform()))
    return x, float(spec.theta0 @ x + z)


def sample_rounds(spec: MarketSpec, rng: np.random.Generator, n: int):
    """Vectorized version of sample_round: returns (X, v) arrays."""
    X = np.empty((n, spec.d))
    X[:, 0] = 1.0
    X[:, 1:] = rng.uniform(spec.feature_low, spec.feature_high, (n, spec.d - 1))
    z = spec.noise.quantile(rng.uniform(0.0, 1.0, n))
    return X, X @ spec.theta0 + z


def _max_monotone_revenue(mval, lo, hi, survival, grid_p, grid_s, rtol):
    """Globally maximize p * S(p - mval) on [lo, hi] for non-increasing S.

    On any cell [a, b] the revenue is at most b * S(a - mval), so cells whose
    bound cannot beat the incumbent are pruned and the rest are subdivided
    until the bound gap drops below rtol.  Returns (price, revenue).
    """
    sel = (grid_p > lo) & (grid_p < hi)
    ends = np.array([lo, hi])
    s_ends = survival(ends - mval)
    edges = np.concatenate([ends[:1], grid_p[sel], ends[1:]])
    svals = np.concatenate([s_ends[:1], grid_s[sel], s_ends[1:]])

    rev = edges * svals
    best_idx = int(np.argmax(rev))
    best_r = float(rev[best_idx])
    best_p = float(edges[best_idx])

    lefts, rights = edges[:-1], edges[1:]
    s_left = svals[:-1]
    for _ in range(40):
        ub = rights * s_left
        keep = ub > best_r + rtol
        if not np.any(keep) or float(np.max(rights[keep] - lefts[keep])) < 1e-13:
            break
        lefts, rights = lefts[keep], rights[keep]
        # split every surviving cell into 8 subcells
        frac = np.linspace(0.0, 1.0, 9)
        pts = lefts[:, None] + (rights - lefts)[:, None] * frac[None, :]
        sv = survival(pts - mval)
        rv = pts * sv
        i = int(np.argmax(rv))
        if rv.flat[i] > best_r:
            best_r = float(rv.flat[i])
            best_p = float(pts.flat[i])
        lefts = pts[:, :-1].ravel()
        rights = pts[:, 1:].ravel()
        s_left = sv[:, :-1].ravel()
    return best_p, best_r


def oracle_price(spec: MarketSpec, x) -> tuple[float, float]:
    """Clairvoyant price: argmax of p * S0(p - theta0' x) over the price window.

    Candidates: the point where the price leaves the all-sales region (below
    it revenue is just p), plus a dense-grid search with bound-driven
    refinement inside the noise window.  Ties go to the smallest price.
    """
    mval = float(np.dot(spec.theta0, x))
    noise = spec.noise
    p_min, p_max = spec.p_min, spec.p_max
    rtol = 1e-9 * max(abs(p_max), 1.0)

    cand_p = []
    cand_r = []
    p_edge = min(max(mval + noise.u_lo, p_min), p_max)
    cand_p.append(p_edge)
    cand_r.append(p_edge * float(noise.survival(p_edge - mval)))
    cand_p.append(p_min)
    cand_r.append(p_min * float(noise.survival(p_min - mval)))

    lo = max(p_min, mval + noise.u_lo)
    hi = min(p_max, mval + noise.u_hi)
    if lo < hi:
        grid_u, grid_s = spec._survival_grid
        p, r = _max_monotone_revenue(
            mval, lo, hi, lambda q: noise.survival(q), grid_u + mval, grid_s, rtol
        )
        cand_p.append(p)
        cand_r.append(r)

    cand_p = np.asarray(cand_p)
    cand_r = np.asarray(cand_r)
    best = float(np.max(cand_r))
    p_star = float(np.min(cand_p[cand_r >= best - 1e-15]))
    return p_star, best


def s_theta_oracle(spec: MarketSpec, theta, u: float, mc_n: int, rng: np.random.Generator):
    """Monte-Carlo value of the survival function the policy actually samples.

    When the parameter estimate is theta, the observed sale indicator at noise
    offset u has mean E_x S0(u + (theta - theta0)' x).  Returns (value,
    standard error) from mc_n fresh context draws.
    """
    if mc_n < 10**4:
        raise ValueError("mc_n must be at least 10^4")
    theta = np.asarray(theta, dtype=float)
    delta = theta - spec.theta0
    X = np.empty((mc_n, spec.d))
    X[:, 0] = 1.0
    X[:, 1:] = rng.uniform(spec.feature_low, spec.feature_high, (mc_n, spec.d - 1))
    vals = spec.noise.survival(u + X @ delta)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(mc_n))
