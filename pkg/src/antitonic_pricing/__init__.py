"""Shape-constrained contextual dynamic pricing.

Posted-price selling with binary censored feedback under a linear valuation
model: the valuation parameter is learned by least squares, the market-noise
survival function by antitonic regression, and prices are set by an
epoch-doubling explore-then-commit policy.  Includes a synthetic market, a
regret-experiment harness, and a revenue replay mode for transaction data.
"""

from .antitonic import (
    StepFunction,
    WeightedSample,
    WeightedSamples,
    aggregate,
    evaluate,
    fit_pava,
    minimax_oracle,
)
from .baseline import ClairvoyantPolicy, UniformRandomPolicy, baseline_price
from .harness import (
    CheckpointRow,
    ExperimentConfig,
    RegretTrace,
    SimulationResult,
    estimate_slope,
    rate_test_s,
    rate_test_theta,
    run_simulation,
)
from .market import (
    MarketSpec,
    NoiseModel,
    fan_quadratic_noise,
    holder_noise,
    make_noise,
    oracle_price,
    s_theta_oracle,
    sample_round,
    trunc_cauchy_noise,
    trunc_gaussian_noise,
    trunc_laplace_noise,
)
from .ols import OlsFit, fit_ols, intercept_correction
from .policy import (
    EpochSchedule,
    PolicyState,
    PricingConfig,
    ProtocolError,
    build_schedule,
    maximize_step_revenue,
    nu,
)
from .replay import generate_replay_csv, load_replay_csv, run_replay

__version__ = "0.1.0"
