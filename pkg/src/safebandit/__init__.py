"""Safety-aware multi-armed bandits with subsampling duels.

Library layout:

* ``rng``: seeded, versioned random streams and subsampling without replacement
* ``safety``: safety value functions (mean, mean-variance, CVaR)
* ``environments``: arm distributions, benchmark environments, true values
* ``policies``: BESA+, BESA and baseline policies, tournament selection
* ``concentration``: McDiarmid bounds, regret-bound calculators, Monte Carlo checks
* ``runner`` / ``export`` / ``cli``: replicated experiments and their outputs
"""

from .concentration import BoundParams, regret_bound_curve, verify_bound_monte_carlo
from .config import ExperimentConfig, load_config, parse_config
from .environments import Environment, make_mixture_benchmark, make_two_arm_benchmark, true_value
from .errors import BanditError, ConfigError, InvalidArgument, InvalidState, SamplingFailure
from .policies import Besa, BesaPlus, make_policy, tournament_select
from .rng import RNG_SCHEME, derive_run_rng, subsample_without_replacement
from .runner import AggregateResult, RegretTrace, run_episode, run_experiment
from .safety import CVaR, Mean, MeanVariance

__version__ = "0.1.0"

__all__ = [
    "AggregateResult", "BanditError", "Besa", "BesaPlus", "BoundParams", "CVaR", "ConfigError",
    "Environment", "ExperimentConfig", "InvalidArgument", "InvalidState", "Mean", "MeanVariance",
    "RNG_SCHEME", "RegretTrace", "SamplingFailure", "derive_run_rng", "load_config",
    "make_mixture_benchmark", "make_policy", "make_two_arm_benchmark", "parse_config",
    "regret_bound_curve", "run_episode", "run_experiment", "subsample_without_replacement",
    "tournament_select", "true_value", "verify_bound_monte_carlo",
]
