"""Online Modified Greedy control of generalized energy storage."""

from .costs import (
    Arbitrage,
    Balancing,
    CoLocated,
    Constant,
    CustomCost,
    DayNight,
    DayNightDeficit,
    Series,
    SubgradientBounds,
    SupportBounds,
    global_subgradient_bounds,
)
from .errors import ConfigError, OmgError
from .policies import (
    ClairvoyantPolicy,
    GreedyPolicy,
    NoStoragePolicy,
    OmgPolicy,
    clairvoyant_plan,
    greedy_step,
    omg_step,
)
from .processes import IidSpec, Laplace, MarkovChain, SyntheticWindPrice, Trace, load_trace
from .sim import SimConfig, SimResult, compare, run
from .storage import InflowSet, StorageParams, StorageState, validate_storage
from .tuning import (
    OmgParams,
    markov_bound,
    markov_epoch_stats,
    subopt_bound,
    tune,
    tune_max_weight,
    tune_min_bound,
    vos_interval,
)

__version__ = "0.1.0"
