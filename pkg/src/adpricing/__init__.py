"""adpricing: a simulation laboratory for ad-auction pricing models.

Implements the game between N advertisers and an ad platform under six
pricing models (CPM, CPC, CPA, OCPC, OCPM, CPSC), verifies the
theoretical bidding and reporting strategies by Monte-Carlo grid
search, estimates equilibrium payoffs, reproduces the outside-option
entry regions, and simulates the out-site conversion-reporting
collapse under CPA billing.
"""

__version__ = "0.1.0"

from .distributions import Beta, Discrete, Distribution, Point, Uniform, moments
from .model import (
    AdvertiserSpec,
    EventChain,
    Game,
    GameValidationError,
    PlatformBelief,
    PricingModel,
    Scenario,
    Strategy,
    in_site,
    out_site,
    pricing_model,
    validate_game,
)
from .engine import (
    AuctionOutcome,
    equivalent_bid,
    highest_rival_bid,
    price_per_pay_event,
    run_auction,
    run_repeated,
    select_winner,
)
from .strategy import (
    NO_EQUILIBRIUM,
    best_response_scan,
    cpa_collapse,
    expected_utility,
    ocpc_reporting_invariance,
    theoretical_strategy,
)
from .payoffs import (
    estimate_equilibrium_payoffs,
    exact_equilibrium_payoffs,
    expected_min_max,
    payoff_ordering_suite,
)
from .equilibrium import (
    cpsc_comparison,
    entry_decision,
    optimal_model,
    sweep_outside_option,
)
from .config import ExperimentConfig, load_config
