"""poolsim: simulator and audit harness for pay-per-share reward mechanisms
with opportunity-cost subsidies."""

from .analysis import (
    BestResponseResult,
    BudgetBounds,
    PayoffEstimate,
    bb_audit,
    best_response,
    br_dynamics,
    chernoff_tail_upper,
    docdic_check,
    expected_payoff_mc,
    floor_payoff,
    g_function,
    ocdic_check,
    pps_expected_reward_closed,
    subsidy_prob_lower,
)
from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .engine import (
    MinerPolicy,
    Observation,
    RoundRecord,
    SimulationLedger,
    delta_adaptive_policy,
    init_state,
    run_simulation,
    step_round,
)
from .mechanisms import (
    RewardOutcome,
    RollingWindow,
    budget_ratio,
    pps_reward,
    ppss_reward,
    subsidy_factor,
    subsidy_indicator,
    subsidy_shape,
)
from .model import (
    CostFunction,
    DemandModel,
    MinerProfile,
    PlatformParams,
    RoundTranscript,
    StrategyProfile,
    c_tilde,
    cost_eval,
    cost_marginal,
    gamma_sample,
    sample_demand,
    sample_transcript,
    substream,
)

__version__ = "0.1.0"
