"""Best-response dynamics in Tullock contests, plus the discounted-sum model."""

from .analysis import (
    NAgentBest,
    NAgentRandom,
    TwoAgent,
    TwoAgentCurved,
    coupon_all_played_time,
    epsilon_neighborhood_check,
    fit_rate,
    gamma_lower_bound_n,
    gamma_two_agent,
    partition_witness,
    predict_steps,
)
from .contest import (
    ContestConfig,
    best_response,
    best_response_linear_closed_form,
    equilibrium_profile,
    is_epsilon_equilibrium,
    kappa,
    logit_transform,
    normalize_homogeneous,
    utility,
    utility_derivative,
)
from .costs import CostSpec
from .discounted_sum import (
    AdversarialMax,
    BestCase,
    CallbackBeta,
    ConstantBeta,
    DissumState,
    UniformBeta,
    dissum_step,
    lower_bound_example,
    potential,
    run_dissum,
)
from .dynamics import (
    BestCaseGreedy,
    DynamicsState,
    StoppingRule,
    Trace,
    detect_cycle,
    run,
    step,
    two_agent_z_sequence,
    warmup_completion_time,
    warmup_satisfied,
)
from .estimators import BestResponseDynamics, DiscountedSumDynamics
from .exceptions import (
    BetaContractError,
    FitError,
    NumericalRangeError,
    ScheduleExhausted,
    UnsupportedConfigError,
)
from .selection import (
    Alternating,
    ExplicitSchedule,
    FlooredRandom,
    RoundRobin,
    UniformRandom,
    largest_on_larger_side,
)

__version__ = "0.1.0"
