"""Online learning in tree-structured episodic decision problems.

Shared per-terminal statistics give simultaneous confidence bounds on every
policy's value; the learners here exploit them with polynomial-time
planning, and everything is verifiable against a brute-force oracle on
small instances.
"""

from .estimator import (
    BoundConfig,
    CountsTable,
    EstimateUndefinedError,
    OutcomeLog,
    beta,
    delta_schedule,
    lcb,
    play_count,
    q_hat,
    record_episode,
    ucb,
    v_hat,
    v_hat_uniform,
)
from .learners import (
    ArmCountError,
    EventSink,
    LearnerEvent,
    ListSink,
    PacResult,
    StopEvent,
    UcbResult,
    flat_lucb,
    lucb_t,
    lucb_t_uniform,
    ucb_t,
)
from .planner import (
    NoSecondPolicyError,
    UcbTuple,
    best_empirical_policy,
    find_max_ucb,
    find_max_ucb_uniform,
    second_max_ucb,
    second_max_ucb_uniform,
    uniform_best_policy,
)
from .tree import (
    Policy,
    TmdpEnv,
    Trajectory,
    TreeBuilder,
    TreeError,
    TreeMdp,
    canonical_policy_for_terminal,
    compute_terminal_profiles,
    consistent_terminals,
    evaluate_bellman,
    evaluate_terminal_sum,
    sample_episode,
    validate,
    x_signature,
)

__version__ = "0.1.0"
