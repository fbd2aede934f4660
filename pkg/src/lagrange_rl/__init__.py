"""Constrained model-free control: cost minimization under reward bounds.

The policy trades off task reward and auxiliary costs through a learned,
bounded Lagrangian multiplier (optionally state- or goal-dependent), with an
off-policy actor-critic learner (multi-step corrected value targets, KL-
regularized policy improvement) and built-in verifiable environments.
"""

from .gaussian import GaussianParams, kl_decoupled, kl_direct, log_prob
from .gradcheck import grad_check
from .lagrange import (
    ConstraintSpec,
    bound_to_value,
    lambda_logit_max,
    q_lambda_conditional,
    q_lambda_normalized,
    q_lambda_pointwise,
    q_lambda_relaxed,
    reward_weight,
)
from .mdp import ReplayBuffer, Transition, TrajectorySegment
from .nets import LstmSpec, MlpSpec, mlp_forward
from .optim import AdamState, adam_init, adam_step

__version__ = "0.1.0"

__all__ = [
    "GaussianParams", "kl_decoupled", "kl_direct", "log_prob",
    "grad_check",
    "ConstraintSpec", "bound_to_value", "lambda_logit_max",
    "q_lambda_conditional", "q_lambda_normalized", "q_lambda_pointwise",
    "q_lambda_relaxed", "reward_weight",
    "ReplayBuffer", "Transition", "TrajectorySegment",
    "LstmSpec", "MlpSpec", "mlp_forward",
    "AdamState", "adam_init", "adam_step",
    "__version__",
]
