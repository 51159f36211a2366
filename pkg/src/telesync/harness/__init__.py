"""Desk-scale human-in-the-loop learning harness over the sync engine."""

from .learning import (
    EpsilonGreedy,
    HitlConfig,
    HitlResult,
    TabularQPolicy,
    hitl_q_learning,
    train_lookup_bc,
)
from .policies import FrozenPolicy, LookupBCPolicy, Policy, Provenance, ScriptedExpert
from .replay import ReplayBuffer, Transition, sample_symmetric
from .runner import ScriptedIntervenor, build_loop, evaluate, run_episode
from .tasks import (
    SUCCESS_LOGIT,
    AnnulusSector,
    TaskSpec,
    dial_reach_task,
    make_task,
    planar_reach_task,
    reward_logit,
)

__all__ = [
    "AnnulusSector",
    "EpsilonGreedy",
    "FrozenPolicy",
    "HitlConfig",
    "HitlResult",
    "LookupBCPolicy",
    "Policy",
    "Provenance",
    "ReplayBuffer",
    "ScriptedExpert",
    "ScriptedIntervenor",
    "SUCCESS_LOGIT",
    "TabularQPolicy",
    "TaskSpec",
    "Transition",
    "build_loop",
    "dial_reach_task",
    "evaluate",
    "hitl_q_learning",
    "make_task",
    "planar_reach_task",
    "reward_logit",
    "run_episode",
    "sample_symmetric",
    "train_lookup_bc",
]
