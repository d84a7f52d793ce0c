from .net import (
    FLIP_ACTIONS,
    RULE_ACTIONS,
    Action,
    Adam,
    CheckpointError,
    LossConfig,
    NetShape,
    PolicyNet,
    act,
    clip_grad_norm,
    load_policy,
    ppo_loss,
    save_policy,
)
from .policy import Agent, FixedPolicy, IdentityPolicy
from .ppo import (
    EpisodeOutcome,
    SimEnv,
    ToyRuleEnv,
    TrainerConfig,
    TrainingDiverged,
    TrainingRun,
    Transition,
    UpdateLog,
    gae,
    make_agent,
    ppo_train,
    train,
    warmup,
    warmup_label,
)
from .rewards import final_reward, intermediate_reward
