from .common import ALGORITHMS, MODES, AgentSpec, Hyperparams, Policy, ReplayBuffer
from .offpolicy import DdpgTrainer, SacTrainer, Td3Trainer
from .ppo import PpoTrainer, clipped_surrogate
from .training import (
    PolicySet,
    TrainingDiverged,
    policy_act,
    run_seed_battery,
    train_base_agent,
)

__all__ = [
    "ALGORITHMS",
    "MODES",
    "AgentSpec",
    "Hyperparams",
    "Policy",
    "ReplayBuffer",
    "PolicySet",
    "TrainingDiverged",
    "PpoTrainer",
    "SacTrainer",
    "DdpgTrainer",
    "Td3Trainer",
    "clipped_surrogate",
    "policy_act",
    "run_seed_battery",
    "train_base_agent",
]
