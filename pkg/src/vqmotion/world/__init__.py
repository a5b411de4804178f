from .config import WorldConfig, desk_world, paper_scale_world
from .corpus import contact_corpus, float_corpus, scripted_targets
from .model import FeatureNormalizer, WorldModel, rollout_model, train_world_step
from .replay import ReplayBuffer, ReplayError

__all__ = [
    "WorldConfig",
    "contact_corpus",
    "float_corpus",
    "scripted_targets",
    "desk_world",
    "paper_scale_world",
    "FeatureNormalizer",
    "WorldModel",
    "rollout_model",
    "train_world_step",
    "ReplayBuffer",
    "ReplayError",
]
