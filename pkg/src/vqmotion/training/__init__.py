from .config import TrainConfig, desk_train, paper_scale_train
from .loop import CorpusWindows, Trainer, action_ema, train_loop
from .report import TrainReport

__all__ = [
    "TrainConfig",
    "desk_train",
    "paper_scale_train",
    "CorpusWindows",
    "Trainer",
    "action_ema",
    "train_loop",
    "TrainReport",
]
