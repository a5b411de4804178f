from .condition import (ConditionFileError, read_condition_file, text_features,
                        write_condition_file)
from .config import GptConfig, desk_gpt, paper_scale_gpt
from .model import GptNet, nll_loss
from .sample import generate, generate_batch, sample_next, sample_step
from .train import GptTrainConfig, stream_windows, train_gpt

__all__ = [
    "ConditionFileError", "GptConfig", "GptNet", "GptTrainConfig",
    "desk_gpt", "generate", "generate_batch", "nll_loss", "paper_scale_gpt",
    "read_condition_file", "sample_next", "sample_step", "stream_windows",
    "text_features", "train_gpt", "write_condition_file",
]
