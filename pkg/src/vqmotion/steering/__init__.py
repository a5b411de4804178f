from .config import SteerConfig, desk_steer, paper_scale_steer
from .policy import SteeringPolicyNet, policy_step
from .runtime import (
    Mailbox,
    SteeringRuntime,
    evaluate_trace,
    figure_eight_trace,
    read_trace,
    write_trace,
)
from .task import (
    FRAMES_PER_CODE,
    TaskParams,
    blend,
    build_task_params,
    stationary_task,
    task_from_raw,
    user_input_to_target,
)
from .train import (
    SteerTrainConfig,
    encode_reference,
    next_code_retrieval,
    steering_windows,
    train_steering,
)

__all__ = [
    "FRAMES_PER_CODE",
    "Mailbox",
    "SteerConfig",
    "SteerTrainConfig",
    "SteeringPolicyNet",
    "SteeringRuntime",
    "TaskParams",
    "blend",
    "build_task_params",
    "desk_steer",
    "encode_reference",
    "evaluate_trace",
    "figure_eight_trace",
    "next_code_retrieval",
    "paper_scale_steer",
    "policy_step",
    "read_trace",
    "stationary_task",
    "steering_windows",
    "task_from_raw",
    "train_steering",
    "user_input_to_target",
    "write_trace",
]
