from . import functional
from .layers import MLP, Conv1d, ConvTranspose1d, LayerNorm, Linear, Module
from .optim import RAdam
from .serialize import SegmentError, dump_arrays, load_arrays, read_arrays, write_arrays
from .tensor import (
    ShapeError,
    Tensor,
    concat,
    no_grad,
    stack,
    stop_gradient,
    straight_through,
)

__all__ = [
    "functional",
    "MLP",
    "Conv1d",
    "ConvTranspose1d",
    "LayerNorm",
    "Linear",
    "Module",
    "RAdam",
    "SegmentError",
    "dump_arrays",
    "load_arrays",
    "read_arrays",
    "write_arrays",
    "ShapeError",
    "Tensor",
    "concat",
    "no_grad",
    "stack",
    "stop_gradient",
    "straight_through",
]
