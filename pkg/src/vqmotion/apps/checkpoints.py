"""Checkpoint files for the user-facing commands.

Every checkpoint is a named-array segment whose "config.json" entry
echoes the builder config, so loading needs no side channel. The codec
loader also accepts full trainer checkpoints (prefixed arrays plus the
trainer header) and extracts the codec from them.
"""

import json
from dataclasses import asdict

import numpy as np

from ..codec import Codec, CodecConfig
from ..gpt import GptConfig, GptNet
from ..nn.serialize import read_arrays, write_arrays
from ..steering import SteerConfig, SteeringPolicyNet


def _pack_json(payload: dict) -> np.ndarray:
    return np.frombuffer(json.dumps(payload).encode(), dtype=np.uint8).astype(np.float64)


def _unpack_json(arr: np.ndarray) -> dict:
    return json.loads(np.asarray(arr).astype(np.uint8).tobytes().decode())


def _with_header(arrays: dict, header: dict) -> dict:
    out = dict(arrays)
    out["config.json"] = _pack_json(header)
    return out


def save_codec_checkpoint(path, codec: Codec) -> None:
    write_arrays(path, _with_header(codec.state(), {"codec": asdict(codec.cfg)}))


def load_codec_checkpoint(path) -> Codec:
    """Rebuild a codec from its own checkpoint or a trainer checkpoint."""
    blob = read_arrays(path)
    if "config.json" not in blob:
        raise ValueError(f"{path}: not a checkpoint (missing config echo)")
    header = _unpack_json(blob.pop("config.json"))
    if "codec" not in header:
        raise ValueError(f"{path}: header carries no codec config")
    codec = Codec(CodecConfig(**header["codec"]))
    trainer_style = any(k.startswith("codec.") for k in blob)
    if trainer_style:
        blob = {k[len("codec."):]: v for k, v in blob.items() if k.startswith("codec.")}
    codec.load_state(blob)
    return codec


def save_steering_checkpoint(path, net: SteeringPolicyNet) -> None:
    write_arrays(path, _with_header(net.state(), {"steer": asdict(net.cfg)}))


def load_steering_checkpoint(path) -> SteeringPolicyNet:
    blob = read_arrays(path)
    header = _unpack_json(blob.pop("config.json"))
    raw = header["steer"]
    # json stores tuples as lists; restore the dataclass field types
    raw["sample_offsets"] = tuple(raw["sample_offsets"])
    raw["taus"] = tuple(raw["taus"])
    net = SteeringPolicyNet(SteerConfig(**raw))
    net.load_state(blob)
    return net


def save_gpt_checkpoint(path, net: GptNet) -> None:
    write_arrays(path, _with_header(net.state(), {"gpt": asdict(net.cfg)}))


def load_gpt_checkpoint(path) -> GptNet:
    blob = read_arrays(path)
    header = _unpack_json(blob.pop("config.json"))
    net = GptNet(GptConfig(**header["gpt"]))
    net.load_state(blob)
    return net
