"""Prompt packs: paired descriptions and index sequences for an external LLM.

Each example line is a digit-free description followed by the clip's
first-layer code indices in brackets. Descriptions must stay digit-free
because the response parser treats every digit run in a line as an
index; emit_prompt_pack enforces this by re-parsing each line it writes.
"""

from dataclasses import dataclass, field

import numpy as np

from ..codec import Codec
from ..codec.model import window_features
from ..data import GaitParams, MotionClip
from ..nn import no_grad
from ..sim import Engine
from .textio import parse_index_response, serialize_indices

PACK_PRESET_N = 1600

PREAMBLE = (
    "instruction: every line below pairs a short motion description with\n"
    "that motion's code sequence in brackets. learn how descriptions map\n"
    "to codes. when later given a new description, answer with a single\n"
    "bracketed code sequence drawn from the same vocabulary; commentary\n"
    "may follow a dash after the codes.\n")


@dataclass(frozen=True)
class PromptPack:
    """Assembled in-context examples plus the instruction preamble."""

    lines: tuple[str, ...]
    char_budget: int
    preamble: str = PREAMBLE

    @property
    def count(self) -> int:
        return len(self.lines)

    @property
    def mean_line_chars(self) -> float:
        return float(np.mean([len(x) for x in self.lines])) if self.lines else 0.0

    def text(self) -> str:
        return self.preamble + "\n" + "\n".join(self.lines) + "\n"


def example_line(description: str, indices) -> str:
    return f"{description} [{serialize_indices(indices)}]"


def emit_prompt_pack(dataset, codec: Codec, engine: Engine,
                     n: int = PACK_PRESET_N, char_budget: int = 300_000,
                     ) -> PromptPack:
    """Encode (description, clip) pairs into a budgeted example pack.

    Uses first-layer indices only. Examples are taken in dataset order
    up to n; whole trailing examples are dropped once the character
    budget is exhausted. A budget too small for even one example is an
    error, as is a description whose line fails to re-parse to its own
    indices (digits in prose).
    """
    if n <= 0:
        raise ValueError(f"need a positive example count, got {n}")
    lines = []
    total = len(PREAMBLE) + 1
    for description, clip in dataset[:n]:
        usable = clip.n_frames - clip.n_frames % 4
        feats = window_features(engine, clip.window(0, usable))
        with no_grad():
            v = codec.encode(feats.T[None]).data
        _, s = codec.quant.quantize(v, active_layers=1)
        idx = s[0][:, 0]
        line = example_line(description, idx)
        back = parse_index_response(line, codec.cfg.codebook_size)
        if not np.array_equal(back, idx):
            raise ValueError(
                f"description breaks round trip (digits in prose?): {description!r}")
        if total + len(line) + 1 > char_budget:
            break
        lines.append(line)
        total += len(line) + 1
    if not lines:
        raise ValueError(f"character budget {char_budget} too small for one example")
    return PromptPack(lines=tuple(lines), char_budget=char_budget)


def write_prompt_pack(path, pack: PromptPack) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(pack.text())


_SPEED_WORDS = ((0.3, "very slowly"), (0.7, "slowly"), (1.1, "at an easy pace"),
                (1.6, "briskly"), (2.2, "quickly"), (99.0, "at a sprint"))
_FAMILY_PHRASES = {
    "walk": "a figure walks forward",
    "run": "a figure runs forward",
    "hop": "a figure hops ahead on both feet",
    "squat": "a figure squats down and rises repeatedly",
    "sway": "a figure sways in place",
    "turn": "a figure paces back and forth, reversing direction",
}


def describe_gait(params: GaitParams) -> str:
    """Digit-free one-line description of a procedural gait clip."""
    base = _FAMILY_PHRASES[params.family]
    speed = next(w for lim, w in _SPEED_WORDS if params.speed < lim)
    cadence = "with a quick stride" if params.stride_hz >= 1.6 else "with a relaxed stride"
    if params.family in ("squat", "sway"):
        depth = "deeply" if params.amplitude >= 1.0 else "gently"
        return f"{base}, {depth}, {cadence}"
    if params.family == "turn":
        rate = "sharply" if params.turn_rate >= 0.8 else "in wide arcs"
        return f"{base} {rate}, {speed}"
    return f"{base} {speed}, {cadence}"
