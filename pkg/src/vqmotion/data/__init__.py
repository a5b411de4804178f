from .clips import (
    ClipParseError,
    MotionClip,
    add_noise,
    check_clip,
    clip_states,
    load_clip,
    resample,
    save_clip,
)
from .gaits import FAMILIES, GaitParams, corpus_manifest, desk_corpus, generate_gait

__all__ = [
    "ClipParseError",
    "MotionClip",
    "add_noise",
    "check_clip",
    "clip_states",
    "load_clip",
    "resample",
    "save_clip",
    "FAMILIES",
    "GaitParams",
    "corpus_manifest",
    "desk_corpus",
    "generate_gait",
]
