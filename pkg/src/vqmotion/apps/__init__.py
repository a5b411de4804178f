from .checkpoints import (load_codec_checkpoint, load_gpt_checkpoint,
                          load_steering_checkpoint, save_codec_checkpoint,
                          save_gpt_checkpoint, save_steering_checkpoint)
from .matching import (code_matching_stream, latent_motion_matching,
                       matching_positions, qualified_positions)
from .metrics import TrackReport, body_positions, metrics, similarity_align
from .prompts import (PACK_PRESET_N, PromptPack, describe_gait, emit_prompt_pack,
                      example_line, write_prompt_pack)
from .serve import (FRAME_HZ, STALE_AFTER, SteeringServer, Stepper, error_line,
                    frame_line, parse_client_line, serve_forever)
from .textio import parse_index_response, serialize_indices
from .track import states_to_clip, track

__all__ = [
    "FRAME_HZ",
    "PACK_PRESET_N",
    "PromptPack",
    "STALE_AFTER",
    "SteeringServer",
    "Stepper",
    "TrackReport",
    "body_positions",
    "code_matching_stream",
    "describe_gait",
    "emit_prompt_pack",
    "error_line",
    "example_line",
    "frame_line",
    "latent_motion_matching",
    "load_codec_checkpoint",
    "load_gpt_checkpoint",
    "load_steering_checkpoint",
    "matching_positions",
    "metrics",
    "parse_client_line",
    "parse_index_response",
    "qualified_positions",
    "save_codec_checkpoint",
    "save_gpt_checkpoint",
    "save_steering_checkpoint",
    "serialize_indices",
    "serve_forever",
    "similarity_align",
    "states_to_clip",
    "track",
    "write_prompt_pack",
]
