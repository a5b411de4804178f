from .config import CodecConfig, desk_codec, paper_scale_codec
from .decode import DecodeDivergence, decode_sim, rollout_sim, upsample_codes
from .model import Codec, batch_window_features, window_features
from .nets import Encoder, ResConv1DBlock, Upsampler, VariationalBottleneck, reparameterize
from .policy import MoEPolicy
from .quantize import CodebookStack, fit_codebooks
from .streaming import StreamingEncoder

__all__ = [
    "Codec",
    "CodecConfig",
    "CodebookStack",
    "DecodeDivergence",
    "Encoder",
    "MoEPolicy",
    "ResConv1DBlock",
    "StreamingEncoder",
    "Upsampler",
    "VariationalBottleneck",
    "batch_window_features",
    "decode_sim",
    "desk_codec",
    "fit_codebooks",
    "paper_scale_codec",
    "reparameterize",
    "rollout_sim",
    "upsample_codes",
    "window_features",
]
