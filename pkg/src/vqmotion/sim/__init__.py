from .character import Body, CharacterSpec, Joint, biped_rest_heights, planar_biped
from .engine import Engine, SimDivergence, SimState, pd_torque

__all__ = [
    "Body",
    "CharacterSpec",
    "Joint",
    "biped_rest_heights",
    "planar_biped",
    "Engine",
    "SimDivergence",
    "SimState",
    "pd_torque",
]
