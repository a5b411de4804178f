"""Planar articulated character descriptions.

A character is a tree of rigid segments in the sagittal plane (x forward,
y up). Each body stores its mass properties, the local anchor that attaches
it to its parent joint, and any ground-contact probe points. Joints are
revolute, PD-actuated, and listed parent-before-child.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Body:
    name: str
    mass: float
    inertia: float
    # local vector from this body's COM to the joint connecting it to its
    # parent; the root body has none
    joint_anchor: tuple[float, float] | None = None
    # local points probed against the ground plane
    contacts: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int
    child: int
    # local vector from the parent's COM to this joint
    parent_anchor: tuple[float, float]
    kp: float
    kd: float
    limit_lo: float
    limit_hi: float


@dataclass(frozen=True)
class CharacterSpec:
    bodies: tuple[Body, ...]
    joints: tuple[Joint, ...]
    torque_limit: float = 300.0
    # skeleton reference point (the "root" of poses and clips), expressed in
    # the root body's local frame relative to its COM; the pelvis for a biped
    ref_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        seen = {0}
        for j in self.joints:
            if j.parent not in seen or j.child in seen:
                raise ValueError(f"joint {j.name}: bodies must form a tree, parent first")
            if j.child != len(seen):
                raise ValueError(f"joint {j.name}: child bodies must appear in index order")
            seen.add(j.child)
        if len(seen) != len(self.bodies):
            raise ValueError("every non-root body needs exactly one joint")

    @property
    def total_mass(self) -> float:
        return sum(b.mass for b in self.bodies)

    @property
    def n_joints(self) -> int:
        return len(self.joints)


# Segment lengths for the default biped, meters. Stacked at rest:
# ankle height + shin + thigh puts the hip at 0.90, the torso spans the
# remaining 0.70, total standing height 1.60.
_TORSO_LEN = 0.70
_THIGH_LEN = 0.45
_SHIN_LEN = 0.40
_FOOT_LEN = 0.18
_ANKLE_H = 0.05

_GAIN = (400.0, 50.0)


def _rod_inertia(mass: float, length: float) -> float:
    return mass * length * length / 12.0


def planar_biped() -> CharacterSpec:
    """Seven-segment sagittal biped: 1.6 m tall, 49.5 kg."""
    torso = Body("torso", 28.0, _rod_inertia(28.0, _TORSO_LEN),
                 contacts=((0.0, -_TORSO_LEN / 2), (0.0, _TORSO_LEN / 2)))
    thigh = lambda s: Body(f"thigh_{s}", 6.5, _rod_inertia(6.5, _THIGH_LEN),
                           joint_anchor=(0.0, _THIGH_LEN / 2))
    shin = lambda s: Body(f"shin_{s}", 3.2, _rod_inertia(3.2, _SHIN_LEN),
                          joint_anchor=(0.0, _SHIN_LEN / 2),
                          contacts=((0.0, -_SHIN_LEN / 2),))
    # foot COM sits 0.01 above the sole with the ankle centered over it, so
    # the standing COM lands on the contact centroid (soft penalty ground
    # cannot supply a standing couple around an offset ankle)
    foot = lambda s: Body(f"foot_{s}", 1.05, _rod_inertia(1.05, _FOOT_LEN),
                          joint_anchor=(0.0, _ANKLE_H - 0.01),
                          contacts=((-_FOOT_LEN / 2, -0.01), (_FOOT_LEN / 2, -0.01)))
    bodies = (torso, thigh("l"), shin("l"), foot("l"), thigh("r"), shin("r"), foot("r"))

    def leg(side: str, thigh_i: int) -> tuple[Joint, Joint, Joint]:
        return (
            Joint(f"hip_{side}", 0, thigh_i, (0.0, -_TORSO_LEN / 2), *_GAIN, -1.2, 2.2),
            Joint(f"knee_{side}", thigh_i, thigh_i + 1, (0.0, -_THIGH_LEN / 2), *_GAIN, -2.4, 0.05),
            Joint(f"ankle_{side}", thigh_i + 1, thigh_i + 2, (0.0, -_SHIN_LEN / 2), *_GAIN, -1.0, 1.0),
        )

    return CharacterSpec(bodies=bodies, joints=leg("l", 1) + leg("r", 4),
                         ref_offset=(0.0, -_TORSO_LEN / 2))


def biped_rest_heights() -> dict[str, float]:
    """Resting world heights of the biped's joint chain, for tests and IK."""
    ankle = _ANKLE_H
    knee = ankle + _SHIN_LEN
    hip = knee + _THIGH_LEN
    top = hip + _TORSO_LEN
    return {"ankle": ankle, "knee": knee, "hip": hip, "top": top,
            "thigh_len": _THIGH_LEN, "shin_len": _SHIN_LEN, "foot_len": _FOOT_LEN}
