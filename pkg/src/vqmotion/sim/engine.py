"""Batched generalized-coordinate dynamics for planar body trees.

The integrator is semi-implicit Euler at a fixed substep (default 1/120 s)
with the PD damping term folded into the mass matrix (stable-PD), penalty
ground contact, and hard projection of joint limits after each substep.

Internally the translational generalized coordinates are the system center
of mass, which makes linear momentum conservation exact for force-free
motion instead of accurate to O(dt^2). Public states use the root body's
COM as the position reference; conversion happens at every step boundary
so that any chunking of a rollout reproduces identical arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .character import CharacterSpec

Array = np.ndarray

# penalty ground model, per contact point
CONTACT_KN = 1.0e4  # N/m normal stiffness
CONTACT_CD = 100.0  # N s/m normal damping
FRICTION_MU = 0.9
FRICTION_VSLIP = 0.05  # m/s scale of the kinetic friction profile

LIMIT_SPRING = 100.0  # N m/rad restoring torque inside a violated limit


@dataclass
class SimState:
    """Batch of character states; all arrays share the leading batch axis."""

    root_pos: Array  # (B, 2) reference point on the root body, world
    root_angle: Array  # (B,)
    joint_angles: Array  # (B, J)
    root_vel: Array  # (B, 2)
    root_ang_vel: Array  # (B,)
    joint_vels: Array  # (B, J)

    @classmethod
    def single(cls, root_pos, root_angle, joint_angles, root_vel=None,
               root_ang_vel=0.0, joint_vels=None) -> "SimState":
        j = np.asarray(joint_angles, dtype=np.float64)
        return cls(
            root_pos=np.asarray(root_pos, dtype=np.float64)[None],
            root_angle=np.asarray([root_angle], dtype=np.float64),
            joint_angles=j[None],
            root_vel=np.zeros((1, 2)) if root_vel is None else np.asarray(root_vel, dtype=np.float64)[None],
            root_ang_vel=np.asarray([root_ang_vel], dtype=np.float64),
            joint_vels=np.zeros((1, j.size)) if joint_vels is None else np.asarray(joint_vels, dtype=np.float64)[None],
        )

    @property
    def batch(self) -> int:
        return self.root_pos.shape[0]

    def copy(self) -> "SimState":
        return SimState(*(getattr(self, f).copy() for f in
                          ("root_pos", "root_angle", "joint_angles",
                           "root_vel", "root_ang_vel", "joint_vels")))

    def select(self, idx) -> "SimState":
        return SimState(*(getattr(self, f)[idx] for f in
                          ("root_pos", "root_angle", "joint_angles",
                           "root_vel", "root_ang_vel", "joint_vels")))

    @staticmethod
    def concat(states: list["SimState"]) -> "SimState":
        return SimState(*(np.concatenate([getattr(s, f) for s in states]) for f in
                          ("root_pos", "root_angle", "joint_angles",
                           "root_vel", "root_ang_vel", "joint_vels")))


class SimDivergence(RuntimeError):
    """Non-finite state appeared; carries the last valid state and a mask."""

    def __init__(self, last_valid: SimState, mask: Array) -> None:
        super().__init__(f"simulation diverged in {int(mask.sum())} of {mask.size} environments")
        self.last_valid = last_valid
        self.mask = mask


def pd_torque(target: Array, angle: Array, ang_vel: Array,
              kp: Array, kd: Array, limit: float = 300.0) -> Array:
    """Proportional-derivative joint torque, clamped to the actuator limit."""
    return np.clip(kp * (target - angle) - kd * ang_vel, -limit, limit)


def _rot(phi: Array, v: Array) -> Array:
    """Apply R(phi) to v; phi (...,), v (..., 2) or (2,)."""
    c, s = np.cos(phi), np.sin(phi)
    x, y = v[..., 0], v[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def _perp(v: Array) -> Array:
    """90-degree CCW rotation, the planar analog of omega x r."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


class Engine:
    def __init__(self, char: CharacterSpec, dt: float = 1.0 / 120.0,
                 gravity: float = 9.81, substeps_per_control: int = 6):
        self.char = char
        self.dt = float(dt)
        self.gravity = float(gravity)
        self.substeps_per_control = int(substeps_per_control)

        nb, nj = len(char.bodies), len(char.joints)
        self.nb, self.nj = nb, nj
        self.ndof = 3 + nj
        self.masses = np.array([b.mass for b in char.bodies])
        self.inertias = np.array([b.inertia for b in char.bodies])
        self.total_mass = self.masses.sum()
        self.kp = np.array([j.kp for j in char.joints])
        self.kd = np.array([j.kd for j in char.joints])
        self.limit_lo = np.array([j.limit_lo for j in char.joints])
        self.limit_hi = np.array([j.limit_hi for j in char.joints])
        self.parent = np.array([j.parent for j in char.joints])
        self.child = np.array([j.child for j in char.joints])
        self.d_par = np.array([j.parent_anchor for j in char.joints])
        self.d_child = np.array([char.bodies[j.child].joint_anchor for j in char.joints])

        # chain[b, j]: joint j lies on the path from the root to body b
        chain = np.zeros((nb, nj), dtype=bool)
        for ji, j in enumerate(char.joints):
            chain[j.child] = chain[j.parent]
            chain[j.child, ji] = True
        self.chain = chain

        # angular rows are configuration-independent: w[b] has 1 at the root
        # angle and at every chain joint of b
        w = np.zeros((nb, self.ndof))
        w[:, 2] = 1.0
        w[:, 3:] = chain
        self._m_angular = np.einsum("n,ni,nj->ij", self.inertias, w, w)
        self._w_ang = w

        self.contact_body = np.array(
            [bi for bi, b in enumerate(char.bodies) for _ in b.contacts], dtype=int
        )
        self.contact_offset = np.array(
            [list(pt) for b in char.bodies for pt in b.contacts], dtype=np.float64
        ).reshape(-1, 2)
        self.n_contacts = len(self.contact_body)
        self.ref_offset = np.array(char.ref_offset, dtype=np.float64)

    # -- kinematics ------------------------------------------------------------

    def _fk(self, root_angle: Array, joint_angles: Array,
            root_ang_vel: Array | None = None, joint_vels: Array | None = None):
        """Chain pass. Returns body angles, COM-relative positions (relative
        to the root body's COM), joint anchor positions, and if velocities are
        given, body angular velocities, relative velocities, and
        velocity-product accelerations."""
        bsz = root_angle.shape[0]
        phi = np.zeros((bsz, self.nb))
        rel = np.zeros((bsz, self.nb, 2))
        anchors = np.zeros((bsz, self.nj, 2))
        phi[:, 0] = root_angle
        with_vel = root_ang_vel is not None
        omega = vel = avp = None
        if with_vel:
            omega = np.zeros((bsz, self.nb))
            vel = np.zeros((bsz, self.nb, 2))
            avp = np.zeros((bsz, self.nb, 2))
            omega[:, 0] = root_ang_vel
        for ji in range(self.nj):
            p, c = self.parent[ji], self.child[ji]
            phi[:, c] = phi[:, p] + joint_angles[:, ji]
            r1 = _rot(phi[:, p], self.d_par[ji])
            r2 = _rot(phi[:, c], self.d_child[ji])
            anchors[:, ji] = rel[:, p] + r1
            rel[:, c] = anchors[:, ji] - r2
            if with_vel:
                omega[:, c] = omega[:, p] + joint_vels[:, ji]
                vel[:, c] = (vel[:, p] + omega[:, p, None] * _perp(r1)
                             - omega[:, c, None] * _perp(r2))
                avp[:, c] = (avp[:, p] - omega[:, p, None] ** 2 * r1
                             + omega[:, c, None] ** 2 * r2)
        return phi, rel, anchors, omega, vel, avp

    def _point_jacobian_cols(self, rel_pts: Array, anchors: Array, body_idx: Array) -> Array:
        """Angle-coordinate Jacobian columns for points rigidly attached to
        bodies, before the COM-coordinate correction. rel_pts (B, n, 2)."""
        bsz, n = rel_pts.shape[:2]
        cols = np.zeros((bsz, n, 2, 1 + self.nj))
        cols[:, :, :, 0] = _perp(rel_pts)
        on_chain = self.chain[body_idx]  # (n, nj)
        arm = _perp(rel_pts[:, :, None, :] - anchors[:, None, :, :])  # (B, n, nj, 2)
        cols[:, :, :, 1:] = np.where(on_chain[None, :, None, :], arm.transpose(0, 1, 3, 2), 0.0)
        return cols

    def _body_jacobians(self, rel: Array, anchors: Array):
        """Full (B, nb, 2, ndof) body-COM Jacobians in COM coordinates."""
        bsz = rel.shape[0]
        jac = np.zeros((bsz, self.nb, 2, self.ndof))
        jac[:, :, 0, 0] = 1.0
        jac[:, :, 1, 1] = 1.0
        cols = self._point_jacobian_cols(rel, anchors, np.arange(self.nb))
        # subtract the mass-weighted mean so COM columns stay exactly identity
        correction = np.einsum("n,bnxk->bxk", self.masses / self.total_mass, cols)
        jac[:, :, :, 2:] = cols - correction[:, None]
        return jac, correction

    # -- public state conversion -------------------------------------------------

    def _ref(self, root_angle: Array, root_ang_vel: Array):
        """World offset from the root body COM to the reference point, and
        the velocity that point has relative to the root body COM."""
        off = _rot(root_angle, self.ref_offset)
        return off, root_ang_vel[:, None] * _perp(off)

    def _to_internal(self, s: SimState):
        phi, rel, anchors, omega, vel, avp = self._fk(
            s.root_angle, s.joint_angles, s.root_ang_vel, s.joint_vels)
        w = self.masses / self.total_mass
        com_rel = np.einsum("n,bnx->bx", w, rel)
        vcom_rel = np.einsum("n,bnx->bx", w, vel)
        off, voff = self._ref(s.root_angle, s.root_ang_vel)
        q = np.concatenate([s.root_pos - off + com_rel, s.root_angle[:, None], s.joint_angles], axis=1)
        qd = np.concatenate([s.root_vel - voff + vcom_rel, s.root_ang_vel[:, None], s.joint_vels], axis=1)
        return q, qd

    def _to_public(self, q: Array, qd: Array) -> SimState:
        root_angle = q[:, 2]
        joint_angles = q[:, 3:]
        phi, rel, anchors, omega, vel, avp = self._fk(
            root_angle, joint_angles, qd[:, 2], qd[:, 3:])
        w = self.masses / self.total_mass
        com_rel = np.einsum("n,bnx->bx", w, rel)
        vcom_rel = np.einsum("n,bnx->bx", w, vel)
        off, voff = self._ref(root_angle, qd[:, 2])
        return SimState(
            root_pos=q[:, :2] - com_rel + off,
            root_angle=root_angle.copy(),
            joint_angles=joint_angles.copy(),
            root_vel=qd[:, :2] - vcom_rel + voff,
            root_ang_vel=qd[:, 2].copy(),
            joint_vels=qd[:, 3:].copy(),
        )

    # -- dynamics -------------------------------------------------------------------

    def _substep(self, q: Array, qd: Array, targets: Array) -> tuple[Array, Array]:
        bsz = q.shape[0]
        root_angle, joints = q[:, 2], q[:, 3:]
        phi, rel, anchors, omega, vel, avp = self._fk(root_angle, joints, qd[:, 2], qd[:, 3:])
        jac, correction = self._body_jacobians(rel, anchors)

        mass = np.einsum("n,bnxi,bnxj->bij", self.masses, jac, jac) + self._m_angular

        wmass = self.masses / self.total_mass
        acom = np.einsum("n,bnx->bx", wmass, avp)
        bias = np.einsum("n,bnxi,bnx->bi", self.masses, jac, avp - acom[:, None])

        force = np.zeros((bsz, self.ndof))
        force[:, 1] -= self.total_mass * self.gravity

        tau = self.kp * (targets - joints) - self.kd * qd[:, 3:]
        np.clip(tau, -self.char.torque_limit, self.char.torque_limit, out=tau)
        # soft restoring torque inside violated limits, before hard projection
        tau = tau + LIMIT_SPRING * (np.maximum(self.limit_lo - joints, 0.0)
                                    - np.maximum(joints - self.limit_hi, 0.0))
        force[:, 3:] += tau

        lhs = mass.copy()
        idx = np.arange(self.nj)
        lhs[:, 3 + idx, 3 + idx] += self.dt * self.kd

        if self.n_contacts:
            cb = self.contact_body
            rel_c = rel[:, cb] + _rot(phi[:, cb], self.contact_offset)  # (B, nc, 2)
            pos_c_y = q[:, 1:2] - np.einsum("n,bnx->bx", wmass, rel)[:, 1:2] + rel_c[..., 1]
            cols = self._point_jacobian_cols(rel_c, anchors, cb)
            jc = np.zeros((bsz, self.n_contacts, 2, self.ndof))
            jc[:, :, 0, 0] = 1.0
            jc[:, :, 1, 1] = 1.0
            jc[:, :, :, 2:] = cols - correction[:, None]
            v_c = np.einsum("bnxi,bi->bnx", jc, qd)
            depth = -pos_c_y
            raw_n = CONTACT_KN * depth - CONTACT_CD * v_c[..., 1]
            fn = np.where(depth > 0.0, np.maximum(raw_n, 0.0), 0.0)
            slip = np.tanh(v_c[..., 0] / FRICTION_VSLIP)
            ft = -FRICTION_MU * fn * slip
            f_c = np.stack([ft, fn], axis=-1)
            force += np.einsum("bnxi,bnx->bi", jc, f_c)
            # fold each force's velocity derivative into the implicit system;
            # the applied forces above stay explicit (normal stays >= 0), the
            # extra terms only damp the contact modes that dt cannot resolve
            cn_eff = np.where((depth > 0.0) & (raw_n > 0.0), CONTACT_CD, 0.0)
            ct_eff = FRICTION_MU * fn * (1.0 - slip * slip) / FRICTION_VSLIP
            lhs += self.dt * np.einsum("bn,bni,bnj->bij", cn_eff, jc[:, :, 1], jc[:, :, 1])
            lhs += self.dt * np.einsum("bn,bni,bnj->bij", ct_eff, jc[:, :, 0], jc[:, :, 0])
        qdd = np.linalg.solve(lhs, (force - bias)[..., None])[..., 0]

        qd_next = qd + self.dt * qdd
        q_next = q + self.dt * qd_next

        # hard projection keeps joints inside limits regardless of torques
        j = q_next[:, 3:]
        lo_hit = j < self.limit_lo
        hi_hit = j > self.limit_hi
        np.clip(j, self.limit_lo, self.limit_hi, out=j)
        jd = qd_next[:, 3:]
        jd[lo_hit & (jd < 0.0)] = 0.0
        jd[hi_hit & (jd > 0.0)] = 0.0
        return q_next, qd_next

    def _check(self, q: Array, qd: Array, prev: SimState) -> None:
        bad = ~(np.isfinite(q).all(axis=1) & np.isfinite(qd).all(axis=1))
        if bad.any():
            raise SimDivergence(prev, bad)

    def step(self, state: SimState, targets: Array) -> SimState:
        """One integrator substep of dt."""
        targets = np.asarray(targets, dtype=np.float64)
        q, qd = self._to_internal(state)
        q, qd = self._substep(q, qd, targets)
        self._check(q, qd, state)
        return self._to_public(q, qd)

    def control_step(self, state: SimState, targets: Array) -> SimState:
        """One control period: substeps_per_control substeps under fixed targets."""
        targets = np.asarray(targets, dtype=np.float64)
        q, qd = self._to_internal(state)
        for _ in range(self.substeps_per_control):
            q, qd = self._substep(q, qd, targets)
        self._check(q, qd, state)
        return self._to_public(q, qd)

    @property
    def control_dt(self) -> float:
        return self.dt * self.substeps_per_control

    # -- observation features ----------------------------------------------------------

    @property
    def feature_dim(self) -> int:
        return 8 * self.nb + 2

    def featurize(self, state: SimState) -> Array:
        """Per-body pose relative to the root frame plus world heights.

        Layout per body: [cos, sin of angle relative to root, position in the
        root frame (2), velocity in the root frame (2), angular velocity,
        world height], then the root's world up vector (2).
        """
        phi, rel, anchors, omega, vel, avp = self._fk(
            state.root_angle, state.joint_angles, state.root_ang_vel, state.joint_vels)
        theta = state.root_angle[:, None]
        d_ang = phi - theta
        off, voff = self._ref(state.root_angle, state.root_ang_vel)
        rel_ref = rel - off[:, None]
        pos_world = state.root_pos[:, None, :] + rel_ref
        vel_world = (state.root_vel - voff)[:, None, :] + vel
        pos_rf = _rot(-theta, rel_ref)
        vel_rf = _rot(-theta, vel_world)
        per_body = np.concatenate([
            np.cos(d_ang)[..., None], np.sin(d_ang)[..., None],
            pos_rf, vel_rf, omega[..., None], pos_world[..., 1:2],
        ], axis=-1)  # (B, nb, 8)
        up = np.stack([-np.sin(state.root_angle), np.cos(state.root_angle)], axis=-1)
        return np.concatenate([per_body.reshape(state.batch, -1), up], axis=1)

    # -- diagnostics --------------------------------------------------------------------

    def body_world(self, state: SimState):
        """World positions (B, nb, 2), angles, velocities of every body COM."""
        phi, rel, anchors, omega, vel, avp = self._fk(
            state.root_angle, state.joint_angles, state.root_ang_vel, state.joint_vels)
        off, voff = self._ref(state.root_angle, state.root_ang_vel)
        return (state.root_pos[:, None, :] + rel - off[:, None], phi,
                (state.root_vel - voff)[:, None, :] + vel, omega)

    def contact_forces(self, state: SimState) -> tuple[Array, Array]:
        """World contact positions (B, nc, 2) and forces (B, nc, 2) the
        penalty model would apply at this state."""
        q, qd = self._to_internal(state)
        phi, rel, anchors, omega, vel, avp = self._fk(q[:, 2], q[:, 3:], qd[:, 2], qd[:, 3:])
        jac, correction = self._body_jacobians(rel, anchors)
        wmass = self.masses / self.total_mass
        cb = self.contact_body
        rel_c = rel[:, cb] + _rot(phi[:, cb], self.contact_offset)
        com_rel = np.einsum("n,bnx->bx", wmass, rel)
        pos_c = q[:, None, :2] - com_rel[:, None] + rel_c
        cols = self._point_jacobian_cols(rel_c, anchors, cb)
        jc = np.zeros((state.batch, self.n_contacts, 2, self.ndof))
        jc[:, :, 0, 0] = 1.0
        jc[:, :, 1, 1] = 1.0
        jc[:, :, :, 2:] = cols - correction[:, None]
        v_c = np.einsum("bnxi,bi->bnx", jc, qd)
        depth = -pos_c[..., 1]
        fn = np.where(depth > 0.0,
                      np.maximum(CONTACT_KN * depth - CONTACT_CD * v_c[..., 1], 0.0), 0.0)
        ft = -FRICTION_MU * fn * np.tanh(v_c[..., 0] / FRICTION_VSLIP)
        return pos_c, np.stack([ft, fn], axis=-1)

    def energy(self, state: SimState) -> Array:
        pos, phi, vel, omega = self.body_world(state)
        ke = 0.5 * np.einsum("n,bnx,bnx->b", self.masses, vel, vel)
        ke += 0.5 * np.einsum("n,bn,bn->b", self.inertias, omega, omega)
        pe = self.gravity * np.einsum("n,bn->b", self.masses, pos[..., 1])
        return ke + pe

    def momentum(self, state: SimState) -> tuple[Array, Array]:
        """Linear momentum (B, 2) and angular momentum about the system COM (B,)."""
        pos, phi, vel, omega = self.body_world(state)
        lin = np.einsum("n,bnx->bx", self.masses, vel)
        com = np.einsum("n,bnx->bx", self.masses, pos) / self.total_mass
        vcom = lin / self.total_mass
        r = pos - com[:, None]
        v = vel - vcom[:, None]
        ang = np.einsum("n,bn->b", self.masses, r[..., 0] * v[..., 1] - r[..., 1] * v[..., 0])
        ang += np.einsum("n,bn->b", self.inertias, omega)
        return lin, ang
