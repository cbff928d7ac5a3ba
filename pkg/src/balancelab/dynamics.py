"""Reduced-coordinate dynamics for planar link trees.

Planar spatial vectors are (omega, vx, vz) with moments taken about the
world origin, so every body and every DOF shares one coordinate frame and
no transforms are needed:

  * a revolute DOF about world point a has motion subspace S = (1, a_z, -a_x)
  * root translation DOFs are S = (0, 1, 0) and (0, 0, 1)
  * the spatial inertia of a body with mass m, COM c and rod inertia Ic is
        [[Ic + m|c|^2, -m c_z,  m c_x],
         [-m c_z,       m,      0    ],
         [ m c_x,       0,      m    ]]

The mass matrix is composite-rigid-body (subtree inertias paired with DOF
subspaces); the bias is Newton-Euler with qdd = 0, which in the planar case
leaves only centripetal and gravity terms because angular rates add along
any chain. DOF counts stay at most 11, so the solve is a direct one and
lives with the caller.
"""

from __future__ import annotations

import numpy as np

from .skeleton import GRAVITY, FrameKin


def _effective_params(kin: FrameKin, mass, inertia, com_offset):
    """Broadcast per-episode overrides against the skeleton defaults."""
    t = kin.skel.tables
    m = t.mass if mass is None else np.asarray(mass)
    inr = t.inertia if inertia is None else np.asarray(inertia)
    return m, inr, com_offset


def dof_subspaces(kin: FrameKin) -> np.ndarray:
    """(B, n, 3) motion subspace per DOF in world-origin coordinates."""
    B, n = kin.q.shape[0], kin.skel.num_dof
    S = np.zeros((B, n, 3))
    S[:, 0, 1] = 1.0
    S[:, 1, 2] = 1.0
    S[:, 2, 0] = 1.0
    S[:, 2, 1] = kin.q[:, 1]
    S[:, 2, 2] = -kin.q[:, 0]
    S[:, 3:, 0] = 1.0
    S[:, 3:, 1] = kin.joint_anchor[:, :, 1]
    S[:, 3:, 2] = -kin.joint_anchor[:, :, 0]
    return S


def _dof_subtree_links(skel):
    """For each DOF, the link whose subtree it accelerates (root DOFs: base)."""
    t = skel.tables
    return np.concatenate([np.full(3, t.base), t.joint_child])


def _dof_related(skel):
    """Pairs (i, j) with DOF i an ancestor of DOF j (or j itself).

    Ancestors are strictly shallower in the tree, so each unordered pair
    shows up exactly once and j always owns the deeper subtree; joint index
    order plays no role.
    """
    t = skel.tables
    n = skel.num_dof
    pairs = []
    for j in range(n):
        if j < 3:
            ancestors = range(j + 1)
        else:
            child = t.joint_child[j - 3]
            ancestors = [0, 1, 2] + [3 + i for i in np.flatnonzero(t.ancestry[child])]
        pairs.extend((i, j) for i in ancestors)
    return pairs


def mass_matrix(kin: FrameKin, mass=None, inertia=None, com_offset=None) -> np.ndarray:
    """(B, n, n) joint-space inertia, composite-rigid-body style."""
    skel = kin.skel
    t = skel.tables
    m, inr, com_offset = _effective_params(kin, mass, inertia, com_offset)
    B, L, n = kin.q.shape[0], skel.num_links, skel.num_dof

    c = kin.link_com(com_offset)                      # (B, L, 2)
    m_b = np.broadcast_to(m, (B, L))
    i_b = np.broadcast_to(inr, (B, L))
    Isp = np.zeros((B, L, 3, 3))
    Isp[:, :, 0, 0] = i_b + m_b * (c[..., 0] ** 2 + c[..., 1] ** 2)
    Isp[:, :, 0, 1] = Isp[:, :, 1, 0] = -m_b * c[..., 1]
    Isp[:, :, 0, 2] = Isp[:, :, 2, 0] = m_b * c[..., 0]
    Isp[:, :, 1, 1] = Isp[:, :, 2, 2] = m_b

    comp = Isp.copy()
    for l in t.topo[:0:-1]:
        comp[:, t.joint_parent[t.parent_joint[l]]] += comp[:, l]

    S = dof_subspaces(kin)
    sub = _dof_subtree_links(skel)
    M = np.zeros((B, n, n))
    for i, j in _dof_related(skel):
        # the deeper DOF of the pair owns the subtree: that is j by construction
        u = np.einsum("bpq,bq->bp", comp[:, sub[j]], S[:, j])
        M[:, i, j] = M[:, j, i] = np.einsum("bp,bp->b", S[:, i], u)
    return M


def bias_forces(kin: FrameKin, mass=None, inertia=None, com_offset=None,
                gravity: float = GRAVITY) -> np.ndarray:
    """(B, n) Coriolis/centrifugal plus gravity generalized forces.

    Newton-Euler sweep at qdd = 0. Angular accelerations vanish identically
    (planar rates are sums of ancestor rates), so the forward pass carries
    only centripetal point accelerations.
    """
    skel = kin.skel
    t = skel.tables
    m, _, com_offset = _effective_params(kin, mass, inertia, com_offset)
    B, L, n = kin.q.shape[0], skel.num_links, skel.num_dof

    a_org = np.zeros((B, L, 2))
    for l in t.topo[1:]:
        j = t.parent_joint[l]
        p = t.joint_parent[j]
        arm = kin.joint_anchor[:, j] - kin.link_pos[:, p]
        a_org[:, l] = a_org[:, p] - kin.link_angvel[:, p, None] ** 2 * arm

    c = kin.link_com(com_offset)
    a_com = a_org - kin.link_angvel[..., None] ** 2 * (c - kin.link_pos)

    m_b = np.broadcast_to(m, (B, L))
    F = m_b[..., None] * a_com
    F[..., 1] += m_b * gravity                       # m (a - g), g = (0, -gravity)
    fhat = np.zeros((B, L, 3))
    fhat[..., 0] = c[..., 0] * F[..., 1] - c[..., 1] * F[..., 0]
    fhat[..., 1] = F[..., 0]
    fhat[..., 2] = F[..., 1]

    for l in t.topo[:0:-1]:
        fhat[:, t.joint_parent[t.parent_joint[l]]] += fhat[:, l]

    S = dof_subspaces(kin)
    sub = _dof_subtree_links(skel)
    bias = np.empty((B, n))
    for d in range(n):
        bias[:, d] = np.einsum("bp,bp->b", S[:, d], fhat[:, sub[d]])
    return bias


def total_energy(kin: FrameKin, mass=None, inertia=None, com_offset=None,
                 gravity: float = GRAVITY) -> np.ndarray:
    """(B,) kinetic plus gravitational potential energy."""
    skel = kin.skel
    m, inr, com_offset = _effective_params(kin, mass, inertia, com_offset)
    B, L = kin.q.shape[0], skel.num_links
    m_b = np.broadcast_to(m, (B, L))
    i_b = np.broadcast_to(inr, (B, L))
    v = kin.link_com_vel(com_offset)
    c = kin.link_com(com_offset)
    kinetic = 0.5 * (m_b * (v**2).sum(-1) + i_b * kin.link_angvel**2).sum(-1)
    potential = (m_b * gravity * c[..., 1]).sum(-1)
    return kinetic + potential
