"""Observables of discrete rod states.

Every integral uses the assembly quadrature, so the discrete balance laws
for energy and momenta hold for exactly these functionals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from phrod import kinematics as kin


def energy(x, system):
    """Total energy ``0.5 v.T M_o v + 0.5 sum_b sigma_b.T C_b sigma_b``."""
    return system.hamiltonian(x)


def momenta(x, system):
    """Linear and angular momentum about the origin.

    ``l = int (phi x rhoA v_phi + sum_a M_aa d_a x v_a) ds``.
    """
    q, v, _, _ = system.split(x)
    mat = system.material
    qe = system.gather(q)
    ve = system.gather(v)
    phi, _, d, _ = system.gauss_fields(qe)
    vphi, _, vd, _ = system.gauss_fields(ve)
    w = system.wj[None, :, None]
    p = mat.rhoA * np.sum(w * vphi, axis=(0, 1))
    spin = mat.Mrho11 * np.cross(d[..., 0:3], vd[..., 0:3]) + mat.Mrho22 * np.cross(
        d[..., 3:6], vd[..., 3:6]
    )
    l = np.sum(w * (mat.rhoA * np.cross(phi, vphi) + spin), axis=(0, 1))
    return p, l


def center_of_mass(x, system):
    """Arc-length average of the centerline ``(1/L) int phi ds``."""
    q = x[:system.n_q]
    phi = system.nodal_phi(q)
    return system.node_weights @ phi / system.mesh.L


def power_balance_violation(H_prev, H_next, work, dissipation):
    """``H_{n+1} - H_n - W_ext + D``, zero for an exact discrete balance."""
    return H_next - H_prev - work + dissipation


def strain_consistency(x, system):
    """L2 norms of the gap between mixed and displacement-derived strains.

    Returns ``(gamma_gap, kappa_gap)``, each of length three, with
    ``gap = (C sigma_0 + eps_ref) - eps(q)`` evaluated at the Gauss points of
    the elastic branch.  On rigid slots ``C = 0`` and the gap measures how
    far the interpolated displacements violate the locked strain.
    """
    q, _, sig, _ = system.split(x)
    gamma, kappa = system.gauss_strains(q)
    se = sig[0][system.sdof]
    c = system.branches.compliance[0]
    mixed = np.einsum("grk,er->egk", system.Pg, se) * c
    mixed[..., 2] += 1.0
    gap = mixed - np.concatenate([gamma, kappa], axis=-1)
    norms = np.sqrt(np.einsum("g,egk->k", system.wj, gap**2))
    return norms[:3], norms[3:]


def constraint_residuals(x, system):
    """Orthonormality residuals ``g`` at every node, shape ``(n_n, 6)``."""
    d = system.nodal_d(x[:system.n_q])
    return np.array([kin.constraint_g(di) for di in d])


def probe(x, system, node):
    """Position, velocity and frame-relative velocity ``R.T v`` at a node."""
    q, v, _, _ = system.split(x)
    pos = system.nodal_phi(q)[node]
    vel = system.nodal_phi(v)[node]
    R = kin.rotation_from_directors(system.nodal_d(q)[node])
    return pos, vel, R.T @ vel


@dataclass
class StepRecord:
    """Diagnostics of one accepted time step (or of the initial state)."""

    t: float
    H: float
    W_ext: float
    D: float
    dH: float
    dE: float
    p: np.ndarray
    l: np.ndarray
    com: np.ndarray
    g_max: float
    g_mid: np.ndarray
    tip_position: np.ndarray
    tip_velocity: np.ndarray
    tip_velocity_local: np.ndarray
    gamma_gap: np.ndarray
    kappa_gap: np.ndarray
    iterations: int = 0
    residual_norm: float = 0.0
    tau: np.ndarray = field(default_factory=lambda: np.zeros(0))


def make_record(system, x, t, tip_node, mid_node, H_prev=None, work=0.0, dissipation=0.0,
                iterations=0, residual_norm=0.0, tau=()):
    H = energy(x, system)
    dH = 0.0 if H_prev is None else H - H_prev
    dE = 0.0 if H_prev is None else power_balance_violation(H_prev, H, work, dissipation)
    p, l = momenta(x, system)
    g = constraint_residuals(x, system)
    pos, vel, vloc = probe(x, system, tip_node)
    gg, kg = strain_consistency(x, system)
    return StepRecord(
        t=t, H=H, W_ext=work, D=dissipation, dH=dH, dE=dE, p=p, l=l,
        com=center_of_mass(x, system), g_max=float(np.max(np.abs(g))), g_mid=g[mid_node],
        tip_position=pos, tip_velocity=vel, tip_velocity_local=vloc,
        gamma_gap=gg, kappa_gap=kg, iterations=iterations, residual_norm=residual_norm,
        tau=np.asarray(tau, dtype=float),
    )
