"""Global matrices of the semi-discrete port-Hamiltonian rod.

The state is ``x = (q, v, sigma_0, ..., sigma_m, lambda)``.  Strains are
homogeneous quadratics in the nodal displacements, so the strain-rate
operator at a Gauss point is linear in ``q``.  :class:`RodSystem` stores
that operator as a constant third-order tensor per Gauss point and
contracts it with element vectors, which yields every state-dependent
block together with its exact derivative.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from phrod import kinematics as kin
from phrod.constitutive import ConfigurationError, branch_split


def _coo(rows, cols, vals, shape):
    return sp.coo_matrix(
        (np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape
    ).tocsr()


def _block_indices(row_idx, col_idx):
    """Broadcast per-element row and column index arrays to block shape."""
    r = np.broadcast_to(row_idx[:, :, None], row_idx.shape + (col_idx.shape[1],))
    c = np.broadcast_to(col_idx[:, None, :], r.shape)
    return r, c


class RodSystem:
    """Mesh, material and precomputed element operators for one rod.

    Parameters
    ----------
    mesh : RodMesh
    material : MaterialModel
    branches : sequence of MaxwellBranch
        Viscous branches; empty for a purely elastic rod.
    elastic_fraction : float, optional
        Share of the elastic branch, see :func:`branch_split`.
    """

    def __init__(self, mesh, material, branches=(), elastic_fraction=None):
        self.mesh = mesh
        self.material = material
        self.branch_specs = tuple(branches)
        self.branches = branch_split(material, branches, elastic_fraction)
        self.n_branches = self.branches.count

        self.n_q = mesh.n_q
        self.n_s = mesh.n_sigma
        self.off_v = self.n_q
        self.off_s = 2 * self.n_q
        self.off_l = self.off_s + self.n_branches * self.n_s
        self.n_x = self.off_l + mesh.n_lambda

        self.qdof = mesh.element_q_dofs()
        self.sdof = mesh.element_sigma_dofs()
        self.nqe = self.qdof.shape[1]
        self.nse = self.sdof.shape[1]
        self._build_interpolation()
        self._build_strain_tensor()
        self._build_mass()
        self._build_compliance()

    # ------------------------------------------------------------------
    # precomputation
    def _build_interpolation(self):
        m = self.mesh
        p1 = m.p + 1
        ng = len(m.xi_g)
        nphi = 3 * p1
        jac = m.jacobian
        self.wj = m.w_g * jac
        eye3 = np.eye(3)
        eye9 = np.eye(9)
        self.I_phi = np.zeros((ng, 3, self.nqe))
        self.I_phis = np.zeros((ng, 3, self.nqe))
        self.I_d = np.zeros((ng, 9, self.nqe))
        self.I_ds = np.zeros((ng, 9, self.nqe))
        for g in range(ng):
            for a in range(p1):
                self.I_phi[g, :, 3 * a:3 * a + 3] = m.N_g[g, a] * eye3
                self.I_phis[g, :, 3 * a:3 * a + 3] = m.dN_g[g, a] / jac * eye3
                cols = slice(nphi + 9 * a, nphi + 9 * a + 9)
                self.I_d[g, :, cols] = m.N_g[g, a] * eye9
                self.I_ds[g, :, cols] = m.dN_g[g, a] / jac * eye9
        # (phi_s, d, d_s) stacked, as used by the actuation kernel
        self.I_X = np.concatenate([self.I_phis, self.I_d, self.I_ds], axis=1)

    def _build_strain_tensor(self):
        ng = len(self.wj)
        nqe = self.nqe
        Tg = np.zeros((ng, 6, nqe, nqe))
        for g in range(ng):
            for j in range(nqe):
                phi_s = self.I_phis[g, :, j]
                d = self.I_d[g, :, j]
                d_s = self.I_ds[g, :, j]
                R = kin.rotation_from_directors(d)
                # linear map v -> (Gamma_dot, K_dot) with q = e_j frozen
                Tg[g, :3, :, j] = R.T @ self.I_phis[g] + kin.matrix_JN(phi_s).T @ self.I_d[g]
                Tg[g, 3:, :, j] = kin.matrix_L(d_s) @ self.I_d[g] - kin.matrix_L(d) @ self.I_ds[g]
        self.Tg = Tg
        p = self.mesh.p
        Pg = np.zeros((ng, 6 * p, 6))
        for g in range(ng):
            for j in range(p):
                for c in range(3):
                    Pg[g, 3 * j + c, c] = self.mesh.Psi_g[g, j]
                    Pg[g, 3 * p + 3 * j + c, 3 + c] = self.mesh.Psi_g[g, j]
        self.Pg = Pg
        # element structure tensor: J_e(q)[r, i] = S[r, i, j] q_j
        self.S = np.einsum("g,grk,gkij->rij", self.wj, Pg, Tg)

    def _build_mass(self):
        m = self.mesh
        p1 = m.p + 1
        Me = np.einsum("g,ga,gb->ab", self.wj, m.N_g, m.N_g)
        nodes = np.array([m.element_nodes(e) for e in range(m.n_e)])
        r, c = _block_indices(nodes, nodes)
        vals = np.broadcast_to(Me, (m.n_e, p1, p1))
        self.M_phi_scalar = _coo(r, c, vals, (m.n_nodes, m.n_nodes))
        self.M_phi = sp.kron(self.M_phi_scalar, sp.eye(3), format="csr")
        self.M_d = sp.kron(self.M_phi_scalar, sp.csr_matrix(self.material.Mrho), format="csr")
        self.M_o = sp.block_diag(
            [self.material.rhoA * self.M_phi, self.M_d], format="csr"
        )
        # weights of the integral of a nodal field, used for momenta
        self.node_weights = np.asarray(self.M_phi_scalar.sum(axis=0)).ravel()

    def _build_compliance(self):
        b = self.branches
        self.C_e = np.einsum("g,grk,bk,gsk->brs", self.wj, self.Pg, b.compliance, self.Pg)
        self.Vinv_e = np.einsum("g,grk,bk,gsk->brs", self.wj, self.Pg, b.inv_viscosity, self.Pg)
        r, c = _block_indices(self.sdof, self.sdof)
        shape = (self.n_s, self.n_s)
        ne = self.mesh.n_e
        self.C = [_coo(r, c, np.broadcast_to(self.C_e[k], (ne,) + self.C_e[k].shape), shape)
                  for k in range(b.count)]
        self.Vinv = [_coo(r, c, np.broadcast_to(self.Vinv_e[k], (ne,) + self.Vinv_e[k].shape), shape)
                     for k in range(b.count)]
        # stress slots of viscous branches that are locked carry no unknown
        slot_of_local = np.concatenate([np.tile(np.arange(3), self.mesh.p),
                                        np.tile(np.arange(3, 6), self.mesh.p)])
        rigid_local = b.rigid[slot_of_local]
        self.rigid_sigma = np.zeros(self.n_s, dtype=bool)
        self.rigid_sigma[self.sdof[:, rigid_local].ravel()] = True

    # ------------------------------------------------------------------
    # state helpers
    def split(self, x):
        """Views ``(q, v, [sigma_b], lam)`` into a state vector."""
        q = x[:self.n_q]
        v = x[self.off_v:self.off_v + self.n_q]
        sig = [x[self.off_s + b * self.n_s:self.off_s + (b + 1) * self.n_s]
               for b in range(self.n_branches)]
        lam = x[self.off_l:]
        return q, v, sig, lam

    def zeros(self):
        return np.zeros(self.n_x)

    def nodal_phi(self, q):
        return q[:3 * self.mesh.n_nodes].reshape(-1, 3)

    def nodal_d(self, q):
        return q[3 * self.mesh.n_nodes:].reshape(-1, 9)

    def gather(self, q):
        return q[self.qdof]

    def element_structure(self, qe):
        """Element blocks of ``J_sigma_v(q)``, shape ``(n_e, 6p, 12(p+1))``."""
        return np.einsum("rij,ej->eri", self.S, qe)

    def gauss_B(self, qe):
        """Strain-rate operators at Gauss points, shape ``(n_e, n_g, 6, nqe)``."""
        return np.einsum("gkij,ej->egki", self.Tg, qe)

    def gauss_fields(self, qe):
        """Interpolated ``(phi, phi_s, d, d_s)`` at Gauss points."""
        f = lambda I: np.einsum("gki,ei->egk", I, qe)  # noqa: E731
        return f(self.I_phi), f(self.I_phis), f(self.I_d), f(self.I_ds)

    def gauss_strains(self, q):
        """Displacement-derived ``(Gamma, K)`` at Gauss points, ``(n_e, n_g, 3)`` each."""
        _, phi_s, d, d_s = self.gauss_fields(self.gather(q))
        d1, d2, d3 = d[..., 0:3], d[..., 3:6], d[..., 6:9]
        d1s, d2s, d3s = d_s[..., 0:3], d_s[..., 3:6], d_s[..., 6:9]
        dot = lambda a, b: np.sum(a * b, axis=-1)  # noqa: E731
        gamma = np.stack([dot(d1, phi_s), dot(d2, phi_s), dot(d3, phi_s)], axis=-1)
        kappa = 0.5 * np.stack(
            [dot(d3, d2s) - dot(d2, d3s), dot(d1, d3s) - dot(d3, d1s), dot(d2, d1s) - dot(d1, d2s)],
            axis=-1,
        )
        return gamma, kappa

    # ------------------------------------------------------------------
    # global matrices
    def structure_matrix(self, q):
        """Sparse ``J_sigma_v(q)`` mapping nodal velocities to one stress set."""
        Je = self.element_structure(self.gather(q))
        r, c = _block_indices(self.sdof, self.qdof)
        return _coo(r, c, Je, (self.n_s, self.n_q))

    def hamiltonian(self, x):
        q, v, sig, lam = self.split(x)
        H = 0.5 * v @ (self.M_o @ v)
        for b in range(self.n_branches):
            H += 0.5 * sig[b] @ (self.C[b] @ sig[b])
        return float(H)

    def hamiltonian_gradient(self, x):
        """``E.T z(x)``, the exact gradient of the Hamiltonian."""
        q, v, sig, lam = self.split(x)
        out = np.zeros(self.n_x)
        out[self.off_v:self.off_v + self.n_q] = self.M_o @ v
        for b in range(self.n_branches):
            o = self.off_s + b * self.n_s
            out[o:o + self.n_s] = self.C[b] @ sig[b]
        return out

    def costate(self, x):
        """``z = Q x``: zero on the displacement block, identity elsewhere."""
        z = np.array(x, dtype=float, copy=True)
        z[:self.n_q] = 0.0
        return z

    def descriptor(self):
        """Constant descriptor matrix ``E = diag(I, M_o, C_0, ..., C_m, 0)``."""
        blocks = [sp.eye(self.n_q), self.M_o] + list(self.C) + [
            sp.csr_matrix((self.mesh.n_lambda, self.mesh.n_lambda))]
        return sp.block_diag(blocks, format="csr")

    def dissipation_matrix(self):
        blocks = [sp.csr_matrix((2 * self.n_q, 2 * self.n_q))] + list(self.Vinv) + [
            sp.csr_matrix((self.mesh.n_lambda, self.mesh.n_lambda))]
        return sp.block_diag(blocks, format="csr")


def assemble_mass(system):
    """Return ``(rhoA * M_phi, M_d)`` as sparse matrices."""
    return system.material.rhoA * system.M_phi, system.M_d


def assemble_compliance(system, branch=0):
    """Return ``(C_N, C_M)`` of one branch as sparse matrices."""
    C = system.C[branch]
    h = system.n_s // 2
    return C[:h, :h], C[h:, h:]


def assemble_structure(system, q):
    """Return the blocks ``(G_phiN, G_dN, G_dM)`` of the structure matrix."""
    J = system.structure_matrix(q)
    h = system.n_s // 2
    nphi = 3 * system.mesh.n_nodes
    return J[:h, :nphi], J[:h, nphi:], J[h:, nphi:]


def assemble_constraint(system, q):
    """Block-diagonal nodal constraint Jacobian ``G_d`` of shape ``(6 n_n, n_q)``.

    Columns are global ``q`` indices so that the matrix acts on ``v`` directly.
    """
    d = system.nodal_d(q)
    nn = system.mesh.n_nodes
    blocks = np.array([kin.constraint_jacobian(di) for di in d])
    rows = np.arange(6 * nn).reshape(nn, 6)
    cols = (3 * nn + np.arange(9 * nn)).reshape(nn, 9)
    r, c = _block_indices(rows, cols)
    return _coo(r, c, blocks, (6 * nn, system.n_q))


def assemble_ports(system, q, neumann_nodes, dirichlet_nodes=()):
    """Distributed and boundary port matrices.

    Returns
    -------
    B_omega : sparse, shape ``(n_q, 6 n_n)``
        Maps nodal values of distributed force and moment densities to
        generalized forces, ``diag(M_phi, B_omega_m)``.
    B_bnd : sparse, shape ``(n_q, 6 len(neumann_nodes))``
        Columns ``(I; T(d_k))`` at each Neumann node ``k``.
    """
    clash = set(neumann_nodes) & set(dirichlet_nodes)
    if clash:
        raise ConfigurationError(f"nodes {sorted(clash)} are both loaded and clamped")
    m = system.mesh
    nn = m.n_nodes
    qe = system.gather(q)
    _, _, d, _ = system.gauss_fields(qe)
    # B_omega_m = int Phi_d^T T(d^h) Phi_phi ds, element blocks (9(p+1), 3(p+1))
    p1 = m.p + 1
    blocks = np.zeros((m.n_e, 9 * p1, 3 * p1))
    for g in range(len(system.wj)):
        Tg = -0.5 * np.concatenate(
            [kin.skew_batch(d[:, g, 0:3]), kin.skew_batch(d[:, g, 3:6]), kin.skew_batch(d[:, g, 6:9])],
            axis=1,
        )
        for a in range(p1):
            for b in range(p1):
                blocks[:, 9 * a:9 * a + 9, 3 * b:3 * b + 3] += (
                    system.wj[g] * m.N_g[g, a] * m.N_g[g, b] * Tg
                )
    nodes = np.array([m.element_nodes(e) for e in range(m.n_e)])
    rows = (3 * nn + 9 * nodes[:, :, None] + np.arange(9)).reshape(m.n_e, -1)
    cols = (3 * nodes[:, :, None] + np.arange(3)).reshape(m.n_e, -1)
    r, c = _block_indices(rows, cols)
    Bm = _coo(r, c, blocks, (system.n_q, 3 * nn))
    Bphi = sp.vstack([system.M_phi, sp.csr_matrix((9 * nn, 3 * nn))])
    B_omega = sp.hstack([Bphi, Bm], format="csr")

    dn = system.nodal_d(q)
    B_bnd = sp.lil_matrix((system.n_q, 6 * len(neumann_nodes)))
    for i, k in enumerate(neumann_nodes):
        B_bnd[3 * k:3 * k + 3, 6 * i:6 * i + 3] = np.eye(3)
        B_bnd[3 * nn + 9 * k:3 * nn + 9 * k + 9, 6 * i + 3:6 * i + 6] = kin.matrix_T(dn[k])
    return B_omega, B_bnd.tocsr()


def actuation_kernel(kind, rho, X, need_derivative=True):
    """Stress resultants induced by one actuator per unit magnitude.

    Parameters
    ----------
    kind : {"pneumatic", "tendon"}
    rho : (2,) offsets in the cross-section frame.
    X : (..., 21) stacked ``(phi_s, d, d_s)`` at evaluation points.

    Returns
    -------
    sigma_u : (..., 6)
        ``(R.T t, R.T (rho x t))`` with ``t`` the line-of-action direction.
    dsigma : (..., 6, 21) or None
    """
    phi_s = X[..., 0:3]
    d = [X[..., 3:6], X[..., 6:9], X[..., 9:12]]
    d_s = [X[..., 12:15], X[..., 15:18]]
    r1, r2 = rho
    rvec = r1 * d[0] + r2 * d[1]
    shape = X.shape[:-1]
    if kind == "pneumatic":
        t = d[2]
        dt = np.zeros(shape + (3, 21))
        dt[..., :, 9:12] = np.eye(3)
    elif kind == "tendon":
        rs = phi_s + r1 * d_s[0] + r2 * d_s[1]
        nrm = np.linalg.norm(rs, axis=-1)
        if np.any(nrm < 1e-12):
            raise FloatingPointError("tendon path tangent vanishes at a quadrature point")
        t = rs / nrm[..., None]
        P = (np.eye(3) - t[..., :, None] * t[..., None, :]) / nrm[..., None, None]
        dt = np.zeros(shape + (3, 21))
        dt[..., :, 0:3] = P
        dt[..., :, 12:15] = r1 * P
        dt[..., :, 15:18] = r2 * P
    else:
        raise ConfigurationError(f"unknown actuator kind {kind!r}")
    w = np.cross(rvec, t)
    sigma = np.empty(shape + (6,))
    for i in range(3):
        sigma[..., i] = np.sum(d[i] * t, axis=-1)
        sigma[..., 3 + i] = np.sum(d[i] * w, axis=-1)
    if not need_derivative:
        return sigma, None
    drho = np.zeros(shape + (3, 21))
    drho[..., :, 3:6] = r1 * np.eye(3)
    drho[..., :, 6:9] = r2 * np.eye(3)
    dw = -np.einsum("...ij,...jk->...ik", kin.skew_batch(t), drho) + np.einsum(
        "...ij,...jk->...ik", kin.skew_batch(rvec), dt
    )
    dsig = np.zeros(shape + (6, 21))
    for i in range(3):
        sl = slice(3 + 3 * i, 6 + 3 * i)
        dsig[..., i, :] = np.einsum("...j,...jk->...k", d[i], dt)
        dsig[..., i, sl] += t
        dsig[..., 3 + i, :] = np.einsum("...j,...jk->...k", d[i], dw)
        dsig[..., 3 + i, sl] += w
    return sigma, dsig


def assemble_actuation(system, q, actuators):
    """Actuation port ``B_tau(q)``, one column per actuator.

    Column ``k`` equals ``-sum_g w_g B_g(q).T sigma_u`` so that the
    momentum equation receives ``B_tau tau``.
    """
    qe = system.gather(q)
    X = np.einsum("gki,ei->egk", system.I_X, qe)
    Bg = system.gauss_B(qe)
    out = np.zeros((system.n_q, len(actuators)))
    for k, (kind, rho) in enumerate(actuators):
        sig, _ = actuation_kernel(kind, rho, X, need_derivative=False)
        fe = -np.einsum("g,egki,egk->ei", system.wj, Bg, sig)
        np.add.at(out[:, k], system.qdof, fe)
    return out


def assemble_J(system, q):
    """Skew-symmetric structure matrix of the full descriptor system."""
    Js = system.structure_matrix(q)
    G = assemble_constraint(system, q)
    nq, ns, nl = system.n_q, system.n_s, system.mesh.n_lambda
    nb = system.n_branches
    Z = lambda a, b: sp.csr_matrix((a, b))  # noqa: E731
    row_q = [Z(nq, nq), sp.eye(nq)] + [Z(nq, ns)] * nb + [Z(nq, nl)]
    row_v = [-sp.eye(nq), Z(nq, nq)] + [-Js.T] * nb + [-G.T]
    rows_s = [[Z(ns, nq), Js] + [Z(ns, ns)] * nb + [Z(ns, nl)] for _ in range(nb)]
    row_l = [Z(nl, nq), G] + [Z(nl, ns)] * nb + [Z(nl, nl)]
    return sp.bmat([row_q, row_v] + rows_s + [row_l], format="csr")
