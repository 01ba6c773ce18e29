"""Implicit midpoint integration of the rod DAE with Newton's method.

All state-dependent terms are evaluated at the midpoint state, so the
discrete energy balance and the nodal orthonormality constraints hold up to
the Newton tolerance.  Clamped degrees of freedom are fixed before the
solve and eliminated from the linear systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from phrod import kinematics as kin
from phrod.assembly import RodSystem, actuation_kernel
from phrod.constitutive import ConfigurationError


class StepFailure(RuntimeError):
    """Newton's method failed to converge within one time step."""

    def __init__(self, message, step=None, t=None, residual_norm=None, iterations=None):
        super().__init__(message)
        self.step = step
        self.t = t
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass(frozen=True)
class SolverSettings:
    """Time grid and Newton controls.

    ``eps_newton`` is an absolute bound on the Euclidean residual norm.
    ``jacobian_mode`` is ``"analytic"`` or ``"fd"``; in the latter case
    ``fd_step`` is the relative central-difference increment.
    """

    h: float
    t_end: float
    eps_newton: float = 1e-10
    max_newton_iters: int = 25
    jacobian_mode: str = "analytic"
    fd_step: float = 1e-7

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigurationError(f"time step must be positive, got {self.h!r}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ConfigurationError(f"t_end must be positive, got {self.t_end!r}")
        if not self.eps_newton > 0:
            raise ConfigurationError("Newton tolerance must be positive")
        if self.jacobian_mode not in ("analytic", "fd"):
            raise ConfigurationError(f"unknown jacobian mode {self.jacobian_mode!r}")
        if int(self.max_newton_iters) != self.max_newton_iters or self.max_newton_iters < 1:
            raise ConfigurationError("max_newton_iters must be a positive integer")

    @property
    def n_steps(self):
        n = round(self.t_end / self.h)
        if n < 1 or abs(n * self.h - self.t_end) > 1e-9 * self.t_end:
            raise ConfigurationError(f"t_end={self.t_end} is not a multiple of h={self.h}")
        return int(n)


@dataclass(frozen=True)
class Clamp:
    """Clamped components at one node; values are held at their initial state."""

    node: int
    phi: tuple = (True, True, True)
    d: tuple = (True,) * 9


@dataclass(frozen=True)
class DirichletSpec:
    clamps: tuple = ()

    @property
    def nodes(self):
        return tuple(c.node for c in self.clamps)


@dataclass
class StepInputs:
    """Inputs sampled at one instant.

    ``boundary`` holds ``(node, force, moment)`` triples.  ``distributed``
    is ``None`` or a callable mapping arc-length coordinates of shape
    ``(...,)`` to force and moment densities of shape ``(..., 3)``.
    """

    boundary: list = field(default_factory=list)
    distributed: object = None
    tau: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class StepResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    work: float
    dissipation: float


def _zero_inputs(t):
    return StepInputs()


class MidpointStepper:
    """Residual, Jacobian and Newton solve of one midpoint step.

    Parameters
    ----------
    system : RodSystem
    settings : SolverSettings
    dirichlet : DirichletSpec
    actuators : sequence of ``(kind, (rho1, rho2))``
    inputs : callable ``t -> StepInputs``
    x0 : ndarray
        Initial state; clamped values are taken from it.
    """

    def __init__(self, system, settings, dirichlet=DirichletSpec(), actuators=(),
                 inputs=_zero_inputs, x0=None):
        self.system = system
        self.settings = settings
        self.dirichlet = dirichlet
        self.actuators = tuple(actuators)
        self.inputs = inputs
        self._pattern = None
        if x0 is None:
            x0 = system.zeros()
        self._setup_fixed(np.asarray(x0, dtype=float))
        self._setup_constant_jacobian()

    # ------------------------------------------------------------------
    def _setup_fixed(self, x0):
        s = self.system
        m = s.mesh
        nn = m.n_nodes
        fixed = np.zeros(s.n_x, dtype=bool)
        for c in self.dirichlet.clamps:
            if not 0 <= c.node < nn:
                raise ConfigurationError(f"clamped node {c.node} does not exist")
            phi_idx = m.phi_dofs(c.node)[np.asarray(c.phi, dtype=bool)]
            d_idx = m.d_dofs(c.node)[np.asarray(c.d, dtype=bool)]
            for idx in (phi_idx, d_idx):
                fixed[idx] = True
                fixed[s.off_v + idx] = True
            if all(c.d):
                # constraint rows vanish identically on a fully clamped frame
                fixed[s.off_l + 6 * c.node:s.off_l + 6 * c.node + 6] = True
        for b in range(1, s.n_branches):
            o = s.off_s + b * s.n_s
            fixed[o:o + s.n_s] |= s.rigid_sigma
        self.fixed = fixed
        self.free = np.flatnonzero(~fixed)
        self.reduced = -np.ones(s.n_x, dtype=int)
        self.reduced[self.free] = np.arange(self.free.size)
        self.prescribed = np.zeros(s.n_x)
        self.prescribed[:s.n_q] = x0[:s.n_q]
        self.prescribed[~fixed] = 0.0

    def _setup_constant_jacobian(self):
        s = self.system
        h = self.settings.h
        nq = s.n_q
        blocks = []
        eye = sp.identity(nq, format="coo")
        blocks.append((eye, 0, 0))
        blocks.append((-0.5 * h * eye, 0, s.off_v))
        blocks.append((s.M_o.tocoo(), s.off_v, s.off_v))
        for b in range(s.n_branches):
            o = s.off_s + b * s.n_s
            blocks.append(((s.C[b] + 0.5 * h * s.Vinv[b]).tocoo(), o, o))
        rows, cols, vals = [], [], []
        for M, r0, c0 in blocks:
            rows.append(M.row + r0)
            cols.append(M.col + c0)
            vals.append(M.data)
        self._const = (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
        # index patterns of the state-dependent element blocks
        qd, sd = s.qdof, s.sdof
        self._pat_qq = (np.broadcast_to(qd[:, :, None], qd.shape + (qd.shape[1],)),
                        np.broadcast_to(qd[:, None, :], qd.shape + (qd.shape[1],)))
        self._pat_sq = (np.broadcast_to(sd[:, :, None], sd.shape + (qd.shape[1],)),
                        np.broadcast_to(qd[:, None, :], sd.shape + (qd.shape[1],)))
        nn = s.mesh.n_nodes
        self._d_node = (3 * nn + 9 * np.arange(nn)[:, None] + np.arange(9))  # (nn, 9)
        self._l_node = 6 * np.arange(nn)[:, None] + np.arange(6)  # (nn, 6)

    # ------------------------------------------------------------------
    def _external(self, qm, inputs, want_jac):
        """Boundary and distributed generalized forces at the midpoint state."""
        s = self.system
        m = s.mesh
        nn = m.n_nodes
        f = np.zeros(s.n_q)
        jac = []  # (rows, cols, vals) pieces of d f / d q
        dn = s.nodal_d(qm)
        for node, force, moment in inputs.boundary:
            force = np.asarray(force, dtype=float)
            moment = np.asarray(moment, dtype=float)
            f[3 * node:3 * node + 3] += force
            dofs = self._d_node[node]
            f[dofs] += kin.matrix_T(dn[node]) @ moment
            if want_jac:
                K = 0.5 * np.kron(np.eye(3), kin.skew(moment))
                r, c = np.meshgrid(dofs, dofs, indexing="ij")
                jac.append((r.ravel(), c.ravel(), K.ravel()))
        if inputs.distributed is not None:
            qe = s.gather(qm)
            sg = m.gauss_coordinates()
            nbar, mbar = inputs.distributed(sg)
            nbar = np.broadcast_to(np.asarray(nbar, dtype=float), sg.shape + (3,))
            mbar = np.broadcast_to(np.asarray(mbar, dtype=float), sg.shape + (3,))
            _, _, d, _ = s.gauss_fields(qe)
            # T(d) m = 0.5 (m x d1, m x d2, m x d3)
            Tm = 0.5 * np.concatenate(
                [np.cross(mbar, d[..., 3 * i:3 * i + 3]) for i in range(3)], axis=-1
            )
            fe = np.einsum("g,gki,egk->ei", s.wj, s.I_phi, nbar)
            fe += np.einsum("g,gki,egk->ei", s.wj, s.I_d, Tm)
            np.add.at(f, s.qdof, fe)
            if want_jac:
                Km = 0.5 * np.einsum("ab,egij->egaibj", np.eye(3), kin.skew_batch(mbar)).reshape(
                    m.n_e, len(s.wj), 9, 9)
                Ke = np.einsum("g,gki,egkl,glj->eij", s.wj, s.I_d, Km, s.I_d, optimize=True)
                jac.append((self._pat_qq[0].ravel(), self._pat_qq[1].ravel(), Ke.ravel()))
        return f, jac

    def _actuation(self, qe, tau, want_jac):
        """Element forces ``sum_g w B_g.T sigma_u tau`` and their q-derivative."""
        s = self.system
        if not self.actuators:
            return None, None
        X = np.einsum("gki,ei->egk", s.I_X, qe)
        Bg = s.gauss_B(qe)
        sig_tot = np.zeros(X.shape[:-1] + (6,))
        dsig_tot = np.zeros(X.shape[:-1] + (6, 21)) if want_jac else None
        for (kind, rho), tk in zip(self.actuators, tau):
            sig, dsig = actuation_kernel(kind, rho, X, need_derivative=want_jac)
            sig_tot += tk * sig
            if want_jac:
                dsig_tot += tk * dsig
        fe = np.einsum("g,egki,egk->ei", s.wj, Bg, sig_tot)
        Ke = None
        if want_jac:
            Ke = np.einsum("g,egk,gkij->eij", s.wj, sig_tot, s.Tg, optimize=True)
            Ke += np.einsum("g,egki,egkl,glj->eij", s.wj, Bg, dsig_tot, s.I_X, optimize=True)
        return fe, Ke

    def evaluate(self, x_next, x_prev, t_prev, want_jac=True, full=False):
        """Return ``(residual, jacobian or None, midpoint info)``.

        The residual has Dirichlet rows replaced by ``x_next - prescribed``.
        With ``full=True`` the Jacobian is a sparse matrix in the same layout
        (identity on Dirichlet rows); otherwise it is the pair
        ``(matrix on free unknowns, permutation)`` used by :meth:`step`.
        """
        s = self.system
        h = self.settings.h
        tm = t_prev + 0.5 * h
        inputs = self.inputs(tm)
        xm = 0.5 * (x_prev + x_next)
        dx = x_next - x_prev
        qm, vm, sigm, lamm = s.split(xm)
        dq, dv, dsig, _ = s.split(dx)
        nq, ns, nn = s.n_q, s.n_s, s.mesh.n_nodes

        qe = s.gather(qm)
        ve = s.gather(vm)
        Je = s.element_structure(qe)
        sig_tot = sum(sigm)
        se = sig_tot[s.sdof]

        R = np.empty(s.n_x)
        R[:nq] = dq - h * vm

        fint = np.zeros(nq)
        np.add.at(fint, s.qdof, np.einsum("eri,er->ei", Je, se))
        fact_e, Kact_e = self._actuation(qe, inputs.tau, want_jac)
        fact = np.zeros(nq)
        if fact_e is not None:
            np.add.at(fact, s.qdof, fact_e)
        dm = s.nodal_d(qm)
        vdm = s.nodal_d(vm)
        lamn = lamm.reshape(nn, 6)
        Gn = kin.constraint_jacobian_batch(dm)  # (nn, 6, 9)
        Gtl = np.zeros(nq)
        Gtl[self._d_node] = np.einsum("nki,nk->ni", Gn, lamn)
        fext, jac_ext = self._external(qm, inputs, want_jac)
        R[s.off_v:s.off_v + nq] = s.M_o @ dv + h * (fint + fact + Gtl - fext)

        Jv = np.zeros(ns)
        np.add.at(Jv, s.sdof, np.einsum("eri,ei->er", Je, ve))
        for b in range(s.n_branches):
            o = s.off_s + b * ns
            R[o:o + ns] = s.C[b] @ dsig[b] - h * Jv + h * (s.Vinv[b] @ sigm[b])
        Gv = np.einsum("nki,ni->nk", Gn, vdm)
        R[s.off_l:] = -h * Gv.ravel()

        work = h * (vm @ fext - vm @ fact)
        diss = h * sum(sigm[b] @ (s.Vinv[b] @ sigm[b]) for b in range(s.n_branches))
        info = {"work": float(work), "dissipation": float(diss), "inputs": inputs}

        fx = self.fixed
        R[fx] = x_next[fx] - self.prescribed[fx]
        if not want_jac:
            return R, None, info

        hh = 0.5 * h
        rows, cols, vals = [self._const[0]], [self._const[1]], [self._const[2]]

        def add(r, c, v):
            rows.append(np.ravel(r))
            cols.append(np.ravel(c))
            vals.append(np.ravel(v))

        ov, ol = s.off_v, s.off_l
        # momentum rows
        Kint = np.einsum("rij,er->eij", s.S, se)
        if Kact_e is not None:
            Kint = Kint + Kact_e
        add(ov + self._pat_qq[0], self._pat_qq[1], hh * Kint)
        Hn = kin.constraint_hessian_batch(lamn)  # (nn, 9, 9)
        r = np.broadcast_to(self._d_node[:, :, None], (nn, 9, 9))
        c = np.broadcast_to(self._d_node[:, None, :], (nn, 9, 9))
        add(ov + r, c, hh * Hn)
        for rr, cc, vv in jac_ext:
            add(ov + rr, cc, -hh * vv)
        for b in range(s.n_branches):
            o = s.off_s + b * ns
            add(ov + self._pat_sq[1], o + self._pat_sq[0], hh * Je)  # transpose block
            add(o + self._pat_sq[0], ov + self._pat_sq[1], -hh * Je)
            KJv = np.einsum("rij,ei->erj", s.S, ve)
            add(o + self._pat_sq[0], self._pat_sq[1], -hh * KJv)
        rl = np.broadcast_to(self._l_node[:, :, None], (nn, 6, 9))
        cd = np.broadcast_to(self._d_node[:, None, :], (nn, 6, 9))
        add(ov + cd, ol + rl, hh * Gn)  # G.T lambda
        add(ol + rl, ov + cd, -hh * Gn)
        Gvn = kin.constraint_jacobian_batch(vdm)
        add(ol + rl, cd, -hh * Gvn)

        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        if full:
            keep = ~fx[rows]
            J = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(s.n_x, s.n_x)).tocsr()
            J = J + sp.diags(fx.astype(float))
        else:
            J = self._reduced_matrix(rows, cols, vals)
        return R, J, info

    def _reduced_matrix(self, rows, cols, vals):
        """Newton matrix on the free unknowns in a bandwidth-reducing order.

        The sparsity pattern does not change between iterations, so the CSC
        structure and the permutation are built once and reused.
        """
        cache = self._pattern
        if cache is None or cache[0].shape != rows.shape or not (
                np.array_equal(cache[0], rows) and np.array_equal(cache[1], cols)):
            keep = (self.reduced[rows] >= 0) & (self.reduced[cols] >= 0)
            r = self.reduced[rows[keep]]
            c = self.reduced[cols[keep]]
            n = self.free.size
            pat = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))
            perm = reverse_cuthill_mckee((pat + pat.T).tocsr(), symmetric_mode=True)
            inv = np.empty(n, dtype=int)
            inv[perm] = np.arange(n)
            r, c = inv[r], inv[c]
            key = c.astype(np.int64) * n + r
            uniq, slot = np.unique(key, return_inverse=True)
            indptr = np.searchsorted(uniq // n, np.arange(n + 1))
            cache = (rows.copy(), cols.copy(), keep, slot, uniq % n, indptr, perm)
            self._pattern = cache
        _, _, keep, slot, indices, indptr, perm = cache
        data = np.bincount(slot, weights=vals[keep], minlength=indices.size)
        n = self.free.size
        return sp.csc_matrix((data, indices, indptr), shape=(n, n)), perm

    def residual(self, x_next, x_prev, t_prev):
        return self.evaluate(x_next, x_prev, t_prev, want_jac=False)[0]

    def jacobian(self, x_next, x_prev, t_prev, mode=None):
        """Newton matrix, analytic or by column-wise central differences."""
        mode = mode or self.settings.jacobian_mode
        if mode == "analytic":
            return self.evaluate(x_next, x_prev, t_prev, want_jac=True, full=True)[1]
        n = x_next.size
        cols = []
        for j in range(n):
            step = self.settings.fd_step * max(1.0, abs(x_next[j]))
            xp = x_next.copy()
            xm = x_next.copy()
            xp[j] += step
            xm[j] -= step
            rp = self.residual(xp, x_prev, t_prev)
            rm = self.residual(xm, x_prev, t_prev)
            cols.append((rp - rm) / (2.0 * step))
        return sp.csr_matrix(np.column_stack(cols))

    # ------------------------------------------------------------------
    def step(self, x_prev, t_prev, step_index=None):
        """Advance one time step; raises :class:`StepFailure` on non-convergence."""
        st = self.settings
        x = np.array(x_prev, dtype=float, copy=True)
        x[self.fixed] = self.prescribed[self.fixed]
        free = self.free
        norm = np.inf
        for it in range(st.max_newton_iters + 1):
            want = st.jacobian_mode == "analytic"
            R, J, info = self.evaluate(x, x_prev, t_prev, want_jac=want)
            norm = float(np.linalg.norm(R))
            if not np.isfinite(norm):
                break
            if norm <= st.eps_newton:
                return StepResult(x, it, norm, info["work"], info["dissipation"])
            if it == st.max_newton_iters:
                break
            if want:
                Jf, perm = J
            else:
                Jfull = self.jacobian(x, x_prev, t_prev, mode="fd")
                Jf, perm = Jfull[free][:, free].tocsc(), np.arange(free.size)
            try:
                rhs = -R[free][perm]
                dx = np.empty(free.size)
                dx[perm] = spla.splu(Jf, permc_spec="NATURAL").solve(rhs)
            except RuntimeError as exc:
                raise StepFailure(
                    f"singular Newton matrix at step {step_index} (t={t_prev:g}), iteration {it}: {exc}",
                    step=step_index, t=t_prev, residual_norm=norm, iterations=it,
                ) from exc
            x[free] += dx
        raise StepFailure(
            f"Newton did not converge at step {step_index} (t={t_prev:g}): "
            f"residual norm {norm:.3e} after {it} iterations",
            step=step_index, t=t_prev, residual_norm=norm, iterations=it,
        )


def straight_configuration(mesh, start, axis, frame=None):
    """Nodal displacement vector of a straight rod.

    ``frame`` is the common director matrix ``[d1 d2 d3]``; by default the
    minimal rotation taking ``e3`` onto ``axis``.
    """
    start = np.asarray(start, dtype=float)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    R = kin.minimal_rotation(axis) if frame is None else np.asarray(frame, dtype=float)
    phi = start[None, :] + mesh.nodes[:, None] * axis[None, :]
    d = np.tile(kin.directors_from_rotation(R), (mesh.n_nodes, 1))
    return np.concatenate([phi.ravel(), d.ravel()])


def project_stresses(system, q):
    """Stresses consistent with the displacement field ``q``.

    The strains are projected onto the discontinuous stress space with the
    assembly quadrature and converted per slot with each branch compliance;
    rigid slots get zero.  Returns one stress vector per branch.
    """
    gamma, kappa = system.gauss_strains(q)
    eps = np.concatenate([gamma, kappa], axis=-1)
    eps[..., 2] -= 1.0
    Mpsi = np.einsum("g,grk,gsk->rs", system.wj, system.Pg, system.Pg)
    rhs = np.einsum("g,grk,egk->er", system.wj, system.Pg, eps)
    coeff = np.linalg.solve(Mpsi, rhs.T).T  # (n_e, 6p)
    p = system.mesh.p
    slot = np.concatenate([np.tile(np.arange(3), p), np.tile(np.arange(3, 6), p)])
    out = []
    for b in range(system.n_branches):
        c = system.branches.compliance[b][slot]
        inv = np.divide(1.0, c, out=np.zeros_like(c), where=c > 0)
        sig = np.zeros(system.n_s)
        sig[system.sdof] = coeff * inv
        out.append(sig)
    return out


def initialize(system, q0, v0=None):
    """Consistent initial state from nodal displacements.

    Raises :class:`ConfigurationError` if a nodal frame is not orthonormal.
    """
    for i, d in enumerate(system.nodal_d(q0)):
        if not kin.is_orthonormal(d):
            raise ConfigurationError(f"initial frame at node {i} is not orthonormal")
    x = system.zeros()
    x[:system.n_q] = q0
    if v0 is not None:
        x[system.off_v:system.off_v + system.n_q] = v0
    for b, sig in enumerate(project_stresses(system, q0)):
        o = system.off_s + b * system.n_s
        x[o:o + system.n_s] = sig
    return x


def time_grid(settings):
    n = settings.n_steps
    return settings.h * np.arange(n + 1)
