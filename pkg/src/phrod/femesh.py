"""One-dimensional finite-element infrastructure for the rod.

Displacements and velocities use continuous Lagrange polynomials of order
``p``; stresses use discontinuous polynomials of order ``p - 1`` whose
nodes sit at the Gauss points of that order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from phrod.constitutive import ConfigurationError

_GAUSS_POINTS = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
_GAUSS_WEIGHTS = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


def quadrature_rule():
    """Three-point Gauss-Legendre rule on ``[-1, 1]`` (exact to degree 5)."""
    return _GAUSS_POINTS.copy(), _GAUSS_WEIGHTS.copy()


def _lagrange(nodes, xi):
    xi = np.asarray(xi, dtype=float)
    n = len(nodes)
    vals = np.ones((n,) + xi.shape)
    ders = np.zeros((n,) + xi.shape)
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            vals[i] = vals[i] * (xi - nodes[j]) / (nodes[i] - nodes[j])
        for k in range(n):
            if k == i:
                continue
            term = np.ones_like(xi) / (nodes[i] - nodes[k])
            for j in range(n):
                if j in (i, k):
                    continue
                term = term * (xi - nodes[j]) / (nodes[i] - nodes[j])
            ders[i] = ders[i] + term
    return vals, ders


def shape_eval(order, xi):
    """Values and reference derivatives of the continuous basis.

    Returns arrays of shape ``(order + 1,) + shape(xi)``.
    """
    if order not in (1, 2):
        raise ConfigurationError(f"polynomial order must be 1 or 2, got {order}")
    return _lagrange(np.linspace(-1.0, 1.0, order + 1), xi)


def stress_nodes(order_minus_one):
    """Reference nodes of the discontinuous stress basis."""
    if order_minus_one == 0:
        return np.array([0.0])
    if order_minus_one == 1:
        return np.array([-1.0, 1.0]) / np.sqrt(3.0)
    raise ConfigurationError(f"stress order must be 0 or 1, got {order_minus_one}")


def stress_shape_eval(order_minus_one, xi):
    """Values of the discontinuous stress basis at ``xi``."""
    nodes = stress_nodes(order_minus_one)
    if order_minus_one == 0:
        return np.ones((1,) + np.shape(xi))
    return _lagrange(nodes, xi)[0]


@dataclass(frozen=True)
class RodMesh:
    """Uniform mesh of ``[0, L]`` with ``n_e`` elements of order ``p``.

    Global layouts
    --------------
    * ``q`` and ``v``: all centerline nodes (3 each), then all director
      nodes (9 each).
    * one stress set: all force resultants (3 per stress node), then all
      moment resultants.
    * multipliers: 6 per continuous node.
    """

    L: float
    n_e: int
    p: int = 2
    nodes: np.ndarray = field(init=False, repr=False)
    # reference quantities at the Gauss points
    xi_g: np.ndarray = field(init=False, repr=False)
    w_g: np.ndarray = field(init=False, repr=False)
    N_g: np.ndarray = field(init=False, repr=False)
    dN_g: np.ndarray = field(init=False, repr=False)
    Psi_g: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ConfigurationError(f"rod length must be positive, got {self.L!r}")
        if int(self.n_e) != self.n_e or self.n_e < 1:
            raise ConfigurationError(f"element count must be a positive integer, got {self.n_e!r}")
        if self.p not in (1, 2):
            raise ConfigurationError(f"polynomial order must be 1 or 2, got {self.p!r}")
        object.__setattr__(self, "n_e", int(self.n_e))
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("nodes", np.linspace(0.0, self.L, self.n_nodes))
        xi, w = quadrature_rule()
        set_("xi_g", xi)
        set_("w_g", w)
        vals, ders = shape_eval(self.p, xi)
        set_("N_g", vals.T.copy())  # (n_gauss, p+1)
        set_("dN_g", ders.T.copy())
        set_("Psi_g", stress_shape_eval(self.p - 1, xi).T.copy())  # (n_gauss, p)

    # sizes
    @property
    def n_nodes(self):
        return self.n_e * self.p + 1

    @property
    def n_q(self):
        return 12 * self.n_nodes

    @property
    def n_stress_nodes(self):
        return self.n_e * self.p

    @property
    def n_sigma(self):
        return 6 * self.n_stress_nodes

    @property
    def n_lambda(self):
        return 6 * self.n_nodes

    @property
    def element_length(self):
        return self.L / self.n_e

    @property
    def jacobian(self):
        """Constant ``ds/dxi`` of the affine element map."""
        return 0.5 * self.element_length

    # dof maps
    def element_nodes(self, e):
        return np.arange(e * self.p, e * self.p + self.p + 1)

    def phi_dofs(self, node):
        return 3 * node + np.arange(3)

    def d_dofs(self, node):
        return 3 * self.n_nodes + 9 * node + np.arange(9)

    def element_q_dofs(self):
        """``(n_e, 12 (p+1))`` map: local ``(phi_a..., d_a...)`` to global q index."""
        out = np.empty((self.n_e, 12 * (self.p + 1)), dtype=int)
        for e in range(self.n_e):
            nodes = self.element_nodes(e)
            out[e] = np.concatenate(
                [np.concatenate([self.phi_dofs(a) for a in nodes]),
                 np.concatenate([self.d_dofs(a) for a in nodes])]
            )
        return out

    def element_sigma_dofs(self):
        """``(n_e, 6 p)`` map: local ``(N_j..., M_j...)`` to index in one stress set."""
        out = np.empty((self.n_e, 6 * self.p), dtype=int)
        half = 3 * self.n_stress_nodes
        for e in range(self.n_e):
            j = e * self.p + np.arange(self.p)
            n_idx = (3 * j[:, None] + np.arange(3)).ravel()
            out[e] = np.concatenate([n_idx, half + n_idx])
        return out

    def gauss_coordinates(self):
        """Arc-length coordinates of all Gauss points, shape ``(n_e, 3)``."""
        left = self.element_length * np.arange(self.n_e)
        return left[:, None] + self.jacobian * (self.xi_g[None, :] + 1.0)

    def node_at(self, s):
        """Index of the continuous node at arc length ``s`` (must coincide)."""
        idx = int(round(s / self.L * (self.n_nodes - 1)))
        if abs(self.nodes[idx] - s) > 1e-12 * max(1.0, self.L):
            raise ConfigurationError(f"s={s} is not a mesh node")
        return idx
