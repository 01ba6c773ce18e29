"""Director-frame algebra.

Directors are stored as one flat 9-vector ``d = (d1, d2, d3)``.  Every
function here is a polynomial in its arguments and accepts frames that are
not exactly orthonormal, since Newton iterates and interpolated fields in
element interiors are only approximately so.
"""

from __future__ import annotations

import numpy as np

# index pairs of the six orthonormality conditions, in storage order
CONSTRAINT_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0))

TOL_ORTHO = 1e-10


def skew(a):
    """Return the skew-symmetric matrix with ``skew(a) @ b == cross(a, b)``."""
    a = np.asarray(a, dtype=float)
    return np.array(
        [
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ]
    )


def skew_batch(a):
    """Vectorized :func:`skew` over a leading axis, shape ``(..., 3, 3)``."""
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape[:-1] + (3, 3))
    out[..., 0, 1] = -a[..., 2]
    out[..., 0, 2] = a[..., 1]
    out[..., 1, 0] = a[..., 2]
    out[..., 1, 2] = -a[..., 0]
    out[..., 2, 0] = -a[..., 1]
    out[..., 2, 1] = a[..., 0]
    return out


def rotation_from_directors(d):
    """Return ``R = [d1 d2 d3]`` with the directors as columns."""
    d = np.asarray(d, dtype=float)
    return d.reshape(3, 3).T.copy()


def directors_from_rotation(R):
    """Inverse of :func:`rotation_from_directors`."""
    return np.asarray(R, dtype=float).T.reshape(9).copy()


def matrix_JN(phi_s):
    """Block-diagonal 9x3 matrix with ``JN(phi_s).T @ d == R(d).T @ phi_s``."""
    phi_s = np.asarray(phi_s, dtype=float)
    out = np.zeros((9, 3))
    for i in range(3):
        out[3 * i:3 * i + 3, i] = phi_s
    return out


def matrix_L(d):
    """Return the 3x9 matrix ``L(d)`` so that ``K = L(d_s) d``."""
    d = np.asarray(d, dtype=float)
    d1, d2, d3 = d[0:3], d[3:6], d[6:9]
    z = np.zeros(3)
    return 0.5 * np.array(
        [
            np.concatenate([z, -d3, d2]),
            np.concatenate([d3, z, -d1]),
            np.concatenate([-d2, d1, z]),
        ]
    )


def matrix_T(d):
    """Return the 9x3 matrix mapping angular velocity to director rates.

    For an orthonormal frame and ``ddot_i = omega x d_i`` one has
    ``T(d).T @ ddot == omega`` and ``ddot == 2 T(d) omega``.
    """
    d = np.asarray(d, dtype=float)
    return -0.5 * np.vstack([skew(d[0:3]), skew(d[3:6]), skew(d[6:9])])


def strain_measures(d, d_s, phi_s):
    """Return the material strains ``(Gamma, K)``.

    ``Gamma = R(d).T phi_s`` and ``K`` is the axial vector of the
    skew part of ``R.T R_s`` written in director form.
    """
    d = np.asarray(d, dtype=float)
    d_s = np.asarray(d_s, dtype=float)
    phi_s = np.asarray(phi_s, dtype=float)
    d1, d2, d3 = d[0:3], d[3:6], d[6:9]
    d1s, d2s, d3s = d_s[0:3], d_s[3:6], d_s[6:9]
    gamma = np.array([d1 @ phi_s, d2 @ phi_s, d3 @ phi_s])
    kappa = 0.5 * np.array(
        [
            d3 @ d2s - d2 @ d3s,
            d1 @ d3s - d3 @ d1s,
            d2 @ d1s - d1 @ d2s,
        ]
    )
    return gamma, kappa


def constraint_g(d):
    """Six orthonormality residuals ``0.5 (d_i . d_j - delta_ij)``."""
    d = np.asarray(d, dtype=float).reshape(3, 3)
    return np.array(
        [0.5 * (d[i] @ d[j] - (1.0 if i == j else 0.0)) for i, j in CONSTRAINT_PAIRS]
    )


def constraint_jacobian(d):
    """Return the 6x9 gradient of :func:`constraint_g`."""
    d = np.asarray(d, dtype=float)
    d1, d2, d3 = d[0:3], d[3:6], d[6:9]
    z = np.zeros(3)
    return np.array(
        [
            np.concatenate([d1, z, z]),
            np.concatenate([z, d2, z]),
            np.concatenate([z, z, d3]),
            np.concatenate([0.5 * d2, 0.5 * d1, z]),
            np.concatenate([z, 0.5 * d3, 0.5 * d2]),
            np.concatenate([0.5 * d3, z, 0.5 * d1]),
        ]
    )


def constraint_hessian(lam):
    """Return ``d/dd (G_d(d).T lam)``, a constant symmetric 9x9 matrix."""
    l11, l22, l33, l12, l23, l31 = lam
    eye = np.eye(3)
    blocks = [
        [l11 * eye, 0.5 * l12 * eye, 0.5 * l31 * eye],
        [0.5 * l12 * eye, l22 * eye, 0.5 * l23 * eye],
        [0.5 * l31 * eye, 0.5 * l23 * eye, l33 * eye],
    ]
    return np.block(blocks)


def is_orthonormal(d, tol=TOL_ORTHO):
    """True if all six constraint residuals are below ``tol`` and det > 0."""
    g = constraint_g(d)
    return bool(np.max(np.abs(g)) <= tol and np.linalg.det(rotation_from_directors(d)) > 0)


def minimal_rotation(axis):
    """Rotation matrix taking ``e3`` onto the unit vector ``axis`` by the
    smallest angle (Rodrigues formula about ``e3 x axis``)."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    e3 = np.array([0.0, 0.0, 1.0])
    c = float(e3 @ a)
    k = np.cross(e3, a)
    s = np.linalg.norm(k)
    if s < 1e-14:
        if c > 0:
            return np.eye(3)
        # half turn about e1
        return np.diag([1.0, -1.0, -1.0])
    K = skew(k / s)
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def constraint_jacobian_batch(d):
    """Vectorized :func:`constraint_jacobian` for ``d`` of shape ``(n, 9)``."""
    d = np.asarray(d, dtype=float)
    out = np.zeros(d.shape[:-1] + (6, 9))
    d1, d2, d3 = d[..., 0:3], d[..., 3:6], d[..., 6:9]
    out[..., 0, 0:3] = d1
    out[..., 1, 3:6] = d2
    out[..., 2, 6:9] = d3
    out[..., 3, 0:3] = 0.5 * d2
    out[..., 3, 3:6] = 0.5 * d1
    out[..., 4, 3:6] = 0.5 * d3
    out[..., 4, 6:9] = 0.5 * d2
    out[..., 5, 0:3] = 0.5 * d3
    out[..., 5, 6:9] = 0.5 * d1
    return out


# block position (row, col) of each multiplier in the constraint Hessian
_HESS_BLOCKS = (
    ((0, 0, 1.0),),
    ((1, 1, 1.0),),
    ((2, 2, 1.0),),
    ((0, 1, 0.5), (1, 0, 0.5)),
    ((1, 2, 0.5), (2, 1, 0.5)),
    ((2, 0, 0.5), (0, 2, 0.5)),
)


def constraint_hessian_batch(lam):
    """Vectorized :func:`constraint_hessian` for ``lam`` of shape ``(n, 6)``."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros(lam.shape[:-1] + (9, 9))
    for k, blocks in enumerate(_HESS_BLOCKS):
        for bi, bj, w in blocks:
            for c in range(3):
                out[..., 3 * bi + c, 3 * bj + c] += w * lam[..., k]
    return out
