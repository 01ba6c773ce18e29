"""Linear elastic and generalized-Maxwell material data for the rod.

Stiffness slots are ordered ``(kS1, kS2, kE)`` for the force resultant and
``(kB1, kB2, kT)`` for the moment resultant.  A slot may be marked
:data:`RIGID`, which gives an exactly zero compliance entry so that the
corresponding strain rate is constrained to vanish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Raised for inconsistent material, mesh or scenario input."""


class _Rigid:
    """Sentinel marking a kinematically locked stiffness slot."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "RIGID"

    def __reduce__(self):
        return (_Rigid, ())


RIGID = _Rigid()

FORCE_SLOTS = ("kS1", "kS2", "kE")
MOMENT_SLOTS = ("kB1", "kB2", "kT")


def _check_stiffness(name, value):
    if value is RIGID:
        return
    if not np.isfinite(value) or value <= 0:
        raise ConfigurationError(f"stiffness {name} must be positive or RIGID, got {value!r}")


def _compliance(k, scale=1.0):
    """Compliance of a stiffness slot carrying ``scale`` of the stiffness."""
    return 0.0 if k is RIGID else 1.0 / (scale * k)


@dataclass(frozen=True)
class MaterialModel:
    """Inertia densities and diagonal stiffnesses of a rod cross-section.

    Parameters
    ----------
    rhoA : float
        Mass per unit length.
    Mrho11, Mrho22 : float
        Rotary inertia densities about the two cross-section axes.
    kS1, kS2, kE : float or RIGID
        Shear and extensional stiffness.
    kB1, kB2, kT : float or RIGID
        Bending and torsional stiffness.
    """

    rhoA: float
    Mrho11: float
    Mrho22: float
    kS1: object
    kS2: object
    kE: object
    kB1: object
    kB2: object
    kT: object

    def __post_init__(self):
        for name in ("rhoA", "Mrho11", "Mrho22"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ConfigurationError(f"{name} must be finite and non-negative, got {val!r}")
        for name in FORCE_SLOTS + MOMENT_SLOTS:
            _check_stiffness(name, getattr(self, name))

    @property
    def force_stiffness(self):
        return tuple(getattr(self, n) for n in FORCE_SLOTS)

    @property
    def moment_stiffness(self):
        return tuple(getattr(self, n) for n in MOMENT_SLOTS)

    @property
    def rigid_mask(self):
        """Boolean 6-vector, True on locked slots (force slots first)."""
        return np.array([k is RIGID for k in self.force_stiffness + self.moment_stiffness])

    @property
    def Mrho(self):
        """Director mass density ``diag(M11 I, M22 I, 0)`` as a 9x9 matrix."""
        return np.diag(np.repeat([self.Mrho11, self.Mrho22, 0.0], 3))


@dataclass(frozen=True)
class MaxwellBranch:
    """One spring-dashpot branch given as a fraction of the total stiffness.

    ``fraction`` is either a scalar applied to all six slots or a 6-tuple
    (force slots first).  ``tauE`` acts on extension and bending,
    ``tauG`` on shear and torsion.
    """

    fraction: object
    tauE: float
    tauG: float

    def fractions(self):
        f = np.broadcast_to(np.asarray(self.fraction, dtype=float), (6,)).copy()
        return f


@dataclass(frozen=True)
class BranchSet:
    """Diagonal compliances of the elastic branch and all viscous branches.

    ``compliance[b]`` and ``inv_viscosity[b]`` are 6-vectors (force slots
    then moment slots) for branch ``b``; branch 0 is the purely elastic one
    and has zero inverse viscosity.
    """

    compliance: np.ndarray = field(repr=False)
    inv_viscosity: np.ndarray = field(repr=False)
    rigid: np.ndarray = field(repr=False)

    @property
    def count(self):
        return self.compliance.shape[0]

    @property
    def viscous(self):
        return self.count > 1


def compliance_matrices(material):
    """Return ``(C_N, C_M)`` as diagonal 3x3 matrices, zero on rigid slots."""
    cn = [_compliance(k) for k in material.force_stiffness]
    cm = [_compliance(k) for k in material.moment_stiffness]
    return np.diag(cn), np.diag(cm)


def branch_split(material, branches=(), elastic_fraction=None):
    """Partition the stiffness among an elastic and ``len(branches)`` Maxwell branches.

    Parameters
    ----------
    material : MaterialModel
    branches : sequence of MaxwellBranch
    elastic_fraction : float or 6-vector, optional
        Share of the purely elastic branch.  Defaults to one minus the sum
        of the viscous fractions.

    Returns
    -------
    BranchSet
    """
    k = list(material.force_stiffness + material.moment_stiffness)
    rigid = material.rigid_mask
    visc = [b.fractions() for b in branches]
    total_visc = np.sum(visc, axis=0) if visc else np.zeros(6)
    if elastic_fraction is None:
        f_el = 1.0 - total_visc
    else:
        f_el = np.broadcast_to(np.asarray(elastic_fraction, dtype=float), (6,)).copy()
        if np.any(np.abs(f_el + total_visc - 1.0) > 1e-12):
            raise ConfigurationError("branch fractions must sum to one in every slot")
    for f in [f_el] + visc:
        if np.any(f <= 0) or np.any(f > 1):
            raise ConfigurationError("branch fractions must lie in (0, 1]")

    comp = np.zeros((len(branches) + 1, 6))
    vinv = np.zeros((len(branches) + 1, 6))
    for j in range(6):
        if rigid[j]:
            continue
        comp[0, j] = 1.0 / (f_el[j] * k[j])
        for b, br in enumerate(branches, start=1):
            kb = visc[b - 1][j] * k[j]
            comp[b, j] = 1.0 / kb
            # shear slots and torsion relax with tauG, the rest with tauE
            tau = br.tauG if j in (0, 1, 5) else br.tauE
            vinv[b, j] = 1.0 / (tau * kb)
    return BranchSet(compliance=comp, inv_viscosity=vinv, rigid=rigid)


def hamiltonian_density(v, sigma, material, branch_set=None):
    """Energy per unit length for one material point.

    Parameters
    ----------
    v : array_like, shape (12,)
        Velocities ``(v_phi, v_d)``.
    sigma : array_like, shape (n_branches, 6)
        Stress resultants ``(N, M)`` per branch.
    """
    if branch_set is None:
        branch_set = branch_split(material)
    v = np.asarray(v, dtype=float)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    kinetic = 0.5 * material.rhoA * v[:3] @ v[:3] + 0.5 * v[3:] @ material.Mrho @ v[3:]
    strain = 0.5 * np.sum(branch_set.compliance * sigma**2)
    return float(kinetic + strain)
