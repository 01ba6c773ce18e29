import pickle

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phrod.constitutive import (
    RIGID,
    ConfigurationError,
    MaterialModel,
    MaxwellBranch,
    branch_split,
    compliance_matrices,
    hamiltonian_density,
)


def _material(**kw):
    base = dict(rhoA=2.0, Mrho11=0.3, Mrho22=0.5, kS1=10.0, kS2=20.0, kE=40.0,
                kB1=1.0, kB2=2.0, kT=4.0)
    base.update(kw)
    return MaterialModel(**base)


class TestMaterialModel:
    def test_rejects_nonpositive_stiffness(self):
        with pytest.raises(ConfigurationError):
            _material(kE=0.0)
        with pytest.raises(ConfigurationError):
            _material(kB1=-1.0)
        with pytest.raises(ConfigurationError):
            _material(kT=float("inf"))

    def test_rejects_negative_inertia(self):
        with pytest.raises(ConfigurationError):
            _material(rhoA=-1.0)

    def test_zero_inertia_allowed(self):
        m = _material(rhoA=0.0, Mrho11=0.0, Mrho22=0.0)
        assert np.all(m.Mrho == 0)

    def test_director_mass(self):
        m = _material()
        np.testing.assert_array_equal(np.diag(m.Mrho), [0.3] * 3 + [0.5] * 3 + [0.0] * 3)

    def test_rigid_mask(self):
        m = _material(kS1=RIGID, kS2=RIGID, kE=RIGID)
        np.testing.assert_array_equal(m.rigid_mask, [True, True, True, False, False, False])

    def test_rigid_singleton_pickles(self):
        assert pickle.loads(pickle.dumps(RIGID)) is RIGID
        assert repr(RIGID) == "RIGID"


class TestCompliance:
    def test_inverse_stiffness(self):
        CN, CM = compliance_matrices(_material())
        np.testing.assert_allclose(np.diag(CN), [0.1, 0.05, 0.025])
        np.testing.assert_allclose(np.diag(CM), [1.0, 0.5, 0.25])

    def test_rigid_slots_have_zero_compliance(self):
        CN, _ = compliance_matrices(_material(kE=RIGID))
        assert CN[2, 2] == 0.0
        assert CN[0, 0] == pytest.approx(0.1)


class TestBranchSplit:
    def test_elastic_only(self):
        b = branch_split(_material())
        assert b.count == 1 and not b.viscous
        np.testing.assert_allclose(b.compliance[0], [0.1, 0.05, 0.025, 1.0, 0.5, 0.25])
        assert np.all(b.inv_viscosity == 0)

    def test_quarter_three_quarter(self):
        mat = _material()
        b = branch_split(mat, [MaxwellBranch(0.75, tauE=0.08, tauG=0.02)])
        k = np.array([10.0, 20.0, 40.0, 1.0, 2.0, 4.0])
        np.testing.assert_allclose(b.compliance[0], 1.0 / (0.25 * k))
        np.testing.assert_allclose(b.compliance[1], 1.0 / (0.75 * k))
        # shear and torsion relax with tauG, extension and bending with tauE
        tau = np.array([0.02, 0.02, 0.08, 0.08, 0.08, 0.02])
        np.testing.assert_allclose(b.inv_viscosity[1], 1.0 / (tau * 0.75 * k))

    @given(st.floats(min_value=0.01, max_value=0.99))
    def test_parallel_stiffness_adds_up(self, f):
        b = branch_split(_material(), [MaxwellBranch(f, 1.0, 1.0)])
        k_total = 1.0 / b.compliance[0] + 1.0 / b.compliance[1]
        np.testing.assert_allclose(k_total, [10.0, 20.0, 40.0, 1.0, 2.0, 4.0], rtol=1e-12)

    def test_explicit_fraction_must_sum_to_one(self):
        with pytest.raises(ConfigurationError):
            branch_split(_material(), [MaxwellBranch(0.5, 1.0, 1.0)], elastic_fraction=0.4)
        b = branch_split(_material(), [MaxwellBranch(0.5, 1.0, 1.0)], elastic_fraction=0.5)
        assert b.count == 2

    def test_fractions_exhausting_stiffness_rejected(self):
        with pytest.raises(ConfigurationError):
            branch_split(_material(), [MaxwellBranch(1.0, 1.0, 1.0)])

    def test_rigid_slots_locked_in_every_branch(self):
        b = branch_split(_material(kE=RIGID), [MaxwellBranch(0.5, 1.0, 1.0)])
        assert b.compliance[0, 2] == 0 and b.compliance[1, 2] == 0
        assert b.inv_viscosity[1, 2] == 0

    def test_per_slot_fractions(self):
        frac = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
        b = branch_split(_material(), [MaxwellBranch(frac, 1.0, 1.0)])
        k = np.array([10.0, 20.0, 40.0, 1.0, 2.0, 4.0])
        np.testing.assert_allclose(b.compliance[1], 1.0 / (np.array(frac) * k))


class TestHamiltonianDensity:
    def test_value(self):
        mat = _material()
        v = np.arange(12, dtype=float)
        sig = np.array([[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]])
        kin = 0.5 * 2.0 * (0 + 1 + 4) + 0.5 * (0.3 * (9 + 16 + 25) + 0.5 * (36 + 49 + 64))
        pot = 0.5 * (0.1 * 1 + 0.05 * 4 + 0.025 * 9 + 1.0 * 16 + 0.5 * 25 + 0.25 * 36)
        assert hamiltonian_density(v, sig, mat) == pytest.approx(kin + pot)

    def test_third_director_carries_no_energy(self):
        v = np.zeros(12)
        v[9:] = 5.0
        assert hamiltonian_density(v, np.zeros((1, 6)), _material()) == 0.0
