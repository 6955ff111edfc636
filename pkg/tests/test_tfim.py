import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critlab.errors import ArgumentError, CapacityError
from critlab.observables import magnetization
from critlab.qsim import Statevector, new_state, z_expectations
from critlab.tfim import build_tfim, exact_ite, ground_state_exact, spectral_gap


def dense_from_terms(ham):
    mats = {"X": np.array([[0, 1], [1, 0]]), "Z": np.diag([1.0, -1.0])}
    out = np.zeros((1 << ham.n_qubits,) * 2)
    for t in ham.terms:
        ops = [np.eye(2)] * ham.n_qubits
        for q, p in t.factors:
            ops[q] = mats[p]
        m = ops[0]
        for o in ops[1:]:
            m = np.kron(m, o)
        out += t.coefficient * m
    return out


class TestBuild:
    def test_term_counts(self):
        ham = build_tfim(5, 0.7)
        assert len(ham.terms) == 9
        assert ham.detuning_g == pytest.approx(-0.3)

    def test_single_spin(self):
        assert ground_state_exact(build_tfim(1, 1.0))[0] == pytest.approx(-1.0)

    def test_classical(self):
        ham = build_tfim(3, 0.0)
        assert sorted(str(t) for t in ham.terms if t.coefficient) == ["-1*Z0 Z1", "-1*Z1 Z2"]
        assert ground_state_exact(ham)[0] == pytest.approx(-2.0)

    def test_two_sites_critical(self):
        assert ground_state_exact(build_tfim(2, 1.0))[0] == pytest.approx(-np.sqrt(5), abs=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(1, 6), st.floats(-3, 3))
    def test_dense_consistency(self, n, h):
        ham = build_tfim(n, h)
        assert np.allclose(ham.dense(), dense_from_terms(ham), atol=1e-12)


class TestGroundState:
    def test_residual(self):
        ham = build_tfim(6, 1.0)
        e, psi = ground_state_exact(ham)
        assert np.linalg.norm(ham.apply(psi.amplitudes) - e * psi.amplitudes) <= 1e-8

    def test_strong_field(self):
        e, psi = ground_state_exact(build_tfim(1, 2.0))
        assert e == pytest.approx(-2.0)
        assert abs(abs(np.vdot(psi.amplitudes, [1 / np.sqrt(2), -1 / np.sqrt(2)])) - 1) < 1e-12

    def test_classical_degenerate(self):
        ham = build_tfim(4, 0.0)
        w = np.linalg.eigvalsh(ham.dense())
        assert w[0] == pytest.approx(-3.0) and w[1] == pytest.approx(-3.0)

    def test_paramagnet(self):
        _, psi = ground_state_exact(build_tfim(6, 1e3))
        assert np.max(np.abs(z_expectations(psi))) <= 1e-2

    def test_capacity(self):
        with pytest.raises(CapacityError):
            ground_state_exact(build_tfim(15, 1.0))


class TestExactIte:
    def test_single_spin_closed_form(self):
        taus = np.linspace(0, 5, 51)
        ex = exact_ite(build_tfim(1, 1.0), new_state(1), taus)
        z = [magnetization(s) for s in ex.states]
        assert np.allclose(z, 1 / np.cosh(2 * taus), atol=1e-12)

    def test_frozen_classical(self):
        ex = exact_ite(build_tfim(4, 0.0), new_state(4), [0, 1, 5])
        for s in ex.states:
            assert np.allclose(s.amplitudes, new_state(4).amplitudes)

    def test_tau_zero_is_input(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi = Statevector(3, v / np.linalg.norm(v))
        ex = exact_ite(build_tfim(3, 1.0), psi, [0.0, 0.5])
        assert np.array_equal(ex.states[0].amplitudes, psi.amplitudes)

    def test_reaches_ground_state(self):
        ham = build_tfim(6, 1.0)
        _, gs = ground_state_exact(ham)
        ex = exact_ite(ham, new_state(6), [10 / spectral_gap(ham)])
        assert abs(np.vdot(gs.amplitudes, ex.states[-1].amplitudes)) ** 2 >= 1 - 1e-4

    @settings(max_examples=10, deadline=None)
    @given(st.integers(1, 7), st.floats(0.1, 3))
    def test_energy_monotone_and_normalised(self, n, h):
        ham = build_tfim(n, h)
        ex = exact_ite(ham, new_state(n), np.linspace(0, 5, 26))
        energies = [ham.expectation(s) for s in ex.states]
        assert np.all(np.diff(energies) <= 1e-12)
        assert all(abs(s.norm() - 1) < 1e-12 for s in ex.states)

    def test_bad_grid(self):
        with pytest.raises(ArgumentError):
            exact_ite(build_tfim(2, 1.0), new_state(2), [0, 1, 0.5])
        with pytest.raises(ArgumentError):
            exact_ite(build_tfim(2, 1.0), new_state(2), [-1, 1])
