import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critlab import _backend
from critlab.ansatz import AnsatzSpec, build_ansatz
from critlab.errors import ArgumentError, ShapeError
from critlab.qsim import Circuit
from critlab.tfim import build_tfim, ground_state_exact
from critlab.vqe import (DESK, FULL, OptimizerConfig, adam_run, converged_point, energy, energy_gradient,
                         energy_and_gradient, multi_restart, preset)


def fd_grad(circ, theta, ham, step=1e-5):
    g = np.zeros_like(theta)
    for j in range(len(theta)):
        e = np.zeros_like(theta)
        e[j] = step
        g[j] = (energy(circ, theta + e, ham) - energy(circ, theta - e, ham)) / (2 * step)
    return g


class TestConfig:
    def test_schedule(self):
        cfg = OptimizerConfig()
        assert cfg.learning_rate(0) == 0.02
        assert cfg.learning_rate(2000) == pytest.approx(0.012, abs=1e-15)
        assert cfg.learning_rate(4000) == pytest.approx(0.0072, abs=1e-15)

    def test_presets(self):
        assert (FULL.steps, FULL.restarts) == (10000, 64)
        assert (DESK.steps, DESK.restarts) == (2000, 8)
        assert preset("desk", restarts=2).restarts == 2
        with pytest.raises(ArgumentError):
            preset("huge")

    def test_invalid(self):
        with pytest.raises(ArgumentError):
            OptimizerConfig(restarts=0)
        with pytest.raises(ArgumentError):
            OptimizerConfig(lr0=-1)


class TestEnergy:
    def test_zero_params(self):
        circ = build_ansatz(AnsatzSpec("ladder", 2, 1))
        assert energy(circ, np.zeros(circ.n_params), build_tfim(2, 1.0)) == pytest.approx(-1.0)

    def test_classical(self):
        circ = build_ansatz(AnsatzSpec("ladder", 5, 1))
        assert energy(circ, np.zeros(circ.n_params), build_tfim(5, 0.0)) == pytest.approx(-4.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_variational_bound(self, seed):
        circ = build_ansatz(AnsatzSpec("ladder", 2, 2))
        theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, circ.n_params)
        assert energy(circ, theta, build_tfim(2, 1.0)) >= -np.sqrt(5) - 1e-9

    def test_size_mismatch(self):
        circ = build_ansatz(AnsatzSpec("ladder", 2, 1))
        with pytest.raises(ShapeError):
            energy(circ, np.zeros(7), build_tfim(3, 1.0))


class TestGradient:
    def test_single_gate_closed_form(self):
        from critlab.tfim import Hamiltonian, PauliString

        c = Circuit(1)
        c.rx(0)
        ham = Hamiltonian(1, 0.0, (PauliString.of("Z"),))
        assert energy_gradient(c, [np.pi / 8], ham)[0] == pytest.approx(-np.sqrt(2), abs=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from(["ladder", "brickwall"]))
    def test_finite_differences(self, seed, fam):
        circ = build_ansatz(AnsatzSpec(fam, 3, 2))
        ham = build_tfim(3, 1.0)
        theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, circ.n_params)
        assert np.max(np.abs(energy_gradient(circ, theta, ham) - fd_grad(circ, theta, ham))) <= 1e-6

    def test_backends_agree(self):
        if _backend.compiled is None:
            pytest.skip("compiled extension not built")
        circ = build_ansatz(AnsatzSpec("ladder", 5, 2))
        ham = build_tfim(5, 1.0)
        theta = np.random.default_rng(0).normal(size=circ.n_params)
        e0, g0 = energy_and_gradient(circ, theta, ham, kernels=_backend.pure)
        e1, g1 = energy_and_gradient(circ, theta, ham, kernels=_backend.compiled)
        assert e0 == pytest.approx(e1, abs=1e-12)
        assert np.allclose(g0, g1, atol=1e-12)

    def test_stationary_at_ground_state(self):
        spec = AnsatzSpec("ladder", 2, 2)
        res = adam_run(spec, build_tfim(2, 1.0), OptimizerConfig(steps=3000, restarts=1), seed=0)
        assert np.linalg.norm(energy_gradient(build_ansatz(spec), res.params, build_tfim(2, 1.0))) <= 1e-4


class TestAdam:
    def test_two_sites(self):
        res = adam_run(AnsatzSpec("ladder", 2, 2), build_tfim(2, 1.0), DESK, seed=0)
        assert res.energy == pytest.approx(-np.sqrt(5), abs=1e-3)
        assert [h[0] for h in res.history] == list(range(0, 2000, 100)) + [2000]

    def test_classical(self):
        res = adam_run(AnsatzSpec("ladder", 4, 2), build_tfim(4, 0.0), DESK, seed=1)
        assert res.energy == pytest.approx(-3.0, abs=1e-3)

    def test_zero_steps(self):
        spec = AnsatzSpec("ladder", 3, 1)
        p0 = np.full(spec.n_params, 0.1)
        res = adam_run(spec, build_tfim(3, 1.0), OptimizerConfig(steps=0), params0=p0)
        assert np.array_equal(res.params, p0)
        assert res.energy == pytest.approx(energy(build_ansatz(spec), p0, build_tfim(3, 1.0)))


class TestRestarts:
    cfg = OptimizerConfig(steps=150, restarts=3)

    def test_single_restart_is_adam_run(self):
        spec, ham = AnsatzSpec("ladder", 3, 1), build_tfim(3, 1.0)
        cfg = OptimizerConfig(steps=100, restarts=1)
        best = multi_restart(spec, ham, cfg, seed=4)
        one = adam_run(spec, ham, cfg, seed=4, restart=0)
        assert np.array_equal(best.params, one.params)

    def test_best_is_minimum(self):
        spec, ham = AnsatzSpec("ladder", 3, 1), build_tfim(3, 1.0)
        best, runs = multi_restart(spec, ham, self.cfg, seed=2, return_all=True)
        assert best.energy == min(r.energy for r in runs)
        assert best.energy >= ground_state_exact(ham)[0] - 1e-9

    def test_best_so_far_monotone(self):
        spec, ham = AnsatzSpec("ladder", 3, 1), build_tfim(3, 1.0)
        _, runs = multi_restart(spec, ham, self.cfg, seed=2, return_all=True)
        best = np.minimum.accumulate([r.energy for r in runs])
        assert np.all(np.diff(best) <= 0)

    def test_workers_do_not_change_results(self):
        spec, ham = AnsatzSpec("ladder", 3, 1), build_tfim(3, 1.0)
        a = multi_restart(spec, ham, self.cfg, seed=5, workers=1)
        b = multi_restart(spec, ham, self.cfg, seed=5, workers=2)
        assert a.restart == b.restart and np.array_equal(a.params, b.params)

    def test_classical_point(self):
        pt = converged_point(AnsatzSpec("ladder", 4, 1), build_tfim(4, 0.0), OptimizerConfig(steps=500, restarts=2))
        assert pt.msq == pytest.approx(1.0, abs=1e-6)
