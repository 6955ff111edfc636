import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critlab.ansatz import (AnsatzSpec, build_ansatz, mask_signs, param_count, perturbed_init,
                            random_half_flip_mask, slot_kinds)
from critlab.errors import ArgumentError
from critlab.qsim import apply_circuit, new_state


class TestCounts:
    def test_ladder_example(self):
        assert AnsatzSpec("ladder", 4, 1).n_params == 15
        assert build_ansatz(AnsatzSpec("ladder", 4, 1)).n_params == 15

    def test_brickwall_example(self):
        assert build_ansatz(AnsatzSpec("brickwall", 4, 2)).n_params == 14

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 14), st.integers(1, 10), st.sampled_from(["ladder", "brickwall"]))
    def test_formulas(self, n, d, fam):
        circ = build_ansatz(AnsatzSpec(fam, n, d))
        expected = d * (4 * n - 1) if fam == "ladder" else d * (2 * n - 1)
        assert circ.n_params == param_count(fam, n, d) == expected
        slots = [g.param_slot for g in circ.gates if g.param_slot is not None]
        assert sorted(slots) == list(range(expected))


class TestStructure:
    def test_ladder_order(self):
        kinds = slot_kinds(AnsatzSpec("ladder", 3, 1))
        assert kinds == ["X"] * 3 + ["ZZ"] * 2 + ["Z"] * 3 + ["Y"] * 3
        bonds = [g.qubits for g in build_ansatz(AnsatzSpec("ladder", 4, 1)).gates if g.generator == "ZZ"]
        assert bonds == [(0, 1), (1, 2), (2, 3)]

    def test_brickwall_even_then_odd(self):
        bonds = [g.qubits for g in build_ansatz(AnsatzSpec("brickwall", 5, 1)).gates if g.generator == "ZZ"]
        assert bonds == [(0, 1), (2, 3), (1, 2), (3, 4)]

    def test_flips_first_and_unparameterised(self):
        circ = build_ansatz(AnsatzSpec("ladder", 4, 2, flip_mask=0b1010))
        head = circ.gates[:2]
        assert [g.qubits for g in head] == [(1,), (3,)]
        assert all(g.generator == "X" and g.param_slot is None for g in head)
        assert circ.n_params == 30

    def test_flip_mask_state(self):
        circ = build_ansatz(AnsatzSpec("ladder", 4, 1, flip_mask=0b0011))
        out = apply_circuit(new_state(4), circ, np.zeros(circ.n_params))
        # qubits 0 and 1 flipped -> |1100> = index 12
        assert abs(out.amplitudes[12]) == pytest.approx(1.0)
        assert np.array_equal(mask_signs(4, 0b0011), [-1, -1, 1, 1])

    def test_deterministic(self):
        a = build_ansatz(AnsatzSpec("brickwall", 6, 3, 5))
        b = build_ansatz(AnsatzSpec("brickwall", 6, 3, 5))
        assert a.gates == b.gates

    def test_invalid(self):
        with pytest.raises(ArgumentError):
            AnsatzSpec("mera", 4, 1)
        with pytest.raises(ArgumentError):
            AnsatzSpec("ladder", 4, 0)
        with pytest.raises(ArgumentError):
            AnsatzSpec("ladder", 2, 1, flip_mask=0b100)
        with pytest.raises(ArgumentError):
            build_ansatz(AnsatzSpec("brickwall", 1, 1))


class TestPerturbedInit:
    def test_zero_sigma(self):
        assert np.array_equal(perturbed_init(7, 0.0, 3), np.zeros(7))

    def test_sample_std(self):
        assert 0.0017 <= perturbed_init(10**4, 0.002, 1).std() <= 0.0023

    def test_seeded(self):
        assert np.array_equal(perturbed_init(20, 0.002, 4), perturbed_init(20, 0.002, 4))
        assert not np.array_equal(perturbed_init(20, 0.002, 4), perturbed_init(20, 0.002, 5))

    def test_negative_sigma(self):
        with pytest.raises(ArgumentError):
            perturbed_init(3, -1.0)


class TestHalfFlip:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 14), st.integers(0, 10**6))
    def test_popcount(self, n, seed):
        mask = random_half_flip_mask(n, seed)
        assert bin(mask).count("1") == n // 2
        assert mask >> n == 0

    def test_seeded(self):
        assert random_half_flip_mask(8, 3) == random_half_flip_mask(8, 3)

    def test_uniform_frequency(self):
        n, trials = 8, 4000
        counts = np.zeros(n)
        for s in range(trials):
            m = random_half_flip_mask(n, s)
            counts += [(m >> q) & 1 for q in range(n)]
        freq = counts / trials
        assert np.all(np.abs(freq - 0.5) <= 5 * np.sqrt(0.25 / trials))

    def test_too_small(self):
        with pytest.raises(ArgumentError):
            random_half_flip_mask(1, 0)
