"""Open-boundary transverse-field Ising chain and its exact oracles.

``H = h * sum_i X_i - sum_i Z_i Z_{i+1}``; the critical point is ``h = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ArgumentError, CapacityError, ShapeError
from .qsim import PauliString, PauliSum, Statevector

EXACT_MAX_QUBITS = 14
CRITICAL_H = 1.0


@dataclass(frozen=True)
class Hamiltonian:
    n_qubits: int
    field_h: float
    terms: tuple = field(default=(), compare=False)

    @property
    def detuning_g(self) -> float:
        return self.field_h - CRITICAL_H

    @cached_property
    def operator(self) -> PauliSum:
        return PauliSum(self.n_qubits, self.terms)

    def apply(self, amps: np.ndarray) -> np.ndarray:
        return self.operator.apply(amps)

    def expectation(self, state: Statevector) -> float:
        return self.operator.expectation(state)

    def dense(self) -> np.ndarray:
        """Real symmetric matrix (the TFIM is real in the Z basis)."""
        return self.operator.dense().real

    @cached_property
    def _eig(self):
        if self.n_qubits > EXACT_MAX_QUBITS:
            raise CapacityError(
                f"dense diagonalisation capped at {EXACT_MAX_QUBITS} qubits, got {self.n_qubits}")
        return np.linalg.eigh(self.dense())


def build_tfim(n: int, h: float) -> Hamiltonian:
    if n < 1:
        raise ArgumentError("n must be >= 1")
    h = float(h)
    terms = [PauliString.of({i: "X"}, h) for i in range(n)]
    terms += [PauliString.of({i: "Z", i + 1: "Z"}, -1.0) for i in range(n - 1)]
    return Hamiltonian(n, h, tuple(terms))


def ground_state_exact(ham: Hamiltonian) -> tuple[float, Statevector]:
    w, v = ham._eig
    return float(w[0]), Statevector(ham.n_qubits, v[:, 0].astype(np.complex128))


def spectral_gap(ham: Hamiltonian) -> float:
    w, _ = ham._eig
    return float(w[1] - w[0]) if len(w) > 1 else float("inf")


@dataclass
class ExactTrajectory:
    taus: np.ndarray
    states: list
    norms_Z: np.ndarray


def exact_ite(ham: Hamiltonian, psi0: Statevector, taus) -> ExactTrajectory:
    """Normalised ``exp(-tau H)|psi0>`` on a grid, from one eigendecomposition.

    ``norms_Z`` holds ``<psi0|exp(-2 tau H)|psi0>``, computed relative to the
    ground energy and rescaled by ``exp(-2 tau E0)`` so it stays finite only
    while that factor does; the normalised states never overflow.
    """
    taus = np.asarray(taus, dtype=np.float64).reshape(-1)
    if psi0.n_qubits != ham.n_qubits:
        raise ShapeError("state and Hamiltonian sizes differ")
    if len(taus) and taus[0] < 0:
        raise ArgumentError("imaginary times must be non-negative")
    if np.any(np.diff(taus) <= 0):
        raise ArgumentError("tau grid must be strictly increasing")
    w, v = ham._eig
    coeffs = v.T @ psi0.amplitudes
    shifted = w - w[0]
    states, norms = [], []
    for t in taus:
        if t == 0:
            amps = psi0.amplitudes.copy()
            z = float(np.vdot(amps, amps).real)
        else:
            c = coeffs * np.exp(-shifted * t)
            amps = v @ c
            nrm = np.linalg.norm(amps)
            amps = amps / nrm
            z = nrm ** 2 * np.exp(-2.0 * w[0] * t)
        states.append(Statevector(ham.n_qubits, amps))
        norms.append(z)
    return ExactTrajectory(taus, states, np.asarray(norms))
