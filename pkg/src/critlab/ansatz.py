"""Hardware-efficient circuit families and their initial conditions.

``ladder`` block (repeated ``depth`` times)::

    Rx on every qubit -> Rzz on bonds (0,1), (1,2), ... -> Rz on every qubit -> Ry on every qubit

``brickwall`` block::

    Rx on every qubit -> Rzz on even bonds (0,1), (2,3), ... -> Rzz on odd bonds (1,2), ...

Every rotation has its own parameter.  With one qubit the ladder block
reduces to Rx, Rz, Ry.  X gates from ``flip_mask`` precede
the first block and carry no parameter.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ArgumentError
from .qsim import Circuit

FAMILIES = ("ladder", "brickwall")


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    n_qubits: int
    depth: int
    flip_mask: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ArgumentError(f"unknown ansatz family {self.family!r}; expected one of {FAMILIES}")
        if self.n_qubits < 1 or self.depth < 1:
            raise ArgumentError("n_qubits and depth must be positive")
        if self.flip_mask < 0 or self.flip_mask >> self.n_qubits:
            raise ArgumentError(f"flip_mask {self.flip_mask:#x} has bits beyond {self.n_qubits} qubits")

    @property
    def n_params(self) -> int:
        return param_count(self.family, self.n_qubits, self.depth)

    def flipped_qubits(self) -> list[int]:
        return [q for q in range(self.n_qubits) if (self.flip_mask >> q) & 1]

    def to_dict(self) -> dict:
        return asdict(self)


def param_count(family: str, n: int, depth: int) -> int:
    if family == "ladder":
        return depth * (4 * n - 1)
    if family == "brickwall":
        return depth * (2 * n - 1)
    raise ArgumentError(f"unknown ansatz family {family!r}")


def build_ansatz(spec: AnsatzSpec) -> Circuit:
    n = spec.n_qubits
    if n < 2 and spec.family == "brickwall":
        raise ArgumentError("brickwall ansatz needs at least 2 qubits")
    circ = Circuit(n)
    for q in spec.flipped_qubits():
        circ.x(q)
    for _ in range(spec.depth):
        for q in range(n):
            circ.rx(q)
        if spec.family == "ladder":
            for q in range(n - 1):
                circ.rzz(q, q + 1)
            for q in range(n):
                circ.rz(q)
            for q in range(n):
                circ.ry(q)
        else:
            for q in range(0, n - 1, 2):
                circ.rzz(q, q + 1)
            for q in range(1, n - 1, 2):
                circ.rzz(q, q + 1)
    return circ


def slot_kinds(spec: AnsatzSpec) -> list[str]:
    """Generator label (``X``, ``ZZ``, ``Z``, ``Y``) of each parameter slot."""
    kinds = [""] * spec.n_params
    for g in build_ansatz(spec).gates:
        if g.param_slot is not None:
            kinds[g.param_slot] = g.generator
    return kinds


def perturbed_init(param_count: int, sigma: float = 0.002, seed: int = 0) -> np.ndarray:
    """I.i.d. ``N(0, sigma^2)`` starting parameters."""
    if sigma < 0:
        raise ArgumentError("sigma must be non-negative")
    if sigma == 0:
        return np.zeros(param_count)
    return np.random.default_rng(seed).normal(0.0, sigma, size=param_count)


def random_half_flip_mask(n: int, seed: int) -> int:
    """Bit mask with exactly ``n // 2`` qubits set, uniformly chosen."""
    if n < 2:
        raise ArgumentError("need at least 2 qubits to flip half of them")
    chosen = np.random.default_rng(seed).choice(n, size=n // 2, replace=False)
    mask = 0
    for q in chosen:
        mask |= 1 << int(q)
    return mask


def mask_signs(n: int, flip_mask: int) -> np.ndarray:
    """Initial ``Z`` eigenvalue of each qubit under ``flip_mask`` (+1 unflipped)."""
    return np.array([-1.0 if (flip_mask >> q) & 1 else 1.0 for q in range(n)])
