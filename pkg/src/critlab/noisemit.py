"""Noisy-device emulation and the two error-mitigation tiers.

Gate noise is a depolarising channel after every gate, sampled as Pauli
trajectories: with probability ``p`` a uniformly random non-identity Pauli on
the gate's support is inserted.  Readout flips ``0 -> 1`` with probability
``eps_i`` and ``1 -> 0`` with probability ``eta_i`` independently per qubit.

Readout mitigation inverts the per-qubit flip channel at the level of
``<Z_i>``.  Extended Clifford data regression (CDR) learns an affine map
``m_ideal = a * m_noisy + b`` from near-Clifford copies of the target circuit,
pooling several groups with different fractions ``r`` of retained
non-Clifford rotations.

Rotation angles follow the usual convention ``R_P(phi) = exp(-i phi P / 2)``,
so the gate ``exp(-i theta P)`` of :mod:`critlab.qsim` has ``phi = 2 theta`` and
is Clifford when ``phi`` is a multiple of pi/2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, CapacityError, FitError, SingularMitigationError
from .qsim import Circuit, Gate, apply_circuit, bitstring, new_state, z_expectations

DEVICE_DEPOL_1Q = 0.14e-2
DEVICE_DEPOL_2Q = 1.6e-2
DEVICE_READOUT = 7e-2
DEFAULT_SHOTS = 8192
MAX_TRAJECTORIES = 1024
DENSITY_MAX_QUBITS = 4
CLIFFORD_TOL = 1e-9
HALF_PI = math.pi / 2

_PAULI_1Q = "IXYZ"


@dataclass(frozen=True)
class NoiseModel:
    readout_eps: tuple
    readout_eta: tuple
    depol_1q: float = 0.0
    depol_2q: float = 0.0
    shots: int = DEFAULT_SHOTS
    trajectories: int = MAX_TRAJECTORIES

    def __post_init__(self):
        eps = tuple(float(e) for e in np.atleast_1d(self.readout_eps))
        eta = tuple(float(e) for e in np.atleast_1d(self.readout_eta))
        object.__setattr__(self, "readout_eps", eps)
        object.__setattr__(self, "readout_eta", eta)
        if len(eps) != len(eta):
            raise ArgumentError("readout_eps and readout_eta differ in length")
        for e, h in zip(eps, eta):
            if not (0 <= e <= 1 and 0 <= h <= 1 and e + h < 1):
                raise ArgumentError(f"invalid readout rates eps={e}, eta={h}; need eps + eta < 1")
        for p in (self.depol_1q, self.depol_2q):
            if not 0 <= p <= 1:
                raise ArgumentError(f"depolarising probability {p} outside [0, 1]")
        if self.shots < 1 or self.trajectories < 1:
            raise ArgumentError("shots and trajectories must be >= 1")

    @property
    def n_qubits(self) -> int:
        return len(self.readout_eps)

    @property
    def gate_noise(self) -> bool:
        return self.depol_1q > 0 or self.depol_2q > 0

    @classmethod
    def noiseless(cls, n: int, shots: int = DEFAULT_SHOTS) -> "NoiseModel":
        return cls((0.0,) * n, (0.0,) * n, 0.0, 0.0, shots)

    @classmethod
    def device_default(cls, n: int, shots: int = DEFAULT_SHOTS) -> "NoiseModel":
        return cls((DEVICE_READOUT,) * n, (DEVICE_READOUT,) * n, DEVICE_DEPOL_1Q, DEVICE_DEPOL_2Q, shots)

    def to_dict(self) -> dict:
        return {"readout_eps": list(self.readout_eps), "readout_eta": list(self.readout_eta),
                "depol_1q": self.depol_1q, "depol_2q": self.depol_2q, "shots": self.shots,
                "trajectories": self.trajectories}


# --------------------------------------------------------------------------
# batched gate application (rows of ``B`` are independent states)
# --------------------------------------------------------------------------

def _split(B: np.ndarray, n: int, q: int):
    return B.reshape(B.shape[0], 1 << q, 2, 1 << (n - 1 - q))


def _apply_1q(B, n, q, m):
    v = _split(B, n, q)
    a, b = v[:, :, 0, :].copy(), v[:, :, 1, :].copy()
    v[:, :, 0, :] = m[0, 0] * a + m[0, 1] * b
    v[:, :, 1, :] = m[1, 0] * a + m[1, 1] * b


_PMATS = {
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def _z_row(n, q):
    idx = np.arange(1 << n)
    return 1.0 - 2.0 * ((idx >> (n - 1 - q)) & 1)


def _apply_gate(B, n, gate: Gate, theta: Optional[float]):
    if theta is None:
        for q, p in zip(gate.qubits, gate.generator):
            _apply_1q(B, n, q, _PMATS[p])
        return
    if gate.generator == "ZZ":
        a, b = gate.qubits
        B *= np.exp(-1j * theta * _z_row(n, a) * _z_row(n, b))
        return
    m = math.cos(theta) * np.eye(2) - 1j * math.sin(theta) * _PMATS[gate.generator]
    _apply_1q(B, n, gate.qubits[0], m)


def _apply_pauli_rows(B, n, rows, qubits, labels):
    """Apply the Pauli ``labels[k]`` (index into IXYZ per qubit) to selected rows."""
    if rows.size == 0:
        return
    sub = B[rows]
    for j, q in enumerate(qubits):
        lab = labels[:, j]
        for code in (1, 2, 3):
            sel = np.flatnonzero(lab == code)
            if sel.size:
                part = sub[sel]
                _apply_1q(part, n, q, _PMATS[_PAULI_1Q[code]])
                sub[sel] = part
    B[rows] = sub


def _pauli_labels(k: int):
    """All non-identity Pauli labels on ``k`` qubits as an int array ``(4**k - 1, k)``."""
    return np.array([lab for lab in itertools.product(range(4), repeat=k) if any(lab)], dtype=np.int64)


_LABELS = {1: _pauli_labels(1), 2: _pauli_labels(2)}


def _gate_prob(noise: NoiseModel, gate: Gate) -> float:
    return noise.depol_1q if len(gate.qubits) == 1 else noise.depol_2q


def _check(circuit: Circuit, params, noise: NoiseModel) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.shape[0] != circuit.n_params:
        raise ArgumentError(f"circuit takes {circuit.n_params} parameters, got {params.shape[0]}")
    if noise.n_qubits != circuit.n_qubits:
        raise ArgumentError("noise model and circuit sizes differ")
    return params


def trajectory_states(circuit: Circuit, params, noise: NoiseModel, n_traj: int,
                      rng: np.random.Generator) -> np.ndarray:
    """``(n_traj, 2^N)`` final states, each with its own sampled gate errors."""
    n = circuit.n_qubits
    B = np.zeros((n_traj, 1 << n), dtype=np.complex128)
    B[:, 0] = 1.0
    for g in circuit.gates:
        _apply_gate(B, n, g, None if g.param_slot is None else params[g.param_slot])
        p = _gate_prob(noise, g)
        if p > 0:
            hit = np.flatnonzero(rng.random(n_traj) < p)
            labels = _LABELS[len(g.qubits)]
            pick = labels[rng.integers(0, len(labels), size=hit.size)]
            _apply_pauli_rows(B, n, hit, g.qubits, pick)
    return B


def _readout(bits: np.ndarray, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    eps = np.asarray(noise.readout_eps)
    eta = np.asarray(noise.readout_eta)
    u = rng.random(bits.shape)
    flip = np.where(bits == 0, u < eps, u < eta)
    return bits ^ flip.astype(bits.dtype)


def noisy_bits(circuit: Circuit, params, noise: NoiseModel, seed) -> np.ndarray:
    """``(shots, N)`` array of read-out bits (column ``q`` is qubit ``q``)."""
    params = _check(circuit, params, noise)
    rng = np.random.default_rng(seed)
    n = circuit.n_qubits
    n_traj = min(noise.trajectories, noise.shots) if noise.gate_noise else 1
    if noise.gate_noise:
        probs = np.abs(trajectory_states(circuit, params, noise, n_traj, rng)) ** 2
    else:
        probs = np.abs(apply_circuit(new_state(n), circuit, params).amplitudes[None, :]) ** 2
    per = np.full(n_traj, noise.shots // n_traj)
    per[: noise.shots % n_traj] += 1
    idx = []
    for t in range(n_traj):
        p = probs[t] / probs[t].sum()
        counts = rng.multinomial(per[t], p)
        idx.append(np.repeat(np.arange(p.size), counts))
    idx = np.concatenate(idx)
    bits = ((idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(np.int8)
    return _readout(bits, noise, rng)


def counts_from_bits(bits: np.ndarray) -> dict:
    n = bits.shape[1]
    idx = bits.astype(np.int64) @ (1 << (n - 1 - np.arange(n)))
    vals, cnt = np.unique(idx, return_counts=True)
    return {bitstring(int(v), n): int(c) for v, c in zip(vals, cnt)}


def noisy_execute(circuit: Circuit, params, noise: NoiseModel, seed) -> dict:
    """Counts table ``{bitstring: count}`` from the emulated device."""
    return counts_from_bits(noisy_bits(circuit, params, noise, seed))


# --------------------------------------------------------------------------
# readout mitigation
# --------------------------------------------------------------------------

def _frequencies(counts: dict, qubit: int) -> tuple[float, float]:
    total = float(sum(counts.values()))
    if total <= 0:
        raise ArgumentError("empty counts table")
    ones = sum(c for b, c in counts.items() if b[qubit] == "1")
    return (total - ones) / total, ones / total


def mitigate_frequencies(p0, p1, eps, eta):
    """Readout-inverted ``<Z>`` from frequencies (scalars or arrays)."""
    eps = np.asarray(eps, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    den = 1.0 - eps - eta
    if np.any(den <= 0):
        raise SingularMitigationError("eps + eta must be < 1 for readout mitigation")
    return (p0 * (1 + eps - eta) - p1 * (1 - eps + eta)) / den


def mitigated_z(counts: dict, qubit: int, eps: float, eta: float) -> float:
    """``<Z_qubit>`` with the readout channel inverted; not clipped to [-1, 1]."""
    if eps + eta >= 1:
        raise SingularMitigationError(f"eps + eta = {eps + eta} >= 1")
    p0, p1 = _frequencies(counts, qubit)
    return float(mitigate_frequencies(p0, p1, eps, eta))


def mitigated_z_all(bits: np.ndarray, eps, eta) -> np.ndarray:
    p1 = bits.mean(axis=0)
    return mitigate_frequencies(1.0 - p1, p1, eps, eta)


def readout_calibrate(noise: NoiseModel, n: int, shots: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Per-qubit flip rates measured on ``|0...0>`` and ``X^N |0...0>``."""
    model = NoiseModel(noise.readout_eps, noise.readout_eta, noise.depol_1q, noise.depol_2q, shots,
                       noise.trajectories)
    zero = Circuit(n)
    ones = Circuit(n)
    for q in range(n):
        ones.x(q)
    ss = np.random.SeedSequence(seed)
    s0, s1 = ss.spawn(2)
    eps_hat = noisy_bits(zero, [], model, s0).mean(axis=0)
    eta_hat = 1.0 - noisy_bits(ones, [], model, s1).mean(axis=0)
    return eps_hat, eta_hat


def readout_distribution(probs: np.ndarray, eps, eta) -> dict:
    """Exact read-out frequencies for true basis probabilities ``probs``."""
    n = int(round(math.log2(probs.size)))
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), (n,))
    eta = np.broadcast_to(np.asarray(eta, dtype=np.float64), (n,))
    t = probs.reshape((2,) * n)
    for q in range(n):
        conf = np.array([[1 - eps[q], eta[q]], [eps[q], 1 - eta[q]]])  # [read, true]
        t = np.moveaxis(np.tensordot(conf, t, axes=([1], [q])), 0, q)
    flat = t.reshape(-1)
    return {bitstring(i, n): float(flat[i]) for i in range(flat.size)}


# --------------------------------------------------------------------------
# exact density-matrix reference (small N)
# --------------------------------------------------------------------------

@dataclass
class ExactNoisy:
    z_gate: np.ndarray      # <Z_i> after gate noise, before readout
    z_readout: np.ndarray   # expected raw <Z_i> including readout flips
    rho: np.ndarray


def density_matrix_z(circuit: Circuit, params, noise: NoiseModel) -> ExactNoisy:
    """Exact depolarised evolution of the density matrix; N <= 4 only."""
    params = _check(circuit, params, noise)
    n = circuit.n_qubits
    if n > DENSITY_MAX_QUBITS:
        raise CapacityError(f"density-matrix reference limited to {DENSITY_MAX_QUBITS} qubits")
    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[0, 0] = 1.0

    def conj_by(op):
        m = op(rho.T.copy()).T
        return op(m.conj().copy()).conj()

    for g in circuit.gates:
        theta = None if g.param_slot is None else params[g.param_slot]
        rho = conj_by(lambda B: (_apply_gate(B, n, g, theta), B)[1])
        p = _gate_prob(noise, g)
        if p > 0:
            labels = _LABELS[len(g.qubits)]
            acc = np.zeros_like(rho)
            for lab in labels:
                acc += conj_by(lambda B, lab=lab: (_apply_pauli_rows(B, n, np.arange(B.shape[0]), g.qubits,
                                                                      np.tile(lab, (B.shape[0], 1))), B)[1])
            rho = (1 - p) * rho + p / len(labels) * acc
    diag = rho.diagonal().real
    zs = np.array([_z_row(n, q) for q in range(n)])
    z_gate = zs @ diag
    p1 = (1 - z_gate) / 2
    eps = np.asarray(noise.readout_eps)
    eta = np.asarray(noise.readout_eta)
    p1_read = (1 - p1) * eps + p1 * (1 - eta)
    return ExactNoisy(z_gate, 1 - 2 * p1_read, rho)


# --------------------------------------------------------------------------
# Clifford data regression
# --------------------------------------------------------------------------

EARLY_GROUPS = ((5, 0.6), (5, 0.7), (5, 0.8), (5, 0.9))
LATE_GROUPS = ((5, 0.8), (5, 0.9), (5, 0.95))
GROUP_SWITCH_TAU = 1.0


@dataclass(frozen=True)
class CdrConfig:
    groups: tuple = EARLY_GROUPS
    seed: int = 0

    def __post_init__(self):
        groups = tuple((int(n), float(r)) for n, r in self.groups)
        object.__setattr__(self, "groups", groups)
        if any(n < 0 or not 0 <= r <= 1 for n, r in groups):
            raise ArgumentError("CDR groups need n_i >= 0 and 0 <= r_i <= 1")
        if sum(n for n, _ in groups) < 2:
            raise ArgumentError("CDR needs at least two training circuits")

    @classmethod
    def for_tau(cls, tau: float, seed: int = 0, switch: float = GROUP_SWITCH_TAU) -> "CdrConfig":
        return cls(EARLY_GROUPS if tau < switch else LATE_GROUPS, seed)


@dataclass(frozen=True)
class CdrFit:
    a: float
    b: float
    residual: float


def round_angle(phi: float) -> float:
    """Nearest multiple of pi/2, ties rounded up."""
    return math.floor(phi / HALF_PI + 0.5) * HALF_PI


def is_clifford_angle(phi: float, tol: float = CLIFFORD_TOL) -> bool:
    return abs(phi - round_angle(phi)) <= tol


def _rotation_slots(circuit: Circuit) -> list[int]:
    """Slots driven only by single-qubit rotations, in first-use order."""
    multi = {g.param_slot for g in circuit.gates if g.param_slot is not None and len(g.qubits) > 1}
    seen = []
    for g in circuit.gates:
        s = g.param_slot
        if s is not None and len(g.qubits) == 1 and s not in multi and s not in seen:
            seen.append(s)
    return seen


def near_clifford_variants(circuit: Circuit, params, cfg: CdrConfig) -> list[tuple]:
    """``(circuit, params, group_id)`` training copies of the target.

    In group ``i`` a uniformly random ``round((1 - r_i) * K)`` of the ``K``
    non-Clifford single-qubit rotations are snapped to the nearest Clifford
    angle.  The gate list is shared with the target; two-qubit rotations are
    never touched.
    """
    params = np.asarray(params, dtype=np.float64)
    slots = _rotation_slots(circuit)
    non_cliff = [s for s in slots if not is_clifford_angle(2 * params[s])]
    out = []
    for gid, (count, r) in enumerate(cfg.groups):
        k = int(round((1 - r) * len(non_cliff)))
        for j in range(count):
            rng = np.random.default_rng((cfg.seed, gid, j))
            chosen = rng.choice(len(non_cliff), size=k, replace=False) if k else []
            p = params.copy()
            for c in chosen:
                s = non_cliff[c]
                p[s] = round_angle(2 * p[s]) / 2
            out.append((circuit, p, gid))
    return out


def cdr_fit(pairs: Sequence[tuple]) -> CdrFit:
    """Least-squares ``ideal = a * noisy + b``; residual is the 2-norm of the misfit."""
    arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] < 2:
        raise FitError("CDR needs at least two training pairs")
    x, y = arr[:, 0], arr[:, 1]
    if np.ptp(x) <= 1e-15 * max(1.0, np.abs(x).max()):
        raise FitError("all noisy training values are equal; the regression is degenerate")
    A = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    return CdrFit(float(a), float(b), float(np.linalg.norm(A @ [a, b] - y)))


def cdr_apply(fit: CdrFit, noisy_value):
    return fit.a * noisy_value + fit.b


# --------------------------------------------------------------------------
# end-to-end pipeline
# --------------------------------------------------------------------------

def ideal_m(circuit: Circuit, params) -> float:
    return float(z_expectations(apply_circuit(new_state(circuit.n_qubits), circuit, params)).mean())


def readout_mitigated_m(circuit: Circuit, params, noise: NoiseModel, seed, eps_hat=None, eta_hat=None) -> float:
    bits = noisy_bits(circuit, params, noise, seed)
    eps = noise.readout_eps if eps_hat is None else eps_hat
    eta = noise.readout_eta if eta_hat is None else eta_hat
    return float(mitigated_z_all(bits, eps, eta).mean())


@dataclass
class CdrReport:
    raw: float
    mitigated: float
    exact: float
    fit: CdrFit
    training: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"raw": self.raw, "mit": self.mitigated, "exact": self.exact, "a": self.fit.a,
                "b": self.fit.b, "residual": self.fit.residual, "n_training": len(self.training)}


def extended_cdr(circuit: Circuit, params, noise: NoiseModel, cfg: CdrConfig, seed,
                 eps_hat=None, eta_hat=None) -> CdrReport:
    """Readout-mitigated (``raw``) and CDR-mitigated estimates of ``m`` for one circuit."""
    ss = np.random.SeedSequence(seed)
    variants = near_clifford_variants(circuit, params, cfg)
    seeds = ss.spawn(len(variants) + 1)
    raw = readout_mitigated_m(circuit, params, noise, seeds[0], eps_hat, eta_hat)
    pairs = []
    for (c, p, _), s in zip(variants, seeds[1:]):
        pairs.append((readout_mitigated_m(c, p, noise, s, eps_hat, eta_hat), ideal_m(c, p)))
    fit = cdr_fit(pairs)
    return CdrReport(raw, float(cdr_apply(fit, raw)), ideal_m(circuit, params), fit, pairs)
