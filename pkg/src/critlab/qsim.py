"""Dense statevector engine.

Conventions
-----------
* Qubit 0 is the most significant bit of the basis index, so the basis
  state ``|q0 q1 ... q_{n-1}>`` has index ``sum_q q_k 2^(n-1-k)``.
* A parameterised gate with generator ``P`` implements ``exp(-i theta P)``.
  Unparameterised gates apply the Pauli ``P`` itself (an X gate flips a bit).

Circuits are lowered to *stages* before simulation: every non-diagonal gate
is its own 2x2 stage, and each maximal run of consecutive diagonal gates
(Z, ZZ) is merged into a single phase vector.  The kernels in
``critlab._ckernels`` / ``critlab._pykernels`` only see stages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import _backend
from .errors import ArgumentError, CapacityError, NumericError, ShapeError

MAX_QUBITS = 24
SIGN_CACHE_QUBITS = 16

GENERATORS = ("X", "Y", "Z", "ZZ")


# --------------------------------------------------------------------------
# Pauli strings
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PauliString:
    """Real multiple of a tensor product of X/Y/Z factors.

    ``factors`` is a sorted tuple of ``(qubit, letter)`` pairs.  Use
    :meth:`of` to build one from a mapping such as ``{0: "Z", 1: "Z"}``.
    """

    factors: tuple = ()
    coefficient: float = 1.0

    def __post_init__(self):
        facs = tuple(sorted((int(q), str(p).upper()) for q, p in self.factors))
        qubits = [q for q, _ in facs]
        if len(set(qubits)) != len(qubits):
            raise ArgumentError(f"repeated qubit in Pauli string {facs}")
        for q, p in facs:
            if p not in "XYZ" or len(p) != 1:
                raise ArgumentError(f"invalid Pauli letter {p!r}")
            if q < 0:
                raise ShapeError(f"negative qubit index {q}")
        object.__setattr__(self, "factors", facs)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @classmethod
    def of(cls, factors: Mapping[int, str] | str, coefficient: float = 1.0) -> "PauliString":
        if isinstance(factors, str):
            # dense label, e.g. "ZIZ"
            factors = {q: p for q, p in enumerate(factors.upper()) if p != "I"}
        return cls(tuple(factors.items()), coefficient)

    @property
    def support(self) -> tuple:
        return tuple(q for q, _ in self.factors)

    def masks(self, n_qubits: int) -> tuple[int, int, int]:
        """Return ``(xmask, zmask, n_y)`` for an ``n_qubits`` register."""
        xm = zm = ny = 0
        for q, p in self.factors:
            if q >= n_qubits:
                raise ShapeError(f"qubit {q} outside a {n_qubits}-qubit register")
            b = 1 << (n_qubits - 1 - q)
            if p in "XY":
                xm |= b
            if p in "YZ":
                zm |= b
            ny += p == "Y"
        return xm, zm, ny

    def __str__(self):
        body = " ".join(f"{p}{q}" for q, p in self.factors) or "I"
        return f"{self.coefficient:+g}*{body}"


def _commute(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return bin((a[0] & b[1]) ^ (a[1] & b[0])).count("1") % 2 == 0


# --------------------------------------------------------------------------
# Statevector
# --------------------------------------------------------------------------

@dataclass
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ShapeError(
                f"{self.n_qubits} qubits need {1 << self.n_qubits} amplitudes, "
                f"got shape {self.amplitudes.shape}")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amplitudes.copy())


def new_state(n: int) -> Statevector:
    """``|0...0>`` on ``n`` qubits."""
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"n_qubits={n} outside [1, {MAX_QUBITS}]")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n, amps)


def basis_state(n: int, bits: int) -> Statevector:
    """Computational basis state with qubit ``q`` set iff bit ``q`` of ``bits`` is set."""
    state = new_state(n)
    idx = sum(1 << (n - 1 - q) for q in range(n) if (bits >> q) & 1)
    state.amplitudes[0] = 0.0
    state.amplitudes[idx] = 1.0
    return state


# --------------------------------------------------------------------------
# Circuits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Gate:
    generator: str
    qubits: tuple
    param_slot: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.generator not in GENERATORS:
            raise ArgumentError(f"unsupported generator {self.generator!r}")
        if len(self.qubits) != len(self.generator):
            raise ArgumentError(f"{self.generator} needs {len(self.generator)} qubits")
        if len(set(self.qubits)) != len(self.qubits):
            raise ArgumentError(f"gate support {self.qubits} has repeated qubits")

    @property
    def pauli(self) -> PauliString:
        return PauliString(tuple(zip(self.qubits, self.generator)))

    @property
    def diagonal(self) -> bool:
        return set(self.generator) == {"Z"}


@dataclass
class _Layout:
    """Parameter-independent lowering of a circuit."""

    n_qubits: int
    stage_kind: np.ndarray       # int8: 1 diagonal; 0/2/3 general/real/Rx-type 2x2
    stage_bit: np.ndarray        # int64 bit position for matrix stages
    stage_gates: list            # gate indices per stage
    diag_index: np.ndarray       # int64 row into the diag table (or 0)
    n_diag: int
    # one entry per parameterised gate, sorted by stage
    par_gate: np.ndarray
    par_stage: np.ndarray
    par_start: np.ndarray        # first stage the Jacobian column still passes through
    par_xm: np.ndarray
    par_zm: np.ndarray
    par_coef: np.ndarray         # -i * i^{n_Y}
    par_slot: np.ndarray
    slots_unique: bool
    # per diagonal stage: (parameter slots, their qubit tuples, fixed-gate qubit tuples)
    diag_plan: list = field(default_factory=list)
    # matrix stages: (param stages, their slots, is-Rx flags, fixed stages, fixed matrices)
    mat_plan: tuple = ()
    _sign_cache: dict = field(default_factory=dict, repr=False)

    def diag_signs(self, d: int) -> np.ndarray:
        """``(k, 2^n)`` Z-sign rows of the parameterised gates in diagonal stage ``d``."""
        rows = self._sign_cache.get(d)
        if rows is None:
            rows = _sign_rows(self.n_qubits, self.diag_plan[d][1])
            if self.n_qubits <= SIGN_CACHE_QUBITS:
                self._sign_cache[d] = rows
        return rows


@dataclass
class Circuit:
    """Ordered gate list with a parameter-slot map."""

    n_qubits: int
    gates: list = field(default_factory=list)
    n_params: int = 0

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(f"n_qubits={self.n_qubits} outside [1, {MAX_QUBITS}]")
        self._layout = None
        gates, self.gates = list(self.gates), []
        for g in gates:
            self.append(g)

    def append(self, gate: Gate) -> Gate:
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise ShapeError(f"qubit {q} outside a {self.n_qubits}-qubit circuit")
        if gate.param_slot is not None:
            if gate.param_slot < 0:
                raise ArgumentError("negative parameter slot")
            self.n_params = max(self.n_params, gate.param_slot + 1)
        self.gates.append(gate)
        self._layout = None
        return gate

    def rotation(self, generator: str, *qubits: int, slot: Optional[int] = None) -> int:
        """Append ``exp(-i theta P)``; returns the parameter slot used."""
        if slot is None:
            slot = self.n_params
        self.append(Gate(generator, qubits, slot))
        return slot

    def fixed(self, generator: str, *qubits: int) -> None:
        self.append(Gate(generator, qubits, None))

    def rx(self, q, slot=None):
        return self.rotation("X", q, slot=slot)

    def ry(self, q, slot=None):
        return self.rotation("Y", q, slot=slot)

    def rz(self, q, slot=None):
        return self.rotation("Z", q, slot=slot)

    def rzz(self, q, r, slot=None):
        return self.rotation("ZZ", q, r, slot=slot)

    def x(self, q):
        self.fixed("X", q)

    @property
    def layout(self) -> _Layout:
        if self._layout is None:
            self._layout = _build_layout(self)
        return self._layout

    def __len__(self):
        return len(self.gates)


def _build_layout(circ: Circuit) -> _Layout:
    n = circ.n_qubits
    stages: list[list[int]] = []
    kinds, bits = [], []
    for k, g in enumerate(circ.gates):
        if g.diagonal:
            if kinds and kinds[-1] == 1:
                stages[-1].append(k)
                continue
            kinds.append(1)
            bits.append(0)
        else:
            if g.generator == "Y" and g.param_slot is None:
                kinds.append(0)
            elif g.generator == "X" and g.param_slot is not None:
                kinds.append(3)
            else:
                kinds.append(2)
            bits.append(n - 1 - g.qubits[0])
        stages.append([k])
    gate_stage = np.empty(len(circ.gates), dtype=np.int64)
    for s, members in enumerate(stages):
        gate_stage[members] = s
    masks = [g.pauli.masks(n) for g in circ.gates]
    stage_masks = [[masks[k][:2] for k in members] for members in stages]

    diag_index = np.zeros(len(stages), dtype=np.int64)
    n_diag = 0
    for s, kind in enumerate(kinds):
        if kind == 1:
            diag_index[s] = n_diag
            n_diag += 1

    par = [k for k, g in enumerate(circ.gates) if g.param_slot is not None]
    par_stage = gate_stage[par] if par else np.zeros(0, dtype=np.int64)
    starts = []
    for k in par:
        pk = masks[k][:2]
        e = gate_stage[k]
        # P_k commutes with the rest of its own stage (single gate, or all-diagonal
        # run with diagonal P_k); push it past later stages while they commute.
        while e + 1 < len(stages) and all(_commute(pk, m) for m in stage_masks[e + 1]):
            e += 1
        starts.append(e + 1)
    slots = [circ.gates[k].param_slot for k in par]
    plan = []
    for s, kind in enumerate(kinds):
        if kind == 1:
            gs = [circ.gates[k] for k in stages[s]]
            plan.append((np.asarray([g.param_slot for g in gs if g.param_slot is not None], dtype=np.int64),
                         tuple(g.qubits for g in gs if g.param_slot is not None),
                         tuple(g.qubits for g in gs if g.param_slot is None)))
    pstages = [s for s, k in enumerate(kinds) if k != 1 and circ.gates[stages[s][0]].param_slot is not None]
    fstages = [s for s, k in enumerate(kinds) if k != 1 and circ.gates[stages[s][0]].param_slot is None]
    mat_plan = (
        np.asarray(pstages, dtype=np.int64),
        np.asarray([circ.gates[stages[s][0]].param_slot for s in pstages], dtype=np.int64),
        np.asarray([circ.gates[stages[s][0]].generator == "X" for s in pstages], dtype=bool),
        np.asarray(fstages, dtype=np.int64),
        np.asarray([_FIXED_MATS[circ.gates[stages[s][0]].generator] for s in fstages],
                   dtype=np.complex128).reshape(-1, 4),
    )
    return _Layout(
        n_qubits=n,
        stage_kind=np.asarray(kinds, dtype=np.int8),
        stage_bit=np.asarray(bits, dtype=np.int64),
        stage_gates=stages,
        diag_index=diag_index,
        n_diag=n_diag,
        par_gate=np.asarray(par, dtype=np.int64),
        par_stage=np.asarray(par_stage, dtype=np.int64),
        par_start=np.asarray(starts, dtype=np.int64),
        par_xm=np.asarray([masks[k][0] for k in par], dtype=np.int64),
        par_zm=np.asarray([masks[k][1] for k in par], dtype=np.int64),
        par_coef=np.asarray([-1j * (1j ** masks[k][2]) for k in par], dtype=np.complex128),
        par_slot=np.asarray(slots, dtype=np.int64),
        slots_unique=len(set(slots)) == len(slots) == circ.n_params,
        diag_plan=plan,
        mat_plan=mat_plan,
    )


@lru_cache(maxsize=32)
def z_signs(n: int) -> np.ndarray:
    """``(n, 2^n)`` table of Z eigenvalues, row ``q`` for qubit ``q``."""
    idx = np.arange(1 << n, dtype=np.int64)
    table = np.empty((n, 1 << n))
    for q in range(n):
        table[q] = 1.0 - 2.0 * ((idx >> (n - 1 - q)) & 1)
    table.setflags(write=False)
    return table


def _sign_rows(n: int, qubit_sets) -> np.ndarray:
    zs = z_signs(n)
    rows = np.empty((len(qubit_sets), 1 << n))
    for r, qs in enumerate(qubit_sets):
        rows[r] = zs[qs[0]]
        for q in qs[1:]:
            rows[r] *= zs[q]
    return rows


_FIXED_MATS = {
    "X": (0.0, 1.0, 1.0, 0.0),
    "Y": (0.0, -1j, 1j, 0.0),
}


def _stage_data(circ: Circuit, params: np.ndarray, kernels=None):
    lay = circ.layout
    kernels = kernels or _backend.kernels
    n = circ.n_qubits
    n_st = len(lay.stage_kind)
    mats = np.zeros((n_st, 4), dtype=np.complex128)
    diags = np.empty((lay.n_diag, 1 << n), dtype=np.complex128)
    ps, slots, is_x, fs, fixed = lay.mat_plan
    mats[fs] = fixed
    c, sn = np.cos(params[slots]), np.sin(params[slots])
    mats[ps, 0] = c
    mats[ps, 3] = c
    mats[ps, 1] = np.where(is_x, -1j * sn, -sn)
    mats[ps, 2] = np.where(is_x, -1j * sn, sn)
    for s in np.flatnonzero(lay.stage_kind == 1):
        d_i = lay.diag_index[s]
        slot_idx, _, fixed_q = lay.diag_plan[d_i]
        d = kernels.diag_phase(np.ascontiguousarray(params[slot_idx]), lay.diag_signs(d_i))
        if fixed_q:
            d *= _sign_rows(n, fixed_q).prod(axis=0)
        diags[lay.diag_index[s]] = d
    return lay.stage_kind, lay.stage_bit, mats, lay.diag_index, diags


def _check_inputs(state: Statevector, circuit: Circuit, params) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.shape[0] != circuit.n_params:
        raise ShapeError(f"circuit takes {circuit.n_params} parameters, got {params.shape[0]}")
    if state.n_qubits != circuit.n_qubits:
        raise ShapeError(f"{state.n_qubits}-qubit state vs {circuit.n_qubits}-qubit circuit")
    if not np.all(np.isfinite(params)):
        raise NumericError("non-finite circuit parameters")
    return params


def apply_circuit(state: Statevector, circuit: Circuit, params, *, kernels=None) -> Statevector:
    """Return ``U(params)|state>``."""
    params = _check_inputs(state, circuit, params)
    k = kernels or _backend.kernels
    out = k.run(state.amplitudes, *_stage_data(circuit, params, k))
    return Statevector(state.n_qubits, out)


def jacobian_rows(circuit: Circuit, params, input_state: Statevector, *, kernels=None):
    """Return ``(final_state, J)`` with ``J[j] = d|phi>/d theta_j`` (shape ``P x 2^N``)."""
    params = _check_inputs(input_state, circuit, params)
    k = kernels or _backend.kernels
    stage = _stage_data(circuit, params, k)
    lay = circuit.layout
    states = k.forward(input_state.amplitudes, *stage)
    final = Statevector(circuit.n_qubits, states[-1].copy())
    if circuit.n_params == 0:
        return final, np.zeros((0, input_state.dim), dtype=np.complex128)
    rows = k.jacobian_rows(states, lay.par_start, lay.par_xm, lay.par_zm, lay.par_coef, *stage)
    if lay.slots_unique:
        jac = np.empty_like(rows)
        jac[lay.par_slot] = rows
    else:
        jac = np.zeros((circuit.n_params, input_state.dim), dtype=np.complex128)
        np.add.at(jac, lay.par_slot, rows)
    return final, jac


def state_jacobian(circuit: Circuit, params, input_state: Statevector, *, kernels=None) -> np.ndarray:
    """``2^N x P`` matrix whose column ``j`` is ``d U(params)|input> / d theta_j``."""
    return jacobian_rows(circuit, params, input_state, kernels=kernels)[1].T


# --------------------------------------------------------------------------
# Observables on states
# --------------------------------------------------------------------------

def expect_pauli(state: Statevector, obs: PauliString) -> float:
    xm, zm, ny = obs.masks(state.n_qubits)
    if not obs.factors:
        return obs.coefficient * state.norm() ** 2
    pv = _backend.pure._pauli(state.amplitudes, xm, zm, 1j ** ny)
    val = obs.coefficient * np.vdot(state.amplitudes, pv)
    if abs(val.imag) > 1e-12 * max(1.0, abs(obs.coefficient)):
        raise NumericError(f"expectation of Hermitian {obs} has imaginary part {val.imag:.3e}")
    return float(val.real)


def z_expectations(state: Statevector) -> np.ndarray:
    """``<Z_q>`` for every qubit, as one vector."""
    return z_signs(state.n_qubits) @ state.probabilities()


class PauliSum:
    """Sum of weighted Pauli strings, lowered once for fast application."""

    def __init__(self, n_qubits: int, terms: Iterable[PauliString]):
        self.n_qubits = n_qubits
        self.terms = tuple(terms)
        dim = 1 << n_qubits
        zs = z_signs(n_qubits)
        self._diag = np.zeros(dim)
        xms, zms, coefs = [], [], []
        for t in self.terms:
            xm, zm, ny = t.masks(n_qubits)
            if xm == 0:
                # Z-only term (ny is 0 when xm is 0)
                sv = np.ones(dim)
                for q, _ in t.factors:
                    sv = sv * zs[q]
                self._diag += t.coefficient * sv
            else:
                xms.append(xm)
                zms.append(zm)
                coefs.append(t.coefficient * 1j ** ny)
        self._xm = np.asarray(xms, dtype=np.int64)
        self._zm = np.asarray(zms, dtype=np.int64)
        self._coef = np.asarray(coefs, dtype=np.complex128)

    @property
    def diagonal_part(self) -> np.ndarray:
        return self._diag

    def apply(self, amps: np.ndarray) -> np.ndarray:
        amps = np.ascontiguousarray(amps, dtype=np.complex128)
        out = self._diag * amps
        if len(self._xm):
            out += _backend.kernels.apply_paulis(amps, self._xm, self._zm, self._coef)
        return out

    def expectation(self, state: Statevector) -> float:
        return float(np.vdot(state.amplitudes, self.apply(state.amplitudes)).real)

    def dense(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        eye = np.eye(dim, dtype=np.complex128)
        return np.stack([self.apply(eye[:, j]) for j in range(dim)], axis=1)


def reduced_entropy(state: Statevector, cut: int) -> float:
    """Von Neumann entropy (natural log) of qubits ``[0, cut)``."""
    n = state.n_qubits
    if not 1 <= cut <= n - 1:
        raise ShapeError(f"cut={cut} outside [1, {n - 1}]")
    mat = state.amplitudes.reshape(1 << cut, 1 << (n - cut))
    sv = np.linalg.svd(mat, compute_uv=False)
    p = np.clip(sv ** 2, 0.0, None)
    p = p[p > 1e-12]
    return float(-(p * np.log(p)).sum())


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def sample_indices(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts per basis index."""
    if shots < 1:
        raise ArgumentError("shots must be >= 1")
    p = np.clip(probs, 0.0, None)
    return rng.multinomial(shots, p / p.sum())


def sample_bitstrings(state: Statevector, shots: int, seed: int) -> dict[str, int]:
    """Counts table ``{bitstring: count}``; qubit 0 is the leftmost character."""
    counts = sample_indices(state.probabilities(), shots, np.random.default_rng(seed))
    nz = np.flatnonzero(counts)
    return {bitstring(int(i), state.n_qubits): int(counts[i]) for i in nz}
