"""Variational ground-state search with Adam and restarts.

Gradients come from a reverse (adjoint) sweep through the circuit, so one
gradient costs about three circuit applications regardless of the number of
parameters.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import _backend
from .ansatz import AnsatzSpec, build_ansatz
from .errors import ArgumentError, OptimizationError, ShapeError
from .observables import order_param_sq
from .qsim import Circuit, Statevector, _check_inputs, _stage_data, apply_circuit, new_state
from .tfim import Hamiltonian

log = logging.getLogger(__name__)

HISTORY_EVERY = 100


@dataclass(frozen=True)
class OptimizerConfig:
    steps: int = 10000
    lr0: float = 0.02
    decay: float = 0.6
    decay_steps: int = 2000
    restarts: int = 64
    init_sigma: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.steps < 0 or self.restarts < 1 or self.decay_steps < 1:
            raise ArgumentError("steps >= 0, restarts >= 1 and decay_steps >= 1 required")
        if not (self.lr0 > 0 and 0 < self.decay <= 1 and self.init_sigma >= 0):
            raise ArgumentError("lr0 > 0, 0 < decay <= 1 and init_sigma >= 0 required")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1 and self.adam_eps > 0):
            raise ArgumentError("invalid Adam moment parameters")

    def learning_rate(self, i) -> float:
        return self.lr0 * self.decay ** (np.asarray(i) / self.decay_steps)

    def to_dict(self) -> dict:
        return asdict(self)


FULL = OptimizerConfig()
DESK = OptimizerConfig(steps=2000, restarts=8)
PRESETS = {"full": FULL, "desk": DESK}


def energy(circuit: Circuit, params, ham: Hamiltonian, input_state: Optional[Statevector] = None) -> float:
    if input_state is None:
        input_state = new_state(circuit.n_qubits)
    if ham.n_qubits != circuit.n_qubits:
        raise ShapeError("Hamiltonian and circuit sizes differ")
    return ham.expectation(apply_circuit(input_state, circuit, params))


def energy_and_gradient(circuit: Circuit, params, ham: Hamiltonian,
                        input_state: Optional[Statevector] = None, *, kernels=None):
    """``(E, dE/dtheta)`` with ``dE/dtheta_j = 2 Re <d_j phi|H|phi>``."""
    if input_state is None:
        input_state = new_state(circuit.n_qubits)
    if ham.n_qubits != circuit.n_qubits:
        raise ShapeError("Hamiltonian and circuit sizes differ")
    params = _check_inputs(input_state, circuit, params)
    k = kernels or _backend.kernels
    stage = _stage_data(circuit, params, k)
    final = k.run(input_state.amplitudes, *stage)
    hpsi = ham.apply(final)
    e = float(np.vdot(final, hpsi).real)
    lay = circuit.layout
    if circuit.n_params == 0:
        return e, np.zeros(0)
    grad = k.adjoint_gradient(final, hpsi, lay.par_stage, lay.par_xm, lay.par_zm, lay.par_coef,
                              lay.par_slot, circuit.n_params, *stage)
    return e, np.asarray(grad)


def energy_gradient(circuit: Circuit, params, ham: Hamiltonian,
                    input_state: Optional[Statevector] = None) -> np.ndarray:
    return energy_and_gradient(circuit, params, ham, input_state)[1]


@dataclass
class VqeResult:
    params: np.ndarray
    energy: float
    history: list = field(default_factory=list)
    seed: int = 0
    restart: int = 0


def initial_params(n_params: int, sigma: float, seed: int, restart: int = 0) -> np.ndarray:
    return np.random.default_rng((seed, restart)).normal(0.0, sigma, n_params)


def adam_run(spec: AnsatzSpec, ham: Hamiltonian, cfg: OptimizerConfig = DESK, seed: int = 0,
             restart: int = 0, params0=None) -> VqeResult:
    """Adam descent on ``E(theta)`` with ``lr_i = lr0 * decay**(i / decay_steps)``.

    ``history`` holds ``(step, energy)`` every 100 steps and at the end.
    """
    circuit = build_ansatz(spec)
    theta = (initial_params(circuit.n_params, cfg.init_sigma, seed, restart) if params0 is None
             else np.array(params0, dtype=np.float64))
    psi0 = new_state(spec.n_qubits)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    history = []
    for i in range(cfg.steps):
        e, g = energy_and_gradient(circuit, theta, ham, psi0)
        if not (np.isfinite(e) and np.all(np.isfinite(g))):
            raise OptimizationError(f"non-finite loss at step {i}")
        if i % HISTORY_EVERY == 0:
            history.append((i, e))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** (i + 1))
        vhat = v / (1 - b2 ** (i + 1))
        theta = theta - cfg.learning_rate(i) * mhat / (np.sqrt(vhat) + cfg.adam_eps)
    e = energy(circuit, theta, ham, psi0)
    if not np.isfinite(e):
        raise OptimizationError("non-finite final energy")
    history.append((cfg.steps, e))
    return VqeResult(theta, e, history, seed, restart)


def _restart_job(args):
    spec, ham, cfg, seed, r = args
    try:
        return adam_run(spec, ham, cfg, seed, r)
    except OptimizationError as exc:
        return exc


def multi_restart(spec: AnsatzSpec, ham: Hamiltonian, cfg: OptimizerConfig = DESK, seed: int = 0,
                  workers: int = 1, return_all: bool = False):
    """Best of ``cfg.restarts`` independent :func:`adam_run` calls.

    Restart ``r`` draws its initial parameters from ``(seed, r)``.  Ties keep
    the lowest restart index.
    """
    jobs = [(spec, ham, cfg, seed, r) for r in range(cfg.restarts)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs), os.cpu_count() or 1)) as pool:
            runs = list(pool.map(_restart_job, jobs))
    else:
        runs = [_restart_job(j) for j in jobs]
    ok = [r for r in runs if isinstance(r, VqeResult)]
    if not ok:
        raise OptimizationError(f"all {len(runs)} restarts failed: {runs[0]}")
    best = min(ok, key=lambda r: r.energy)
    return (best, runs) if return_all else best


@dataclass(frozen=True)
class ConvergedPoint:
    n: int
    depth: int
    family: str
    msq: float
    energy: float
    restart: int


def converged_point(spec: AnsatzSpec, ham: Hamiltonian, cfg: OptimizerConfig = DESK, seed: int = 0,
                    convention: str = "moment", workers: int = 1) -> ConvergedPoint:
    best = multi_restart(spec, ham, cfg, seed, workers)
    state = apply_circuit(new_state(spec.n_qubits), build_ansatz(spec), best.params)
    return ConvergedPoint(spec.n_qubits, spec.depth, spec.family, order_param_sq(state, convention),
                          best.energy, best.restart)


def preset(name: str, **overrides) -> OptimizerConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ArgumentError(f"unknown optimizer preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return replace(base, **overrides)
