"""Variational imaginary-time evolution by McLachlan's principle.

The circuit parameters follow ``sum_j G_ij theta_j' = -C_i`` with

    G = Re(J^dag J),   C = Re(J^dag H |phi>),   J = d|phi>/d theta,

which is integrated with an adaptive Dormand-Prince scheme.  No global-phase
correction is added to ``G`` or ``C``.  ``G`` is regularised by ``eps * I``
before the solve because it is routinely close to singular.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import __version__
from .ansatz import AnsatzSpec, build_ansatz, perturbed_init
from .errors import IntegrationError, NumericError, ShapeError
from .observables import ObservableRecord, record
from .odeint import dopri5
from .qsim import Circuit, Statevector, apply_circuit, jacobian_rows, new_state, z_expectations
from .tfim import Hamiltonian

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-7
FALLBACK_NORM = 1e8


@dataclass
class McLachlanSystem:
    G_real: np.ndarray
    C_real: np.ndarray
    regularization_eps: float = DEFAULT_EPS
    state: Optional[Statevector] = None


def assemble_gc(circuit: Circuit, params, ham: Hamiltonian, input_state: Optional[Statevector] = None,
                eps: float = DEFAULT_EPS) -> McLachlanSystem:
    if input_state is None:
        input_state = new_state(circuit.n_qubits)
    if ham.n_qubits != circuit.n_qubits:
        raise ShapeError("Hamiltonian and circuit sizes differ")
    phi, jac = jacobian_rows(circuit, params, input_state)
    hphi = ham.apply(phi.amplitudes)
    # Re(a^* b) summed == dot of the interleaved (re, im) real views
    jr = jac.view(np.float64)
    G = jr @ jr.T
    C = jr @ hphi.view(np.float64)
    return McLachlanSystem(G, C, eps, phi)


def _solve(system: McLachlanSystem) -> tuple[np.ndarray, bool]:
    G, C, eps = system.G_real, system.C_real, system.regularization_eps
    if eps <= 0:
        raise NumericError("regularization_eps must be positive")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(C))):
        raise NumericError("non-finite entries in the McLachlan system")
    if C.size == 0:
        return np.zeros(0), False
    M = G + eps * np.eye(G.shape[0])
    try:
        x = sla.cho_solve(sla.cho_factor(M, lower=True, check_finite=False), -C, check_finite=False)
        if np.all(np.isfinite(x)) and np.linalg.norm(x) <= FALLBACK_NORM:
            return x, False
    except np.linalg.LinAlgError:
        pass
    x = sla.lstsq(M, -C, check_finite=False)[0]
    return x, True


def solve_rhs(system: McLachlanSystem) -> np.ndarray:
    """``theta' = -(G + eps I)^-1 C``, via Cholesky with a least-squares fallback."""
    return _solve(system)[0]


def euler_step(circuit: Circuit, params, ham: Hamiltonian, step: float,
               input_state: Optional[Statevector] = None, eps: float = DEFAULT_EPS) -> np.ndarray:
    """One explicit-Euler update; kept as a cross-check for :func:`evolve`."""
    if step <= 0:
        raise ValueError("step must be positive")
    params = np.asarray(params, dtype=np.float64)
    return params + step * solve_rhs(assemble_gc(circuit, params, ham, input_state, eps))


@dataclass
class Trajectory:
    taus: np.ndarray
    thetas: np.ndarray
    records: list
    z: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> np.ndarray:
        return np.array([r.m for r in self.records])

    @property
    def msq(self) -> np.ndarray:
        return np.array([r.msq for r in self.records])

    @property
    def energy(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def entropy_half(self) -> np.ndarray:
        return np.array([r.entropy_half for r in self.records])


def default_grid(tau_max: float, dtau: float = 0.1) -> np.ndarray:
    """Uniform grid on ``[0, tau_max]`` with both endpoints included."""
    n = int(round(tau_max / dtau))
    if n < 1 or abs(n * dtau - tau_max) > 1e-9 * max(1.0, tau_max):
        raise ValueError(f"tau_max={tau_max} is not a multiple of dtau={dtau}")
    return np.round(np.linspace(0.0, tau_max, n + 1), 12)


def observe(circuit: Circuit, theta, ham: Hamiltonian, tau: float, convention: str = "expectation_sq"):
    state = apply_circuit(new_state(circuit.n_qubits), circuit, theta)
    return record(state, tau, ham.expectation(state), convention), z_expectations(state)


def evolve(spec: AnsatzSpec, ham: Hamiltonian, theta0=None, tau_max: float = 10.0,
           rtol: float = 1e-4, atol: float = 1e-6, *, tau_grid=None, output_dtau: float = 0.1,
           eps: float = DEFAULT_EPS, seed: int = 0, theta_sigma: float = 0.002,
           convention: str = "expectation_sq") -> Trajectory:
    """Integrate the parameter dynamics from ``theta0`` up to ``tau_max``.

    When ``theta0`` is None it is drawn with ``perturbed_init(P, theta_sigma, seed)``.
    Observables are sampled on ``tau_grid`` (default: spacing ``output_dtau``
    from 0 to ``tau_max`` inclusive) via the integrator's dense output.
    """
    circuit = build_ansatz(spec)
    if theta0 is None:
        theta0 = perturbed_init(circuit.n_params, theta_sigma, seed)
    theta0 = np.asarray(theta0, dtype=np.float64)
    if theta0.shape != (circuit.n_params,):
        raise ShapeError(f"theta0 has shape {theta0.shape}, ansatz needs ({circuit.n_params},)")
    if tau_grid is None:
        tau_grid = default_grid(tau_max, output_dtau)
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    if tau_grid[0] != 0 or np.any(np.diff(tau_grid) <= 0):
        raise ValueError("tau grid must start at 0 and be strictly increasing")
    tau_max = float(tau_grid[-1])
    psi0 = new_state(spec.n_qubits)
    stats = {"fallback_solves": 0, "rhs_evals": 0}

    def rhs(_t, theta):
        x, fell_back = _solve(assemble_gc(circuit, theta, ham, psi0, eps))
        stats["rhs_evals"] += 1
        stats["fallback_solves"] += int(fell_back)
        return x

    taus, thetas, recs, zs = [], [], [], []

    def on_output(t, theta):
        rec, z = observe(circuit, theta, ham, t, convention)
        taus.append(t)
        thetas.append(theta.copy())
        recs.append(rec)
        zs.append(z)

    meta = {
        "tool": f"critlab {__version__}",
        "ansatz": spec.to_dict(),
        "n": spec.n_qubits,
        "depth": spec.depth,
        "h": ham.field_h,
        "seed": seed,
        "theta_sigma": theta_sigma,
        "rtol": rtol,
        "atol": atol,
        "eps": eps,
        "convention": convention,
    }

    def build(ok: bool, res=None, message: str = "") -> Trajectory:
        meta.update(stats)
        if res is not None:
            meta.update(accepted_steps=res.n_accepted, rejected_steps=res.n_rejected)
        meta.update(complete=ok, message=message)
        n_t = len(taus)
        return Trajectory(np.asarray(taus), np.asarray(thetas).reshape(n_t, circuit.n_params), recs,
                          np.asarray(zs).reshape(n_t, spec.n_qubits), meta)

    try:
        res = dopri5(rhs, (0.0, tau_max), theta0, tau_grid, rtol=rtol, atol=atol,
                     on_output=on_output)
    except IntegrationError as exc:
        raise IntegrationError(str(exc), partial=build(False, exc.partial, str(exc))) from exc
    log.debug("evolve N=%d D=%d: %d steps (%d rejected), %d fallbacks", spec.n_qubits, spec.depth,
              res.n_accepted, res.n_rejected, stats["fallback_solves"])
    return build(True, res)


def _evolve_job(job: dict) -> Trajectory:
    return evolve(**job)


def evolve_many(jobs: list[dict], workers: int = 1) -> list[Trajectory]:
    """Run independent :func:`evolve` calls, preserving input order."""
    if workers <= 1 or len(jobs) <= 1:
        return [_evolve_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs), os.cpu_count() or 1)) as pool:
        return list(pool.map(_evolve_job, jobs))


def average_trajectories(trajs: list[Trajectory]) -> Trajectory:
    """Seed average of observables over trajectories sharing one tau grid."""
    base = trajs[0]
    for t in trajs[1:]:
        if not np.array_equal(t.taus, base.taus):
            raise ShapeError("trajectories use different tau grids")
    recs = []
    for i, tau in enumerate(base.taus):
        vals = np.array([[r.m, r.msq, r.entropy_half, r.energy] for r in (t.records[i] for t in trajs)])
        m, msq, ent, en = vals.mean(axis=0)
        recs.append(ObservableRecord(float(tau), m, msq, ent, en))
    meta = dict(base.meta, seeds=[t.meta.get("seed") for t in trajs])
    return Trajectory(base.taus, base.thetas, recs, np.mean([t.z for t in trajs], axis=0), meta)
