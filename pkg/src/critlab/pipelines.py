"""Multi-run workflows shared by the CLI and the acceptance checks.

Each sweep is a list of independent jobs.  Results can be cached on disk as
JSON keyed by the job description plus a fingerprint of the numerical source
files, so a stale cache is never reused after the physics code changes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from . import __version__
from .ansatz import AnsatzSpec
from .collapse import CORRELATOR, FIG_DEPTH, FIG_DEPTH_SQ, FIG_TIME, SHORT_TIME_TAU_MIN, ScalingDataset
from .observables import ObservableRecord, correlator_a
from .tfim import build_tfim
from .varqite import Trajectory, default_grid, evolve_many
from .vqe import OptimizerConfig

log = logging.getLogger(__name__)

_FINGERPRINT_FILES = ("qsim.py", "ansatz.py", "tfim.py", "odeint.py", "varqite.py", "vqe.py",
                      "observables.py", "_pykernels.py", "_ckernels.pyx")
FIG3_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)


def source_fingerprint() -> str:
    h = hashlib.sha256(__version__.encode())
    here = Path(__file__).parent
    for name in _FINGERPRINT_FILES:
        p = here / name
        if p.exists():
            h.update(name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()[:16]


class Cache:
    """Directory of JSON results keyed by a hash of the job description."""

    def __init__(self, root):
        self.root = Path(root)

    def path(self, key: dict) -> Path:
        blob = json.dumps({"key": key, "src": source_fingerprint()}, sort_keys=True)
        return self.root / f"{key.get('kind', 'job')}-{hashlib.sha256(blob.encode()).hexdigest()[:20]}.json"

    def get(self, key: dict, compute: Callable[[], dict]) -> dict:
        p = self.path(key)
        if p.exists():
            with open(p, encoding="utf-8") as fh:
                return json.load(fh)
        value = compute()
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = p.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"key": key, "value": value}, fh)
        os.replace(tmp, p)
        return {"key": key, "value": value}


def trajectory_to_dict(t: Trajectory) -> dict:
    return {
        "taus": t.taus.tolist(),
        "thetas": t.thetas.tolist(),
        "records": [[r.tau, r.m, r.msq, r.entropy_half, r.energy] for r in t.records],
        "z": t.z.tolist(),
        "meta": t.meta,
    }


def trajectory_from_dict(d: dict) -> Trajectory:
    recs = [ObservableRecord(*row) for row in d["records"]]
    return Trajectory(np.asarray(d["taus"]), np.asarray(d["thetas"]), recs, np.asarray(d["z"]), d["meta"])


def dynamics_sweep(points: Iterable[tuple], h: float = 1.0, tau_max: float = 10.0, dtau: float = 0.1,
                   seed: int = 0, theta_sigma: float = 0.002, rtol: float = 1e-4, atol: float = 1e-6,
                   convention: str = "expectation_sq", workers: int = 1,
                   cache: Optional[Cache] = None) -> dict:
    """Trajectories for ``(family, n, depth)`` points from ``|0...0>``, keyed by the point."""
    points = [tuple(p) for p in points]
    grid = default_grid(tau_max, dtau)
    out = {}
    todo = []
    for fam, n, d in points:
        key = dict(kind="dynamics", family=fam, n=n, depth=d, h=h, tau_max=tau_max, dtau=dtau, seed=seed,
                   theta_sigma=theta_sigma, rtol=rtol, atol=atol, convention=convention)
        if cache is not None and cache.path(key).exists():
            out[(fam, n, d)] = trajectory_from_dict(cache.get(key, dict)["value"])
        else:
            todo.append(((fam, n, d), key))
    jobs = [dict(spec=AnsatzSpec(fam, n, d), ham=build_tfim(n, h), seed=seed, theta_sigma=theta_sigma,
                 tau_grid=grid, rtol=rtol, atol=atol, convention=convention) for (fam, n, d), _ in todo]
    # sequential runs are cached one by one so an interrupted sweep keeps its progress
    batches = [jobs] if workers > 1 else [[j] for j in jobs]
    done = []
    for batch in batches:
        done += evolve_many(batch, workers)
        for (p, key), traj in zip(todo[len(done) - len(batch):len(done)], done[-len(batch):]):
            if cache is not None:
                cache.get(key, lambda: trajectory_to_dict(traj))
            out[p] = traj
    return {p: out[p] for p in points}


def _tau_index(taus: np.ndarray, tau: float) -> int:
    k = int(np.argmin(np.abs(taus - tau)))
    if abs(taus[k] - tau) > 1e-9:
        raise ValueError(f"tau={tau} is not on the output grid")
    return k


def fig_time_dataset(trajs: dict, tau_min: float = SHORT_TIME_TAU_MIN, tau_max: Optional[float] = None,
                     observable: str = "msq") -> ScalingDataset:
    """Single-group ``(tau, M^2)`` dataset for the short-time collapse."""
    rows = []
    for (_, n, _), t in sorted(trajs.items(), key=lambda kv: kv[0][1]):
        y = getattr(t, observable)
        for tau, v in zip(t.taus, y):
            if tau >= tau_min - 1e-12 and (tau_max is None or tau <= tau_max + 1e-12):
                rows.append((0, float(tau), float(v), n))
    return ScalingDataset.from_records(rows, FIG_TIME)


def fig_depth_dataset(trajs: dict, fractions=FIG3_FRACTIONS, depth_min: int = 2,
                      depth_max: Callable[[int], int] = lambda n: n // 2 + 2,
                      observable: str = "m") -> ScalingDataset:
    """Groups of fixed ``tau/N``; within a group ``x`` is the depth ``D``."""
    rows = []
    for (_, n, d), t in sorted(trajs.items(), key=lambda kv: (kv[0][1], kv[0][2])):
        if not depth_min <= d <= depth_max(n):
            continue
        y = getattr(t, observable)
        for f in fractions:
            rows.append((round(float(f), 10), float(d), float(y[_tau_index(t.taus, f * n)]), n))
    return ScalingDataset.from_records(rows, FIG_DEPTH if observable == "m" else FIG_DEPTH_SQ)


def correlator_sweep(sizes, depth: Callable[[int], int], n_configs, h: float = 1.0, tau_max: float = 10.0,
                     dtau: float = 0.1, seed: int = 0, theta_sigma: float = 0.002, rtol: float = 1e-4,
                     atol: float = 1e-6, family: str = "ladder", workers: int = 1,
                     cache: Optional[Cache] = None) -> dict:
    """``{n: (taus, A)}``; ``n_configs`` may be an int or a callable of ``n``."""
    grid = default_grid(tau_max, dtau)
    out = {}
    for n in sizes:
        nc = n_configs(n) if callable(n_configs) else int(n_configs)
        key = dict(kind="correlator", family=family, n=n, depth=depth(n), n_configs=nc, h=h, tau_max=tau_max,
                   dtau=dtau, seed=seed, theta_sigma=theta_sigma, rtol=rtol, atol=atol)

        def compute(n=n, nc=nc):
            recs, members, _ = correlator_a(AnsatzSpec(family, n, depth(n)), build_tfim(n, h), grid, nc, seed,
                                            theta_sigma=theta_sigma, rtol=rtol, atol=atol, workers=workers,
                                            return_members=True)
            return {"taus": grid.tolist(), "A": [r.A for r in recs], "members": members.tolist()}

        val = (cache.get(key, compute) if cache is not None else {"value": compute()})["value"]
        out[n] = (np.asarray(val["taus"]), np.asarray(val["A"]))
    return out


def correlator_dataset(corr: dict, tau_min: float = 0.0) -> ScalingDataset:
    rows = []
    for n in sorted(corr):
        taus, a = corr[n]
        rows += [(0, float(t), float(v), n) for t, v in zip(taus, a) if t >= tau_min - 1e-12]
    return ScalingDataset.from_records(rows, CORRELATOR)


def vqe_sweep(points: Iterable[tuple], cfg: OptimizerConfig, h: float = 1.0, seed: int = 0,
              workers: int = 1, cache: Optional[Cache] = None) -> dict:
    """Converged ``{(family, n, depth): {"msq_moment", "msq_expectation_sq", "energy", "restart"}}``."""
    from .ansatz import build_ansatz
    from .observables import order_param_sq
    from .qsim import apply_circuit, new_state
    from .vqe import multi_restart

    out = {}
    for fam, n, d in points:
        key = dict(kind="vqe", family=fam, n=n, depth=d, h=h, seed=seed, cfg=cfg.to_dict())

        def compute(fam=fam, n=n, d=d):
            spec = AnsatzSpec(fam, n, d)
            best = multi_restart(spec, build_tfim(n, h), cfg, seed, workers)
            state = apply_circuit(new_state(n), build_ansatz(spec), best.params)
            return {"msq_moment": order_param_sq(state, "moment"),
                    "msq_expectation_sq": order_param_sq(state, "expectation_sq"),
                    "energy": best.energy, "restart": best.restart}

        out[(fam, n, d)] = (cache.get(key, compute) if cache is not None else {"value": compute()})["value"]
    return out


def vqe_dataset(results: dict, convention: str = "moment") -> ScalingDataset:
    rows = [(0, float(d), float(v[f"msq_{convention}"]), n) for (_, n, d), v in sorted(results.items())]
    return ScalingDataset.from_records(rows, FIG_DEPTH_SQ)


def _module_hash(name: str) -> str:
    return hashlib.sha256((Path(__file__).parent / name).read_bytes()).hexdigest()[:16]


def mitigation_sweep(points: Iterable[tuple], tau_max: float = 3.0, dtau: float = 0.2, h: float = 1.0,
                     seed: int = 0, theta_sigma: float = 0.002, rtol: float = 1e-4, atol: float = 1e-6,
                     noise: Optional[dict] = None, switch_tau: float = 1.0,
                     cache: Optional[Cache] = None) -> dict:
    """Noisy evaluation of dynamics circuits with both mitigation tiers.

    For each ``(family, n, depth)`` the noiseless trajectory is computed on a
    ``dtau`` grid and every circuit ``theta(tau)`` is run through
    :func:`critlab.noisemit.extended_cdr` under ``noise`` (default: device
    rates).  Returns ``{point: {"taus", "raw", "mit", "exact", "a", "b", "residual"}}``.
    """
    from . import noisemit as nm
    from .ansatz import build_ansatz

    points = [tuple(p) for p in points]
    trajs = dynamics_sweep(points, h, tau_max, dtau, seed, theta_sigma, rtol, atol, cache=cache)
    out = {}
    for p in points:
        fam, n, d = p
        model = nm.NoiseModel.device_default(n) if noise is None else nm.NoiseModel(**noise)
        key = dict(kind="mitigation", family=fam, n=n, depth=d, h=h, tau_max=tau_max, dtau=dtau, seed=seed,
                   theta_sigma=theta_sigma, rtol=rtol, atol=atol, noise=model.to_dict(),
                   switch_tau=switch_tau, noisemit=_module_hash("noisemit.py"))

        def compute(traj=trajs[p], spec=AnsatzSpec(fam, n, d), model=model):
            circ = build_ansatz(spec)
            cols = {k: [] for k in ("raw", "mit", "exact", "a", "b", "residual")}
            for k, (tau, theta) in enumerate(zip(traj.taus, traj.thetas)):
                cfg = nm.CdrConfig.for_tau(float(tau), seed + k, switch_tau)
                rep = nm.extended_cdr(circ, theta, model, cfg, (seed, n, k)).to_dict()
                for c in cols:
                    cols[c].append(rep[c])
            return {"taus": traj.taus.tolist(), **cols}

        val = (cache.get(key, compute) if cache is not None else {"value": compute()})["value"]
        out[p] = {k: np.asarray(v) for k, v in val.items()}
    return out


def mitigation_dataset(results: dict, column: str = "mit", tau_min: float = 0.0) -> ScalingDataset:
    """Short-time collapse dataset built from squared mitigated magnetisation."""
    rows = []
    for (_, n, _), r in sorted(results.items(), key=lambda kv: kv[0][1]):
        rows += [(0, float(t), float(v) ** 2, n) for t, v in zip(r["taus"], r[column]) if t >= tau_min - 1e-12]
    return ScalingDataset.from_records(rows, FIG_TIME)
