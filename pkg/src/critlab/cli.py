"""Command-line front end.

Usage::

    critlab <command> --config run.toml --out results/ [--seed S] [--workers W] [--plot-data]

Commands: ``dynamics``, ``exact``, ``vqe``, ``correlator``, ``collapse``,
``mitigate`` and ``sweep``.  Every output file ``F`` gets a sidecar
``F.meta.json`` with the tool version, the full resolved configuration, the
seed and hashes of the input files.  Nothing time-dependent is written, so
identical configurations reproduce identical files.

Exit codes: 0 success, 2 configuration error, 3 numeric or integration
failure, 4 capacity error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .ansatz import FAMILIES, AnsatzSpec, build_ansatz
from .collapse import CORRELATOR, FIG_DEPTH, FIG_DEPTH_SQ, FIG_TIME, SHORT_TIME_TAU_MIN, ScalingDataset, grid_search, rescale
from .errors import ArgumentError, CritlabError, IntegrationError
from .observables import CONVENTIONS, correlator_a, record
from .tfim import build_tfim, exact_ite
from .qsim import new_state
from .varqite import Trajectory, average_trajectories, default_grid, evolve

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("critlab")

COMMANDS = ("dynamics", "exact", "vqe", "correlator", "collapse", "mitigate", "sweep")
TRAJ_COLUMNS = ("tau", "m", "msq", "entropy_half", "energy", "n", "depth", "seed", "family")
VQE_COLUMNS = ("n", "depth", "msq", "energy", "family")
CORR_COLUMNS = ("tau", "A", "n", "n_configs", "seed")
MIT_COLUMNS = ("tau", "raw", "mit", "exact", "a", "b", "residual", "n", "depth")
# reference exponents for --plot-data of single runs
THEORY = {"z": 1.0, "beta_nu": 0.125, "theta": 0.373, "alpha": 1.19}


class ConfigError(ArgumentError):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

DEFAULTS = {
    "model": {"n": 6, "h": 1.0},
    "ansatz": {"family": "ladder", "depth": 4},
    "dynamics": {"tau_max": 10.0, "rtol": 1e-4, "atol": 1e-6, "output_dtau": 0.1, "init_sigma": 0.002,
                 "seed": 0, "n_seeds": 1, "convention": "expectation_sq", "regularization_eps": 1e-7},
    "vqe": {"preset": "desk", "steps": None, "lr0": None, "decay": None, "decay_steps": None,
            "restarts": None, "init_sigma": None, "adam_beta1": None, "adam_beta2": None, "adam_eps": None,
            "convention": "moment", "seed": 0},
    "correlator": {"n_configs": 8, "keep_members": False},
    "collapse": {"kind": "time", "inputs": [], "roles": None, "ranges": None, "fixed": None,
                 "resolution": 101, "threshold_delta": 0.05, "tau_min": None, "tau_max": None,
                 "fractions": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7], "depth_min": None, "depth_max": None,
                 "observable": None},
    "noise": {"readout_eps": 7e-2, "readout_eta": 7e-2, "depol_1q": 0.14e-2, "depol_2q": 1.6e-2,
              "shots": 8192, "trajectories": 1024, "calibrate": False, "calibration_shots": 100000},
    "cdr": {"early_groups": [[5, 0.6], [5, 0.7], [5, 0.8], [5, 0.9]],
            "late_groups": [[5, 0.8], [5, 0.9], [5, 0.95]], "switch_tau": 1.0, "seed": 0},
    "mitigate": {"params_file": None, "taus": None},
    "sweep": {"command": "dynamics", "n": [6], "depth": [4], "depth_rule": None},
}

# default search boxes per collapse kind: (axes, free ranges, fixed)
COLLAPSE_KINDS = {
    "time": (FIG_TIME, {"beta_nu": [0.0, 0.3]}, {"z": 1.0}),
    "depth": (FIG_DEPTH, {"alpha": [0.8, 1.6], "beta_nu": [0.0, 0.3]}, {}),
    "correlator": (CORRELATOR, {"theta": [0.0, 1.0]}, {"z": 1.0}),
    "vqe": (FIG_DEPTH_SQ, {"alpha": [0.8, 1.8]}, {"beta_nu": 0.125}),
}


def load_config(path: Optional[str]) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section, values in user.items():
        if section not in cfg:
            raise ConfigError(f"{path}: unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: [{section}] must be a table")
        for k, v in values.items():
            if k not in cfg[section]:
                raise ConfigError(f"{path}: unknown key {section}.{k}")
            cfg[section][k] = v
    return cfg


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _depth_rule(rule: Optional[str]):
    rules = {"half_plus_one": lambda n: n // 2 + 1, "half_plus_two": lambda n: n // 2 + 2,
             "half": lambda n: n // 2}
    if rule is None:
        return None
    if rule not in rules:
        raise ConfigError(f"unknown depth_rule {rule!r}; expected one of {sorted(rules)}")
    return rules[rule]


def _check_common(cfg: dict) -> None:
    if cfg["ansatz"]["family"] not in FAMILIES:
        raise ConfigError(f"ansatz.family must be one of {FAMILIES}")
    if cfg["dynamics"]["convention"] not in CONVENTIONS or cfg["vqe"]["convention"] not in CONVENTIONS:
        raise ConfigError(f"convention must be one of {CONVENTIONS}")
    d = cfg["dynamics"]
    if not (d["tau_max"] > 0 and d["output_dtau"] > 0 and d["rtol"] > 0 and d["atol"] > 0):
        raise ConfigError("dynamics.tau_max, output_dtau, rtol and atol must be positive")
    if int(d["n_seeds"]) < 1:
        raise ConfigError("dynamics.n_seeds must be >= 1")


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Context:
    def __init__(self, cfg: dict, out: Path, seed: Optional[int], workers: int, plot_data: bool,
                 config_path: Optional[str]):
        self.cfg = cfg
        self.out = out
        self.workers = workers
        self.plot_data = plot_data
        self.config_path = config_path
        if seed is not None:
            cfg["dynamics"]["seed"] = seed
            cfg["vqe"]["seed"] = seed
            cfg["cdr"]["seed"] = seed
        self.written: list[str] = []

    def meta(self, extra: Optional[dict] = None, inputs=()) -> dict:
        m = {"tool": f"critlab {__version__}", "config": self.cfg,
             "magnetization": "per-site mean of <Z_i>",
             "inputs": {str(p): file_hash(p) for p in inputs}}
        if extra:
            m.update(extra)
        return m

    def emit_csv(self, name: str, columns, rows, meta: dict) -> Path:
        path = self.out / name
        write_csv(path, columns, rows)
        write_json(path.with_name(path.name + ".meta.json"), meta)
        self.written.append(path.name)
        return path

    def emit_json(self, name: str, obj, meta: dict) -> Path:
        path = self.out / name
        write_json(path, obj)
        write_json(path.with_name(path.name + ".meta.json"), meta)
        self.written.append(path.name)
        return path


def _traj_rows(t: Trajectory, n, depth, seed, family):
    return [(r.tau, r.m, r.msq, r.entropy_half, r.energy, n, depth, seed, family) for r in t.records]


def _plot_time(ctx: Context, name: str, n: int, taus, msq):
    z, bn = THEORY["z"], THEORY["beta_nu"]
    rows = [(t / n ** z, v * n ** (2 * bn), n) for t, v in zip(taus, msq)]
    ctx.emit_csv(name, ("x_tau_scaled", "y_msq_scaled", "n"), rows,
                 ctx.meta({"exponents": {"z": z, "beta_nu": bn}, "x": "tau N^-z", "y": "msq N^(2 beta/nu)"}))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _dynamics_point(ctx: Context, n: int, depth: int) -> None:
    cfg = ctx.cfg
    d = cfg["dynamics"]
    fam = cfg["ansatz"]["family"]
    h = float(cfg["model"]["h"])
    seed = int(d["seed"])
    spec = AnsatzSpec(fam, n, depth)
    ham = build_tfim(n, h)
    grid = default_grid(float(d["tau_max"]), float(d["output_dtau"]))
    seeds = [seed + k for k in range(int(d["n_seeds"]))]
    trajs = []
    base = f"dynamics_n{n}_d{depth}_s{seed}"
    for s in seeds:
        try:
            trajs.append(evolve(spec, ham, None, rtol=float(d["rtol"]), atol=float(d["atol"]), tau_grid=grid,
                                eps=float(d["regularization_eps"]), seed=s, theta_sigma=float(d["init_sigma"]),
                                convention=d["convention"]))
        except IntegrationError as exc:
            part = exc.partial
            ctx.emit_csv(base + ".csv", TRAJ_COLUMNS, _traj_rows(part, n, depth, s, fam),
                         ctx.meta({"partial": True, "error": str(exc), "trajectory": part.meta}))
            raise
    traj = trajs[0] if len(trajs) == 1 else average_trajectories(trajs)
    meta = ctx.meta({"partial": False, "seeds": seeds, "trajectory": [t.meta for t in trajs]})
    ctx.emit_csv(base + ".csv", TRAJ_COLUMNS, _traj_rows(traj, n, depth, seed, fam), meta)
    params_rows = [(tau, *theta) for tau, theta in zip(trajs[0].taus, trajs[0].thetas)]
    ctx.emit_csv(base + ".params.csv", ("tau",) + tuple(f"theta_{k}" for k in range(spec.n_params)),
                 params_rows, ctx.meta({"seed": seed, "ansatz": spec.to_dict(), "h": h}))
    if ctx.plot_data:
        _plot_time(ctx, base + ".plot.csv", n, traj.taus, traj.msq)


def cmd_dynamics(ctx: Context) -> None:
    cfg = ctx.cfg
    for n in _as_list(cfg["model"]["n"]):
        for depth in _as_list(cfg["ansatz"]["depth"]):
            _dynamics_point(ctx, int(n), int(depth))


def _exact_point(ctx: Context, n: int) -> None:
    cfg = ctx.cfg
    d = cfg["dynamics"]
    ham = build_tfim(n, float(cfg["model"]["h"]))
    grid = default_grid(float(d["tau_max"]), float(d["output_dtau"]))
    ex = exact_ite(ham, new_state(n), grid)
    rows = []
    for tau, st in zip(grid, ex.states):
        r = record(st, tau, ham.expectation(st), d["convention"])
        rows.append((r.tau, r.m, r.msq, r.entropy_half, r.energy, n, -1, int(d["seed"]), "exact"))
    name = f"exact_n{n}.csv"
    ctx.emit_csv(name, TRAJ_COLUMNS, rows, ctx.meta({"depth_sentinel": -1}))
    if ctx.plot_data:
        _plot_time(ctx, f"exact_n{n}.plot.csv", n, grid, [r[2] for r in rows])


def cmd_exact(ctx: Context) -> None:
    for n in _as_list(ctx.cfg["model"]["n"]):
        _exact_point(ctx, int(n))


def _optimizer_config(cfg: dict):
    from .vqe import preset

    v = cfg["vqe"]
    overrides = {k: v[k] for k in ("steps", "lr0", "decay", "decay_steps", "restarts", "init_sigma",
                                   "adam_beta1", "adam_beta2", "adam_eps") if v[k] is not None}
    return preset(v["preset"], **overrides)


def cmd_vqe(ctx: Context) -> None:
    from .vqe import converged_point

    cfg = ctx.cfg
    opt = _optimizer_config(cfg)
    fam = cfg["ansatz"]["family"]
    h = float(cfg["model"]["h"])
    seed = int(cfg["vqe"]["seed"])
    rows = []
    for n in _as_list(cfg["model"]["n"]):
        for depth in _as_list(cfg["ansatz"]["depth"]):
            pt = converged_point(AnsatzSpec(fam, int(n), int(depth)), build_tfim(int(n), h), opt, seed,
                                 cfg["vqe"]["convention"], ctx.workers)
            rows.append((pt.n, pt.depth, pt.msq, pt.energy, fam))
    meta = ctx.meta({"optimizer": opt.to_dict(), "restarts_used": opt.restarts, "steps_used": opt.steps,
                     "convention": cfg["vqe"]["convention"]})
    ctx.emit_csv(f"vqe_{fam}.csv", VQE_COLUMNS, rows, meta)
    if ctx.plot_data:
        a, bn = THEORY["alpha"], THEORY["beta_nu"]
        ctx.emit_csv(f"vqe_{fam}.plot.csv", ("x_depth_scaled", "y_msq_scaled", "n"),
                     [(d * n ** -a, m * n ** (2 * bn), n) for n, d, m, _, _ in rows],
                     ctx.meta({"exponents": {"alpha": a, "beta_nu": bn}}))


def cmd_correlator(ctx: Context) -> None:
    cfg = ctx.cfg
    d = cfg["dynamics"]
    fam = cfg["ansatz"]["family"]
    h = float(cfg["model"]["h"])
    seed = int(d["seed"])
    nc = int(cfg["correlator"]["n_configs"])
    grid = default_grid(float(d["tau_max"]), float(d["output_dtau"]))
    for n in _as_list(cfg["model"]["n"]):
        for depth in _as_list(cfg["ansatz"]["depth"]):
            n, depth = int(n), int(depth)
            recs, members, trajs = correlator_a(AnsatzSpec(fam, n, depth), build_tfim(n, h), grid, nc, seed,
                                                theta_sigma=float(d["init_sigma"]), rtol=float(d["rtol"]),
                                                atol=float(d["atol"]), workers=ctx.workers,
                                                return_members=True)
            base = f"correlator_n{n}_d{depth}_s{seed}"
            meta = ctx.meta({"masks": [t.meta["ansatz"]["flip_mask"] for t in trajs],
                             "normalisation": "per-site average over qubits and configurations"})
            ctx.emit_csv(base + ".csv", CORR_COLUMNS, [(r.tau, r.A, r.n, r.n_configs, seed) for r in recs], meta)
            if cfg["correlator"]["keep_members"]:
                ctx.emit_csv(base + ".members.csv", ("tau",) + tuple(f"config_{k}" for k in range(nc)),
                             [(t, *members[:, i]) for i, t in enumerate(grid)], meta)
            if ctx.plot_data:
                th = THEORY["theta"]
                ctx.emit_csv(base + ".plot.csv", ("x_tau_scaled", "y_A_scaled", "n"),
                             [(r.tau / n, r.A * n ** (1 - th), n) for r in recs],
                             ctx.meta({"exponents": {"z": 1.0, "theta": th}}))


def read_table(path, required) -> list[dict]:
    """Rows of a CSV as dicts of floats/strings; schema problems raise ConfigError with the line."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}:1: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise ConfigError(f"{path}:1: missing column(s) {', '.join(missing)}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(header):
                raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(raw)}")
            row = {}
            for c, v in zip(header, raw):
                if c in ("family",):
                    row[c] = v
                    continue
                try:
                    row[c] = float(v)
                except ValueError:
                    raise ConfigError(f"{path}:{lineno}: column {c!r} is not a number: {v!r}") from None
            rows.append(row)
    return rows


def build_dataset(kind: str, inputs, opts: dict) -> ScalingDataset:
    axes = COLLAPSE_KINDS[kind][0]
    rows = []
    if kind == "time":
        obs = opts["observable"] or "msq"
        tau_min = SHORT_TIME_TAU_MIN if opts["tau_min"] is None else opts["tau_min"]
        for p in inputs:
            for r in read_table(p, TRAJ_COLUMNS[:-1]):
                if r["tau"] >= tau_min - 1e-12 and (opts["tau_max"] is None or r["tau"] <= opts["tau_max"] + 1e-12):
                    rows.append((0, r["tau"], r[obs], int(r["n"])))
    elif kind == "depth":
        obs = opts["observable"] or "m"
        axes = FIG_DEPTH if obs == "m" else FIG_DEPTH_SQ
        dmin = opts["depth_min"] if opts["depth_min"] is not None else 2
        for p in inputs:
            for r in read_table(p, TRAJ_COLUMNS[:-1]):
                n, d = int(r["n"]), int(r["depth"])
                dmax = opts["depth_max"] if opts["depth_max"] is not None else n // 2 + 2
                if not dmin <= d <= dmax:
                    continue
                for f in opts["fractions"]:
                    if abs(r["tau"] / n - f) <= 1e-9:
                        rows.append((round(float(f), 10), float(d), r[obs], n))
    elif kind == "correlator":
        for p in inputs:
            for r in read_table(p, CORR_COLUMNS):
                if r["tau"] >= (opts["tau_min"] or 0.0) - 1e-12:
                    rows.append((0, r["tau"], r["A"], int(r["n"])))
    elif kind == "vqe":
        dmin = opts["depth_min"] if opts["depth_min"] is not None else 1
        for p in inputs:
            for r in read_table(p, VQE_COLUMNS[:-1]):
                if r["depth"] >= dmin and (opts["depth_max"] is None or r["depth"] <= opts["depth_max"]):
                    rows.append((0, r["depth"], r["msq"], int(r["n"])))
    else:
        raise ConfigError(f"unknown collapse kind {kind!r}; expected one of {sorted(COLLAPSE_KINDS)}")
    if not rows:
        raise ConfigError("collapse inputs contain no usable rows")
    return ScalingDataset.from_records(rows, axes)


def cmd_collapse(ctx: Context) -> None:
    c = ctx.cfg["collapse"]
    kind = c["kind"]
    if kind not in COLLAPSE_KINDS:
        raise ConfigError(f"unknown collapse kind {kind!r}; expected one of {sorted(COLLAPSE_KINDS)}")
    inputs = [str(p) for p in _as_list(c["inputs"])] if c["inputs"] else []
    if not inputs:
        raise ConfigError("collapse.inputs is empty")
    ds = build_dataset(kind, inputs, c)
    _, ranges, fixed = COLLAPSE_KINDS[kind]
    ranges = dict(c["ranges"] or ranges)
    fixed = dict(fixed if c["fixed"] is None else c["fixed"])
    if c["roles"] is not None:
        ranges = {r: ranges[r] for r in c["roles"]}
    res = grid_search(ds, ranges, int(c["resolution"]), float(c["threshold_delta"]), fixed, ctx.workers)
    out = res.to_dict()
    out["kind"] = kind
    out["inputs_hash"] = hashlib.sha256("".join(file_hash(p) for p in inputs).encode()).hexdigest()
    out["degenerate"] = res.r_min == 0.0
    if out["degenerate"]:
        log.warning("collapse cost is zero at the optimum: the inputs do not constrain the exponents")
    meta = ctx.meta(inputs=inputs)
    ctx.emit_json(f"collapse_{kind}.json", out, meta)
    res.write_surface(ctx.out / f"collapse_{kind}.surface.csv")
    write_json(ctx.out / f"collapse_{kind}.surface.csv.meta.json", meta)
    ctx.written.append(f"collapse_{kind}.surface.csv")
    if ctx.plot_data:
        curves = rescale(ds, {**fixed, **res.best_exponents})
        rows = [(cv.group, x, y, cv.n) for cv in curves for x, y in zip(cv.x, cv.y)]
        ctx.emit_csv(f"collapse_{kind}.plot.csv", ("group", "x", "y", "n"), rows,
                     ctx.meta({"exponents": {**fixed, **res.best_exponents}}, inputs))


def _load_params(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"trajectory parameter file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "tau":
            raise ConfigError(f"{path}:1: expected a 'tau,theta_0,...' header")
        data = []
        for lineno, raw in enumerate(reader, start=2):
            try:
                data.append([float(v) for v in raw])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric value") from None
    arr = np.asarray(data)
    return arr[:, 0], arr[:, 1:]


def cmd_mitigate(ctx: Context) -> None:
    from . import noisemit as nm

    cfg = ctx.cfg
    pf = cfg["mitigate"]["params_file"]
    if not pf:
        raise ConfigError("mitigate.params_file is required")
    meta_path = Path(str(pf) + ".meta.json")
    if not meta_path.exists():
        raise ConfigError(f"metadata sidecar not found for {pf}")
    with open(meta_path, encoding="utf-8") as fh:
        spec = AnsatzSpec(**json.load(fh)["ansatz"])
    taus, thetas = _load_params(pf)
    want = cfg["mitigate"]["taus"]
    if want is not None:
        sel = [int(np.argmin(np.abs(taus - t))) for t in want]
        if any(abs(taus[i] - t) > 1e-9 for i, t in zip(sel, want)):
            raise ConfigError("mitigate.taus contains values absent from the parameter file")
        taus, thetas = taus[sel], thetas[sel]
    n = spec.n_qubits
    nz = cfg["noise"]
    model = nm.NoiseModel(np.broadcast_to(nz["readout_eps"], (n,)), np.broadcast_to(nz["readout_eta"], (n,)),
                          float(nz["depol_1q"]), float(nz["depol_2q"]), int(nz["shots"]), int(nz["trajectories"]))
    seed = int(cfg["cdr"]["seed"])
    eps_hat = eta_hat = None
    if nz["calibrate"]:
        eps_hat, eta_hat = nm.readout_calibrate(model, n, int(nz["calibration_shots"]), (seed, 0))
    circuit = build_ansatz(spec)
    c = cfg["cdr"]
    rows, reports = [], []
    for k, (tau, theta) in enumerate(zip(taus, thetas)):
        groups = c["early_groups"] if tau < float(c["switch_tau"]) else c["late_groups"]
        rep = nm.extended_cdr(circuit, theta, model, nm.CdrConfig(tuple(map(tuple, groups)), seed + k),
                              (seed, 1, k), eps_hat, eta_hat)
        rows.append((tau, rep.raw, rep.mitigated, rep.exact, rep.fit.a, rep.fit.b, rep.fit.residual, n, spec.depth))
        reports.append({"tau": float(tau), **rep.to_dict()})
    meta = ctx.meta({"noise": model.to_dict(), "calibrated": bool(nz["calibrate"]),
                     "eps_hat": eps_hat, "eta_hat": eta_hat, "ansatz": spec.to_dict()}, inputs=[pf])
    base = f"mitigate_n{n}_d{spec.depth}"
    ctx.emit_csv(base + ".csv", MIT_COLUMNS, rows, meta)
    ctx.emit_json(base + ".json", {"points": reports}, meta)
    if ctx.plot_data:
        bn = THEORY["beta_nu"]
        ctx.emit_csv(base + ".plot.csv", ("x_tau_scaled", "y_raw_scaled", "y_mit_scaled", "n"),
                     [(r[0] / n, r[1] ** 2 * n ** (2 * bn), r[2] ** 2 * n ** (2 * bn), n) for r in rows],
                     ctx.meta({"exponents": {"z": 1.0, "beta_nu": bn}}))


def _sweep_job(args):
    command, cfg, out, plot_data, n, depth = args
    cfg = copy.deepcopy(cfg)
    cfg["model"]["n"] = n
    cfg["ansatz"]["depth"] = depth
    ctx = Context(cfg, Path(out), None, 1, plot_data, None)
    HANDLERS[command](ctx)
    return ctx.written


def cmd_sweep(ctx: Context) -> None:
    s = ctx.cfg["sweep"]
    command = s["command"]
    if command not in ("dynamics", "exact", "vqe", "correlator"):
        raise ConfigError("sweep.command must be dynamics, exact, vqe or correlator")
    rule = _depth_rule(s["depth_rule"])
    jobs = []
    for n in _as_list(s["n"]):
        depths = [rule(int(n))] if rule else _as_list(s["depth"])
        if command == "exact":
            depths = depths[:1]
        for d in depths:
            jobs.append((command, ctx.cfg, str(ctx.out), ctx.plot_data, int(n), int(d)))
    if ctx.workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=ctx.workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    index = [{"n": j[4], "depth": j[5], "files": r} for j, r in zip(jobs, results)]
    ctx.emit_json("sweep_index.json", {"command": command, "points": index}, ctx.meta())


HANDLERS = {
    "dynamics": cmd_dynamics,
    "exact": cmd_exact,
    "vqe": cmd_vqe,
    "correlator": cmd_correlator,
    "collapse": cmd_collapse,
    "mitigate": cmd_mitigate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critlab", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"critlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HANDLERS[name].__doc__)
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, default=None, help="override every seed in the config")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: $CRITLAB_WORKERS or 1)")
        sp.add_argument("--plot-data", action="store_true", help="also write rescaled-axes CSVs")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _workers(arg: Optional[int]) -> int:
    if arg is not None:
        w = arg
    else:
        env = os.environ.get("CRITLAB_WORKERS")
        try:
            w = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"CRITLAB_WORKERS must be an integer, got {env!r}") from None
    if w < 1:
        raise ConfigError("workers must be >= 1")
    return w


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        _check_common(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, out, args.seed, _workers(args.workers), args.plot_data, args.config)
        HANDLERS[args.command](ctx)
    except CritlabError as exc:
        print(f"critlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError, KeyError) as exc:
        print(f"critlab {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
