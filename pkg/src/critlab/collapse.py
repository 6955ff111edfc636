"""Data-collapse engine for finite-size, short-time and finite-depth scaling.

A :class:`ScalingDataset` holds raw points ``(group, x, y, N)`` together with
an :class:`Axes` declaration saying how trial exponents rescale them::

    x = x_raw * N**(-(x_mult * e[x_role] + x_offset))
    y = y_raw * N**(+(y_mult * e[y_role] + y_offset))

The collapse quality of a family of curves is

    R = sum_i sum_N (y_N(x_i) - ybar(x_i))**2

where ``x_i`` runs over the union of all abscissae in a group, ``y_N`` is
linearly interpolated (never extrapolated) and ``ybar`` is the mean of the
curves defined at ``x_i``.  ``R`` is summed over groups.
"""

from __future__ import annotations

import csv
import itertools
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ArgumentError, DegenerateDataError

DEFAULT_RESOLUTION = 101
SATURATION_FRACTION = 0.02
# the earliest times are dominated by the initial-state transient
SHORT_TIME_TAU_MIN = 0.2


@dataclass(frozen=True)
class Axes:
    """Which exponent roles rescale the x and y axes.

    A role of ``None`` means the corresponding offset alone is used.
    """

    x_role: Optional[str] = None
    y_role: Optional[str] = None
    x_mult: float = 1.0
    y_mult: float = 1.0
    x_offset: float = 0.0
    y_offset: float = 0.0

    @property
    def roles(self) -> tuple:
        return tuple(r for r in (self.x_role, self.y_role) if r is not None)

    def exponents(self, values: dict) -> tuple[float, float]:
        missing = [r for r in self.roles if r not in values]
        if missing:
            raise ArgumentError(f"missing exponent role(s): {', '.join(missing)}")
        xe = self.x_offset + (self.x_mult * values[self.x_role] if self.x_role else 0.0)
        ye = self.y_offset + (self.y_mult * values[self.y_role] if self.y_role else 0.0)
        return float(xe), float(ye)


# rescalings used by the analyses in this package
FIG_TIME = Axes("z", "beta_nu", 1.0, 2.0)            # tau N^-z,  M^2 N^(2 beta/nu)
FIG_DEPTH = Axes("alpha", "beta_nu", 1.0, 1.0)       # D N^-alpha, M N^(beta/nu)
FIG_DEPTH_SQ = Axes("alpha", "beta_nu", 1.0, 2.0)    # D N^-alpha, M^2 N^(2 beta/nu)
CORRELATOR = Axes("z", "theta", 1.0, -1.0, 0.0, 1.0)  # tau N^-z,  A N^(1 - theta), z = 1


@dataclass
class ScalingDataset:
    group: list
    x_raw: np.ndarray
    y_raw: np.ndarray
    size_n: np.ndarray
    axes: Axes = field(default_factory=Axes)

    def __post_init__(self):
        self.group = list(self.group)
        self.x_raw = np.asarray(self.x_raw, dtype=np.float64)
        self.y_raw = np.asarray(self.y_raw, dtype=np.float64)
        self.size_n = np.asarray(self.size_n, dtype=np.int64)
        k = len(self.group)
        if not (self.x_raw.shape == self.y_raw.shape == self.size_n.shape == (k,)):
            raise ArgumentError("group, x_raw, y_raw and size_n must have equal length")
        if np.any(self.size_n < 1):
            raise ArgumentError("sizes must be positive")

    @classmethod
    def from_records(cls, records, axes: Axes) -> "ScalingDataset":
        """Build from an iterable of ``(group, x_raw, y_raw, n)`` tuples."""
        rows = list(records)
        if not rows:
            return cls([], [], [], [], axes)
        g, x, y, n = zip(*rows)
        return cls(g, x, y, n, axes)

    def __len__(self):
        return len(self.group)

    def groups(self) -> list:
        return sorted(set(self.group), key=_sort_key)

    def select(self, mask) -> "ScalingDataset":
        mask = np.asarray(mask, dtype=bool)
        return ScalingDataset([g for g, k in zip(self.group, mask) if k], self.x_raw[mask],
                              self.y_raw[mask], self.size_n[mask], self.axes)

    def check_sizes(self):
        for g, curves in self._curves().items():
            if len(curves) < 2:
                raise DegenerateDataError(f"group {g!r} has data for a single size only")

    def _curves(self) -> dict:
        """``{group: [(N, x_sorted, y_sorted), ...]}`` in deterministic order."""
        buckets = defaultdict(list)
        for i, (g, n) in enumerate(zip(self.group, self.size_n)):
            buckets[(g, int(n))].append(i)
        out = defaultdict(list)
        for (g, n) in sorted(buckets, key=lambda k: (_sort_key(k[0]), k[1])):
            idx = np.array(buckets[(g, n)])
            order = np.lexsort((self.y_raw[idx], self.x_raw[idx]))
            idx = idx[order]
            out[g].append((n, self.x_raw[idx], self.y_raw[idx]))
        return dict(out)


def _sort_key(g):
    return (0, float(g), "") if isinstance(g, (int, float, np.number)) else (1, 0.0, str(g))


@dataclass
class Curve:
    group: object
    n: int
    x: np.ndarray
    y: np.ndarray


def rescale(ds: ScalingDataset, exponents: dict) -> list[Curve]:
    """Rescaled curves, one per (group, N), each sorted by x."""
    xe, ye = ds.axes.exponents(exponents)
    out = []
    for g, curves in ds._curves().items():
        for n, x, y in curves:
            out.append(Curve(g, n, x * float(n) ** (-xe), y * float(n) ** ye))
    return out


def _group_cost(curves) -> tuple[float, int]:
    """Cost of one group and the number of abscissae shared by >= 2 curves."""
    xs = np.unique(np.concatenate([c[0] for c in curves]))
    vals = np.empty((len(curves), xs.size))
    inside = np.empty((len(curves), xs.size), dtype=bool)
    for k, (cx, cy) in enumerate(curves):
        inside[k] = (xs >= cx[0]) & (xs <= cx[-1])
        vals[k] = np.interp(xs, cx, cy)
    counts = inside.sum(axis=0)
    vals = np.where(inside, vals, 0.0)
    mean = vals.sum(axis=0) / np.maximum(counts, 1)
    dev = np.where(inside, vals - mean, 0.0)
    return float(np.sum(dev * dev)), int(np.count_nonzero(counts >= 2))


def collapse_cost(curves: list[Curve]) -> float:
    """Summed squared deviation from the pointwise mean curve, over groups.

    Raises :class:`DegenerateDataError` when no two curves overlap anywhere.
    """
    by_group = defaultdict(list)
    for c in curves:
        by_group[_sort_key(c.group)].append((np.asarray(c.x, float), np.asarray(c.y, float)))
    total, shared = 0.0, 0
    for key in sorted(by_group):
        r, s = _group_cost(by_group[key])
        total += r
        shared += s
    if shared == 0:
        raise DegenerateDataError("no two curves overlap in x")
    return total


@dataclass
class CollapseResult:
    best_exponents: dict
    r_min: float
    roles: tuple
    grids: dict
    cost_surface: np.ndarray
    error_intervals: dict
    threshold_delta: float
    fixed: dict = field(default_factory=dict)

    def cost_at(self, exponents: dict) -> float:
        """Surface value at the grid cell nearest to ``exponents``."""
        idx = tuple(int(np.argmin(np.abs(self.grids[r] - exponents[r]))) for r in self.roles)
        return float(self.cost_surface[idx])

    def to_dict(self) -> dict:
        return {
            "roles": list(self.roles),
            "best": dict(self.best_exponents),
            "intervals": {k: list(v) for k, v in self.error_intervals.items()},
            "r_min": self.r_min,
            "threshold_delta": self.threshold_delta,
            "fixed": dict(self.fixed),
            "ranges": {r: [float(g[0]), float(g[-1]), len(g)] for r, g in self.grids.items()},
        }

    def write_surface(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(list(self.roles) + ["R"])
            for idx in itertools.product(*(range(len(self.grids[r])) for r in self.roles)):
                w.writerow([repr(float(self.grids[r][i])) for r, i in zip(self.roles, idx)]
                           + [repr(float(self.cost_surface[idx]))])


class _CostEvaluator:
    """Evaluates R quickly for many exponent pairs; picklable for worker pools."""

    def __init__(self, ds: ScalingDataset):
        self.axes = ds.axes
        self.groups = [[(float(n), x, y) for n, x, y in curves] for curves in ds._curves().values()]

    def __call__(self, values: dict) -> float:
        xe, ye = self.axes.exponents(values)
        total, shared = 0.0, 0
        for curves in self.groups:
            r, s = _group_cost([(x * n ** (-xe), y * n ** ye) for n, x, y in curves])
            total += r
            shared += s
        return total if shared else np.inf

    def rows(self, args):
        roles, fixed, points = args
        return [self(dict(fixed, **dict(zip(roles, p)))) for p in points]


def grid_search(ds: ScalingDataset, ranges: dict, resolution: int = DEFAULT_RESOLUTION,
                threshold_delta: float = 0.05, fixed: Optional[dict] = None,
                workers: int = 1) -> CollapseResult:
    """Exhaustive search over at most two free exponent roles.

    ``ranges`` maps each free role to ``(lo, hi)``; any other role the axes
    need must be given in ``fixed``.  Ties for the minimum go to the lowest
    exponent tuple, with roles ordered alphabetically.
    """
    fixed = dict(fixed or {})
    roles = tuple(sorted(ranges))
    if not 1 <= len(roles) <= 2:
        raise ArgumentError("grid_search supports one or two free roles")
    if resolution < 3:
        raise ArgumentError("resolution must be >= 3")
    if threshold_delta < 0:
        raise ArgumentError("threshold_delta must be non-negative")
    clash = set(roles) & set(fixed)
    if clash:
        raise ArgumentError(f"role(s) both free and fixed: {sorted(clash)}")
    ds.axes.exponents({**fixed, **{r: 0.0 for r in roles}})
    ds.check_sizes()
    grids = {}
    for r in roles:
        lo, hi = map(float, ranges[r])
        if not hi >= lo:
            raise ArgumentError(f"range for {r} must satisfy lo <= hi")
        grids[r] = np.linspace(lo, hi, resolution)
    points = list(itertools.product(*(grids[r] for r in roles)))
    ev = _CostEvaluator(ds)
    if workers > 1:
        chunks = [points[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(ev.rows, [(roles, fixed, c) for c in chunks]))
        flat = np.empty(len(points))
        for i, part in enumerate(parts):
            flat[i::workers] = part
    else:
        flat = np.array(ev.rows((roles, fixed, points)))
    surface = flat.reshape((resolution,) * len(roles))
    if not np.any(np.isfinite(surface)):
        raise DegenerateDataError("no two curves overlap for any trial exponents")
    best_idx = np.unravel_index(int(np.argmin(surface)), surface.shape)
    r_min = float(surface[best_idx])
    if r_min == 0.0:
        warnings.warn("collapse cost is zero at the optimum; the fit is degenerate", stacklevel=2)
    inside = surface <= (1.0 + threshold_delta) * r_min
    intervals = {}
    for ax, r in enumerate(roles):
        hit = np.any(inside, axis=tuple(a for a in range(len(roles)) if a != ax))
        sel = np.flatnonzero(hit)
        intervals[r] = (float(grids[r][sel[0]]), float(grids[r][sel[-1]]))
    best = {r: float(grids[r][i]) for r, i in zip(roles, best_idx)}
    return CollapseResult(best, r_min, roles, grids, surface, intervals, threshold_delta, fixed)


@dataclass(frozen=True)
class Saturation:
    group: object
    n: int
    depth: float
    saturated: bool


def saturation_depth(ds: ScalingDataset, fraction: float = SATURATION_FRACTION) -> list[Saturation]:
    """Depth beyond which ``y`` stays within ``fraction`` of its deepest value.

    ``x_raw`` holds the depth.  For each (group, N) the result is the
    smallest ``D`` such that every ``D' >= D`` has
    ``|y(D') - y(D_max)| <= fraction * |y(D_max)|``; ``saturated`` is False when
    only ``D_max`` itself qualifies.
    """
    out = []
    for g, curves in ds._curves().items():
        for n, x, y in curves:
            if len(x) < 4:
                raise ArgumentError(f"group {g!r}, N={n}: need >= 4 depth points")
            ok = np.abs(y - y[-1]) <= fraction * abs(y[-1])
            k = len(x) - 1
            while k > 0 and ok[k - 1]:
                k -= 1
            out.append(Saturation(g, n, float(x[k]), k < len(x) - 1))
    return out


def read_surface(path) -> tuple[list, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=np.float64)
