"""Datasets behind the acceptance checks, cached under ``CRITLAB_CACHE``.

Running this file directly fills the cache (slow: a few hours on one core).
"""

import os
from pathlib import Path

from critlab import pipelines
from critlab.vqe import DESK

CACHE = pipelines.Cache(os.environ.get("CRITLAB_CACHE", Path(__file__).resolve().parent.parent / ".critlab_cache"))
WORKERS = int(os.environ.get("CRITLAB_WORKERS", "1"))

SIZES = (8, 10, 12)
VQE_SIZES = tuple(range(6, 13))
VQE_DEPTHS = tuple(range(1, 7))
CORRELATOR_CONFIGS = 8
SEED = 0
MITIGATION_POINTS = (("ladder", 6, 3), ("ladder", 7, 3), ("ladder", 8, 4))


def half_plus_one(n):
    return n // 2 + 1


def dynamics_points():
    pts = [("ladder", n, d) for n in SIZES for d in range(2, n // 2 + 3)]
    pts += [("ladder", n, 1) for n in (6, 8)] + [("ladder", 6, 4)]
    return sorted(set(pts), key=lambda p: (p[1], p[2]))


def dynamics():
    return pipelines.dynamics_sweep(dynamics_points(), seed=SEED, workers=WORKERS, cache=CACHE)


def correlator():
    return pipelines.correlator_sweep(SIZES, half_plus_one, CORRELATOR_CONFIGS, seed=SEED,
                                      workers=WORKERS, cache=CACHE)


def vqe(family):
    pts = [(family, n, d) for n in VQE_SIZES for d in VQE_DEPTHS]
    return pipelines.vqe_sweep(pts, DESK, seed=SEED, workers=WORKERS, cache=CACHE)


def mitigation():
    return pipelines.mitigation_sweep(MITIGATION_POINTS, tau_max=3.0, dtau=0.2, seed=SEED, cache=CACHE)


if __name__ == "__main__":
    import time

    for name, fn in [("dynamics", dynamics), ("correlator", correlator),
                     ("vqe ladder", lambda: vqe("ladder")), ("vqe brickwall", lambda: vqe("brickwall")),
                     ("mitigation", mitigation)]:
        t0 = time.perf_counter()
        fn()
        print(f"{name}: {time.perf_counter() - t0:.0f} s", flush=True)
