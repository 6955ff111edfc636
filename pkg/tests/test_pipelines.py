import os
import subprocess
import sys

import numpy as np
import pytest

from critlab import pipelines
from critlab.collapse import FIG_DEPTH, FIG_TIME


class TestCache:
    def test_roundtrip_and_reuse(self, tmp_path):
        cache = pipelines.Cache(tmp_path)
        calls = []

        def compute():
            calls.append(1)
            return {"v": 3}

        key = {"kind": "demo", "n": 4}
        assert cache.get(key, compute)["value"] == {"v": 3}
        assert cache.get(key, compute)["value"] == {"v": 3}
        assert len(calls) == 1
        assert cache.path(key) != cache.path({"kind": "demo", "n": 5})

    def test_fingerprint_stable(self):
        assert pipelines.source_fingerprint() == pipelines.source_fingerprint()


class TestSweeps:
    def test_dynamics_cached_roundtrip(self, tmp_path):
        cache = pipelines.Cache(tmp_path)
        pts = [("ladder", 3, 1), ("ladder", 4, 1)]
        first = pipelines.dynamics_sweep(pts, tau_max=0.5, cache=cache)
        second = pipelines.dynamics_sweep(pts, tau_max=0.5, cache=cache)
        assert list(first) == pts
        for p in pts:
            assert np.array_equal(first[p].thetas, second[p].thetas)
            assert np.array_equal(first[p].msq, second[p].msq)

    def test_time_dataset(self, tmp_path):
        trajs = pipelines.dynamics_sweep([("ladder", 3, 1), ("ladder", 4, 1)], tau_max=1.0)
        ds = pipelines.fig_time_dataset(trajs, tau_min=0.5)
        assert ds.axes == FIG_TIME and len(ds) == 2 * 6
        assert ds.x_raw.min() == pytest.approx(0.5)

    def test_depth_dataset(self):
        trajs = pipelines.dynamics_sweep([("ladder", n, d) for n in (4, 5) for d in (1, 2)], tau_max=2.5)
        ds = pipelines.fig_depth_dataset(trajs, fractions=(0.2, 0.4), depth_min=1)
        assert ds.axes == FIG_DEPTH
        assert ds.groups() == [0.2, 0.4]
        # y at tau = f N on the output grid
        k = int(round(0.4 * 4 / 0.1))
        sel = (np.array(ds.group) == 0.4) & (ds.size_n == 4) & (ds.x_raw == 2)
        assert ds.y_raw[sel][0] == trajs[("ladder", 4, 2)].m[k]

    def test_off_grid_fraction(self):
        trajs = pipelines.dynamics_sweep([("ladder", 3, 1)], tau_max=1.0)
        with pytest.raises(ValueError):
            pipelines.fig_depth_dataset(trajs, fractions=(0.15,), depth_min=1)


def test_pure_python_backend_switch():
    env = dict(os.environ, CRITLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import critlab; print(critlab.backend)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"
