import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from critlab.cli import main


def write(path, text):
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def column(rows, name):
    return np.array([float(r[name]) for r in rows])


@pytest.fixture(scope="module")
def n6_runs(tmp_path_factory):
    d = tmp_path_factory.mktemp("n6")
    cfg = write(d / "run.toml", "[model]\nn = 6\n[ansatz]\ndepth = 4\n")
    assert main(["dynamics", "--config", cfg, "--out", str(d / "a")]) == 0
    assert main(["exact", "--config", cfg, "--out", str(d / "a")]) == 0
    return d


class TestDynamics:
    def test_rows_and_header(self, n6_runs):
        path = n6_runs / "a" / "dynamics_n6_d4_s0.csv"
        with open(path) as fh:
            assert fh.readline().strip() == "tau,m,msq,entropy_half,energy,n,depth,seed,family"
        rows = read_csv(path)
        assert len(rows) == 101
        # the start carries the sigma = 0.002 parameter perturbation: 1 - O(P sigma^2)
        assert float(rows[0]["msq"]) == pytest.approx(1.0, abs=1e-3)

    def test_matches_exact(self, n6_runs):
        var = column(read_csv(n6_runs / "a" / "dynamics_n6_d4_s0.csv"), "msq")
        ex = read_csv(n6_runs / "a" / "exact_n6.csv")
        assert all(r["depth"] == "-1" for r in ex)
        assert np.max(np.abs(var - column(ex, "msq"))) <= 0.02

    def test_metadata(self, n6_runs):
        meta = json.loads((n6_runs / "a" / "dynamics_n6_d4_s0.csv.meta.json").read_text())
        assert meta["tool"].startswith("critlab ")
        assert meta["config"]["model"]["n"] == 6 and meta["partial"] is False
        assert meta["trajectory"][0]["complete"]

    def test_byte_identical_rerun(self, tmp_path):
        cfg = write(tmp_path / "r.toml", "[model]\nn = 3\n[ansatz]\ndepth = 2\n[dynamics]\ntau_max = 1.0\n")
        for out in ("x", "y"):
            assert main(["dynamics", "--config", cfg, "--out", str(tmp_path / out)]) == 0
        for name in ("dynamics_n3_d2_s0.csv", "dynamics_n3_d2_s0.csv.meta.json", "dynamics_n3_d2_s0.params.csv"):
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()

    def test_seed_flag(self, tmp_path):
        cfg = write(tmp_path / "r.toml", "[model]\nn = 3\n[ansatz]\ndepth = 1\n[dynamics]\ntau_max = 0.5\n")
        assert main(["dynamics", "--config", cfg, "--out", str(tmp_path), "--seed", "9"]) == 0
        rows = read_csv(tmp_path / "dynamics_n3_d1_s9.csv")
        assert rows[0]["seed"] == "9"

    def test_plot_data(self, tmp_path):
        cfg = write(tmp_path / "r.toml", "[model]\nn = 4\n[ansatz]\ndepth = 1\n[dynamics]\ntau_max = 0.5\n")
        assert main(["dynamics", "--config", cfg, "--out", str(tmp_path), "--plot-data"]) == 0
        rows = read_csv(tmp_path / "dynamics_n4_d1_s0.plot.csv")
        raw = read_csv(tmp_path / "dynamics_n4_d1_s0.csv")
        assert float(rows[5]["x_tau_scaled"]) == pytest.approx(float(raw[5]["tau"]) / 4)
        assert float(rows[5]["y_msq_scaled"]) == pytest.approx(float(raw[5]["msq"]) * 4 ** 0.25)


class TestExact:
    def test_single_spin(self, tmp_path):
        cfg = write(tmp_path / "e.toml", "[model]\nn = 1\n[dynamics]\ntau_max = 5.0\n")
        assert main(["exact", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "exact_n1.csv")
        tau, m = column(rows, "tau"), column(rows, "m")
        assert np.max(np.abs(m - 1 / np.cosh(2 * tau))) <= 1e-10

    def test_classical(self, tmp_path):
        cfg = write(tmp_path / "e.toml", "[model]\nn = 4\nh = 0.0\n[dynamics]\ntau_max = 2.0\n")
        assert main(["exact", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert np.all(column(read_csv(tmp_path / "exact_n4.csv"), "msq") == 1.0)

    def test_capacity_exit(self, tmp_path):
        cfg = write(tmp_path / "e.toml", "[model]\nn = 15\n[dynamics]\ntau_max = 0.1\n")
        assert main(["exact", "--config", cfg, "--out", str(tmp_path)]) == 4


class TestVqeAndCorrelator:
    def test_vqe_classical(self, tmp_path):
        cfg = write(tmp_path / "v.toml",
                    "[model]\nn = [3, 4]\nh = 0.0\n[ansatz]\ndepth = [1, 2]\n[vqe]\nsteps = 300\nrestarts = 2\n")
        assert main(["vqe", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "vqe_ladder.csv")
        assert len(rows) == 4
        assert np.allclose(column(rows, "msq"), 1.0, atol=1e-6)
        meta = json.loads((tmp_path / "vqe_ladder.csv.meta.json").read_text())
        assert meta["restarts_used"] == 2 and meta["steps_used"] == 300

    def test_correlator(self, tmp_path):
        cfg = write(tmp_path / "c.toml", "[model]\nn = 4\n[ansatz]\ndepth = 2\n[dynamics]\ntau_max = 1.0\n"
                                         "[correlator]\nn_configs = 2\nkeep_members = true\n")
        assert main(["correlator", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "correlator_n4_d2_s0.csv")
        assert list(rows[0]) == ["tau", "A", "n", "n_configs", "seed"]
        assert float(rows[0]["A"]) == 1.0
        assert (tmp_path / "correlator_n4_d2_s0.members.csv").exists()


class TestCollapse:
    def _inputs(self, tmp_path):
        cfg = write(tmp_path / "d.toml", "[model]\nn = [4, 6]\n[ansatz]\ndepth = 2\n[dynamics]\ntau_max = 2.0\n")
        assert main(["exact", "--config", cfg, "--out", str(tmp_path)]) == 0
        return [str(tmp_path / "exact_n4.csv"), str(tmp_path / "exact_n6.csv")]

    def test_time_collapse(self, tmp_path):
        inputs = self._inputs(tmp_path)
        cfg = write(tmp_path / "k.toml", f"[collapse]\nkind = \"time\"\ninputs = {json.dumps(inputs)}\n"
                                         "resolution = 31\n")
        assert main(["collapse", "--config", cfg, "--out", str(tmp_path), "--plot-data"]) == 0
        res = json.loads((tmp_path / "collapse_time.json").read_text())
        for key in ("roles", "best", "intervals", "r_min", "threshold_delta", "inputs_hash"):
            assert key in res
        assert res["roles"] == ["beta_nu"] and res["fixed"] == {"z": 1.0}
        with open(tmp_path / "collapse_time.surface.csv") as fh:
            assert len(fh.readlines()) == 32
        assert (tmp_path / "collapse_time.plot.csv").exists()

    def test_duplicate_curves_degenerate(self, tmp_path):
        rows = "tau,m,msq,entropy_half,energy,n,depth,seed,family\n"
        a = rows + "".join(f"{t},1,0.5,0,0,4,1,0,x\n" for t in range(4))
        b = rows + "".join(f"{t},1,0.5,0,0,6,1,0,x\n" for t in range(4))
        cfg = write(tmp_path / "k.toml", "[collapse]\nkind = \"time\"\ninputs = [\"%s\", \"%s\"]\nresolution = 5\n"
                    % (write(tmp_path / "a.csv", a), write(tmp_path / "b.csv", b)))
        with pytest.warns(UserWarning):
            assert main(["collapse", "--config", cfg, "--out", str(tmp_path)]) == 0
        res = json.loads((tmp_path / "collapse_time.json").read_text())
        assert res["r_min"] == 0.0 and res["degenerate"]

    def test_schema_error_line(self, tmp_path, capsys):
        bad = write(tmp_path / "bad.csv", "tau,m,msq,entropy_half,energy,n,depth,seed,family\n0,1,1,0,0,4,1,0,x\n"
                                          "0.1,oops,1,0,0,4,1,0,x\n")
        cfg = write(tmp_path / "k.toml", f"[collapse]\ninputs = [\"{bad}\"]\n")
        assert main(["collapse", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "bad.csv:3" in capsys.readouterr().err

    def test_missing_column(self, tmp_path, capsys):
        bad = write(tmp_path / "bad.csv", "tau,m\n0,1\n")
        cfg = write(tmp_path / "k.toml", f"[collapse]\ninputs = [\"{bad}\"]\n")
        assert main(["collapse", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "bad.csv:1" in capsys.readouterr().err

    def test_single_size_is_numeric_failure(self, tmp_path):
        inputs = self._inputs(tmp_path)[:1]
        cfg = write(tmp_path / "k.toml", f"[collapse]\ninputs = {json.dumps(inputs)}\n")
        assert main(["collapse", "--config", cfg, "--out", str(tmp_path)]) == 3


class TestMitigate:
    def test_pipeline(self, tmp_path):
        cfg = write(tmp_path / "d.toml", "[model]\nn = 3\n[ansatz]\ndepth = 1\n[dynamics]\ntau_max = 0.4\n")
        assert main(["dynamics", "--config", cfg, "--out", str(tmp_path)]) == 0
        params = tmp_path / "dynamics_n3_d1_s0.params.csv"
        mcfg = write(tmp_path / "m.toml", f"[noise]\nshots = 4000\ntrajectories = 64\ndepol_2q = 0.0\n"
                                          f"depol_1q = 0.0\nreadout_eps = 0.0\nreadout_eta = 0.0\n"
                                          f"[mitigate]\nparams_file = \"{params}\"\ntaus = [0.0, 0.4]\n")
        assert main(["mitigate", "--config", mcfg, "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "mitigate_n3_d1.csv")
        assert len(rows) == 2
        for r in rows:
            assert abs(float(r["raw"]) - float(r["exact"])) <= 5 / np.sqrt(4000 * 3)
        report = json.loads((tmp_path / "mitigate_n3_d1.json").read_text())
        assert set(report["points"][0]) >= {"tau", "raw", "mit", "exact", "a", "b", "residual"}

    def test_missing_params_file(self, tmp_path):
        cfg = write(tmp_path / "m.toml", "[mitigate]\nparams_file = \"nope.csv\"\n")
        assert main(["mitigate", "--config", cfg, "--out", str(tmp_path)]) == 2


class TestSweepAndErrors:
    def test_sweep_parallel_identical(self, tmp_path, monkeypatch):
        cfg = write(tmp_path / "s.toml", "[dynamics]\ntau_max = 0.5\n[sweep]\ncommand = \"dynamics\"\n"
                                         "n = [3, 4]\ndepth_rule = \"half_plus_one\"\n")
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "seq")]) == 0
        monkeypatch.setenv("CRITLAB_WORKERS", "2")
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "par")]) == 0
        index = json.loads((tmp_path / "seq" / "sweep_index.json").read_text())
        assert [(p["n"], p["depth"]) for p in index["points"]] == [(3, 2), (4, 3)]
        for name in ("dynamics_n3_d2_s0.csv", "dynamics_n4_d3_s0.csv"):
            assert (tmp_path / "seq" / name).read_bytes() == (tmp_path / "par" / name).read_bytes()

    def test_unknown_key(self, tmp_path):
        cfg = write(tmp_path / "b.toml", "[model]\nbogus = 1\n")
        assert main(["dynamics", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_unknown_section_and_bad_toml(self, tmp_path):
        assert main(["dynamics", "--config", write(tmp_path / "b.toml", "[nope]\n"), "--out", str(tmp_path)]) == 2
        assert main(["dynamics", "--config", write(tmp_path / "c.toml", "[model\n"), "--out", str(tmp_path)]) == 2
        assert main(["dynamics", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path)]) == 2

    def test_bad_values(self, tmp_path):
        assert main(["dynamics", "--config", write(tmp_path / "b.toml", "[ansatz]\nfamily = \"mera\"\n"),
                     "--out", str(tmp_path)]) == 2
        assert main(["dynamics", "--out", str(tmp_path), "--workers", "0"]) == 2

    def test_bad_env_workers(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CRITLAB_WORKERS", "many")
        assert main(["exact", "--out", str(tmp_path)]) == 2

    def test_entry_point(self, tmp_path):
        cfg = write(tmp_path / "e.toml", "[model]\nn = 2\n[dynamics]\ntau_max = 0.2\n")
        proc = subprocess.run([sys.executable, "-m", "critlab.cli", "exact", "--config", cfg, "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "exact_n2.csv").exists()
