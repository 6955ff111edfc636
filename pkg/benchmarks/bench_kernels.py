"""Compare the compiled and numpy kernel backends on the hot paths.

Run with ``python benchmarks/bench_kernels.py [--sizes 8 10 12] [--repeat 5]``.
Reports the best wall time per call for the forward circuit, the state
Jacobian used by the McLachlan system and the adjoint energy gradient.
"""

import argparse
import time

import numpy as np

from critlab import _backend
from critlab.ansatz import AnsatzSpec, build_ansatz
from critlab.qsim import apply_circuit, new_state, state_jacobian
from critlab.tfim import build_tfim
from critlab.vqe import energy_and_gradient


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 10, 12])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = {"numpy": _backend.pure}
    if _backend.compiled is not None:
        backends["cython"] = _backend.compiled
    else:
        print("compiled extension not built; timing the numpy backend only")

    print(f"{'N':>3} {'D':>3} {'task':<10} " + " ".join(f"{b:>12}" for b in backends) + "   speedup")
    for n in args.sizes:
        d = n // 2 + 1
        spec = AnsatzSpec("ladder", n, d)
        circ = build_ansatz(spec)
        ham = build_tfim(n, 1.0)
        theta = np.random.default_rng(0).normal(0, 0.3, circ.n_params)
        psi0 = new_state(n)
        tasks = {
            "forward": lambda k: apply_circuit(psi0, circ, theta, kernels=k),
            "jacobian": lambda k: state_jacobian(circ, theta, psi0, kernels=k),
            "gradient": lambda k: energy_and_gradient(circ, theta, ham, psi0, kernels=k),
        }
        for name, task in tasks.items():
            t = {b: best_of(lambda: task(k), args.repeat) for b, k in backends.items()}
            cols = " ".join(f"{t[b] * 1e3:10.3f}ms" for b in backends)
            sp = f"{t['numpy'] / t['cython']:8.1f}x" if "cython" in t else ""
            print(f"{n:>3} {d:>3} {name:<10} {cols} {sp}")


if __name__ == "__main__":
    main()
