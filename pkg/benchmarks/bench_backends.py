"""Time the compiled and pure-numpy backends on the same workloads.

Usage: python benchmarks/bench_backends.py [--repeat N]

Each backend runs in its own interpreter (the backend is fixed at import).
Reported times exclude a warm-up pass, so numba compile time is not counted.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
import mountpass as mp

repeat = int(sys.argv[1])
dw = mp.double_well()
atlas = mp.ComponentAtlas.build(dw.functional, 0.5, {0: [-1, 0], 1: [1, 0]})
bvp = mp.bvp_action(63)
batlas = mp.ComponentAtlas.build(bvp.functional, 1.0, {0: np.zeros(63)}, escape_level=bvp.escape_level)
btol = mp.Tolerances(grad_tol=1e-4, settle_tol=1e-6)
hat = mp.tilted_hat(0.1)
loop = hat.notes["loop"]

work = {
    "flow_double_well": lambda: mp.integrate_flow(dw.functional, [0.3, 0.4], mp.Tolerances()),
    "alg1b_double_well": lambda: mp.run_alg1b(dw.functional, dw.default_path, atlas, mp.Tolerances()),
    "alg1c_bvp63": lambda: mp.run_alg1c(bvp.functional, bvp.default_path.start, bvp.default_path.end,
                                        bvp.default_path, batlas, btol),
    "winding_circle": lambda: mp.winding_number(loop, hat.obstacle),
}
out = {"backend": mp.BACKEND}
for name, fn in work.items():
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps(out))
"""


def run(backend: str, repeat: int) -> dict:
    env = dict(os.environ, MOUNTPASS_BACKEND=backend)
    r = subprocess.run(
        [sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(r.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    nb, npy = run("numba", args.repeat), run("numpy", args.repeat)
    print(f"{'workload':<20} {nb['backend']:>10} {'numpy':>10} {'speedup':>8}")
    for key in nb:
        if key == "backend":
            continue
        print(f"{key:<20} {nb[key]:>9.4f}s {npy[key]:>9.4f}s {npy[key] / nb[key]:>7.1f}x")


if __name__ == "__main__":
    main()
