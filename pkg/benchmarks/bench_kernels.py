"""Time the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

The first part calls both flavours of each kernel in-process. The second runs
a small end-to-end workload (HHT-WPT features plus LOF scoring) in two
subprocesses, one with ``RFFP_DISABLE_NUMBA=1``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from rffp import _kernels as K
from rffp._accel import use_numba

WORKLOAD = """
import json, time
import numpy as np
from rffp._accel import use_numba
from rffp.anomaly import lof_fit, lof_scores
from rffp.features import assemble_hht_wpt
r = np.random.default_rng(0)
x = r.normal(size=(40, 1024))
assemble_hht_wpt(x[0]); lof_scores(lof_fit(r.normal(size=(50, 32)), 20), r.normal(size=(2, 32)))
t0 = time.perf_counter()
for row in x:
    assemble_hht_wpt(row)
t1 = time.perf_counter()
model = lof_fit(r.normal(size=(2000, 32)), 20, "manhattan")
lof_scores(model, r.normal(size=(1000, 32)))
t2 = time.perf_counter()
print(json.dumps({"numba": use_numba(), "hht_wpt_40_slices_s": t1 - t0, "lof_2000x1000_s": t2 - t1}))
"""


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not use_numba():
        print("numba unavailable or disabled: only the numpy flavour is timed")
    r = np.random.default_rng(0)
    A, B = r.normal(size=(1000, 32)), r.normal(size=(2000, 32))
    x = np.cumsum(r.normal(size=200_000))
    cases = [(f"pairwise {m} 1000x2000x32", lambda c=K.metric_code(m): K._pairwise_numba(A, B, c),
              lambda c=K.metric_code(m): K._pairwise_numpy(A, B, c)) for m in K.METRICS]
    cases += [("extrema n=200000", lambda: K._extrema_numba(x), lambda: K._extrema_numpy(x)),
              ("zero crossings n=200000", lambda: K._zero_crossings_numba(x), lambda: K._zero_crossings_numpy(x))]
    print(f"{'kernel':32s} {'numba s':>10s} {'numpy s':>10s} {'ratio':>8s}")
    for name, fast, slow in cases:
        fast()  # compile
        tf, ts = best(fast, args.repeat), best(slow, args.repeat)
        print(f"{name:32s} {tf:10.5f} {ts:10.5f} {ts / tf:8.2f}")

    print("\nend-to-end workload")
    for flag in ("0", "1"):
        env = dict(os.environ, RFFP_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", WORKLOAD], env=env, capture_output=True, text=True, check=True)
        res = json.loads(out.stdout)
        print(f"  numba={res['numba']!s:5s}  HHT-WPT x40 {res['hht_wpt_40_slices_s']:.3f} s   "
              f"LOF 2000 refs x 1000 queries {res['lof_2000x1000_s']:.3f} s")


if __name__ == "__main__":
    main()
