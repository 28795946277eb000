"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py --trials 5

Times representative conv shapes from the default model, the bilinear
resize and one full forward pass on each available backend, and checks
that both backends produce bit-identical outputs.
"""

import argparse
import json
import time

import numpy as np

from litedepth import ops
from litedepth.graph import build_litedepth, run
from litedepth.ops import ConvSpec

# (name, input shape, weight shape, stride, groups)
CONV_CASES = [
    ("stem 3x3 s2", (1, 3, 128, 160), (8, 3, 3, 3), 2, 1),
    ("depthwise 5x5", (1, 48, 16, 20), (48, 1, 5, 5), 1, 48),
    ("pointwise 1x1", (1, 48, 16, 20), (24, 48, 1, 1), 1, 1),
    ("fusion 3x3", (1, 40, 64, 80), (24, 40, 3, 3), 1, 1),
]


def timed(fn, trials):
    fn()
    times = []
    for _ in range(trials):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    return float(np.mean(times)), float(np.std(times))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--json", help="write results to this file")
    args = p.parse_args()

    rng = np.random.default_rng(0)
    backends = ops.available_backends()
    rows = []
    for name, xs, ws, stride, groups in CONV_CASES:
        x = rng.standard_normal(xs).astype(np.float32)
        w = rng.standard_normal(ws).astype(np.float32)
        b = rng.standard_normal(ws[0]).astype(np.float32)
        spec = ConvSpec.same(ws[2], stride, groups)
        outs, row = {}, {"case": name}
        for be in backends:
            outs[be] = ops.conv2d(x, w, b, spec, backend=be)
            row[be] = timed(lambda: ops.conv2d(x, w, b, spec, backend=be), args.trials)
        row["identical"] = len({o.tobytes() for o in outs.values()}) == 1
        rows.append(row)

    x = rng.uniform(0, 1, (1, 24, 240, 320)).astype(np.float32)
    outs, row = {}, {"case": "resize 240x320->480x640"}
    for be in backends:
        outs[be] = ops.resize_bilinear(x, 480, 640, backend=be)
        row[be] = timed(lambda: ops.resize_bilinear(x, 480, 640, backend=be), args.trials)
    row["identical"] = len({o.tobytes() for o in outs.values()}) == 1
    rows.append(row)

    model = build_litedepth()
    img = rng.uniform(0, 255, (1, 3, 480, 640)).astype(np.float32)
    outs, row = {}, {"case": "full model 480x640"}
    for be in backends:
        outs[be] = run(model, img, backend=be)
        row[be] = timed(lambda: run(model, img, backend=be), args.trials)
    row["identical"] = len({o.tobytes() for o in outs.values()}) == 1
    rows.append(row)

    header = f"{'case':28s}" + "".join(f"{be + ' ms':>22s}" for be in backends) + "   speedup  identical"
    print(header)
    for row in rows:
        line = f"{row['case']:28s}" + "".join(f"{row[be][0]:12.2f} +- {row[be][1]:6.2f}" for be in backends)
        speedup = row["python"][0] / row["compiled"][0] if "compiled" in row else float("nan")
        print(f"{line}   {speedup:7.2f}  {row['identical']}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
