"""Wall-clock comparison of the impact engines on a full run.

    python benchmarks/bench_engines.py [--steps 1000] [--L 41] [--engines naive,kernel,fft]
"""

import argparse
import time

from impact_lattice.core import ModelParams, run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--L", type=int, default=41)
    ap.add_argument("--K", type=int, default=2)
    ap.add_argument("--alpha", type=float, default=3.0)
    ap.add_argument("--temperature", type=float, default=1.0)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--engines", default="naive,kernel,fft")
    args = ap.parse_args()

    params = ModelParams(L=args.L, K=args.K, alpha=args.alpha, temperature=args.temperature, steps=args.steps, seed=1)
    timings, finals = {}, {}
    for engine in args.engines.split(","):
        run(params, engine=engine, steps=1)
        t0 = time.perf_counter()
        finals[engine] = run(params, engine=engine).final
        timings[engine] = time.perf_counter() - t0
    base = timings.get("naive")
    for engine, t in timings.items():
        factor = f"  x{base / t:.1f} vs naive" if base else ""
        print(f"{engine:>7}: {t:8.2f} s  ({1e3 * t / args.steps:.2f} ms/step){factor}")
    print("final states identical:", len({f.opinions.tobytes() for f in finals.values()}) == 1)


if __name__ == "__main__":
    main()
