#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure numpy fallback.

Times the two hot operations (nearest-point mesh query, gaussian field sum)
and a full servo step, for each importable backend, and prints a table.

    python3 benchmarks/bench_kernels.py [--ticks 2000]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

import palpatron._kernels as kernels
from palpatron.config import Config
from palpatron.geometry import MeshQuery
from palpatron.haptics import RigState, ServoParams, make_rig, servo_step
from palpatron.tissue import Scenario, build_scenario


def _time_op(fn, n: int) -> float:
    fn()  # warm
    t0 = time.perf_counter()
    for _ in range(n):
        fn()
    return (time.perf_counter() - t0) / n * 1e6  # us


def bench_backend(name: str, impl, model, probes) -> dict:
    mq = MeshQuery(model.mesh)
    centers, inv2s2, amps, cut2 = model._stiff_arrays
    i = iter(range(10**9))

    def nearest():
        p = probes[next(i) % len(probes)]
        impl.mesh_nearest(p[0], p[1], p[2], mq._a, mq._ab, mq._ac,
                          mq._cen, mq._crad)

    def gauss():
        p = probes[next(i) % len(probes)]
        impl.gauss_sum(p[0], p[1], p[2], centers, inv2s2, amps, cut2)

    return {
        "backend": name,
        "nearest_us": _time_op(nearest, 300),
        "gauss_us": _time_op(gauss, 3000),
    }


def bench_servo(model, cfg, ticks: int) -> dict:
    rig = make_rig(cfg)
    params = ServoParams.from_config(cfg)
    sq = model.surface_query(20.0, 10.0, 55.0)
    target = RigState(insertion=95.0)  # descends into contact
    times = []
    for t in range(1, ticks + 1):
        t0 = time.perf_counter_ns()
        servo_step(model, rig, target, params, t)
        times.append(time.perf_counter_ns() - t0)
    times.sort()
    return {
        "ticks": ticks,
        "mean_us": statistics.fmean(times) / 1e3,
        "p99_us": times[int(0.99 * len(times))] / 1e3,
    }


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--ticks", type=int, default=2000)
    args = ap.parse_args()

    cfg = Config()
    model = build_scenario(Scenario.TUMORAL, 7, cfg)
    rng = np.random.default_rng(0)
    probes = rng.uniform([-150, -90, -10], [150, 90, 80], size=(256, 3))

    print(f"active backend: {kernels.backend_name}")
    rows = [bench_backend(name, impl, model, probes)
            for name, impl in sorted(kernels.backends().items())]
    print(f"{'backend':<10} {'nearest(us)':>12} {'gauss(us)':>10}")
    for r in rows:
        print(f"{r['backend']:<10} {r['nearest_us']:>12.1f} {r['gauss_us']:>10.2f}")
    if len(rows) == 2:
        a = next(r for r in rows if r["backend"] == "compiled")
        b = next(r for r in rows if r["backend"] == "numpy")
        print(f"speedup: nearest x{b['nearest_us'] / a['nearest_us']:.1f}, "
              f"gauss x{b['gauss_us'] / a['gauss_us']:.1f}")

    servo = bench_servo(model, cfg, args.ticks)
    print(f"servo step ({kernels.backend_name}): mean {servo['mean_us']:.1f} us, "
          f"p99 {servo['p99_us']:.1f} us over {servo['ticks']} contact ticks")


if __name__ == "__main__":
    main()
