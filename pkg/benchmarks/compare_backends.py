#!/usr/bin/env python3
"""Throughput comparison: pure-Python engine vs compiled core on PHOLD.

Runs the same workload on both backends for a fixed wall-clock budget each
and reports events/second.  Usage:

    python3 benchmarks/compare_backends.py [--objects N] [--threads T]
                                           [--seconds S]
"""
import argparse

import epochsim
from epochsim import run_phold
from epochsim.config import EngineConfig
from epochsim.phold import PholdConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--objects", type=int, default=64)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seconds", type=float, default=3.0)
    ap.add_argument("--state-size", type=int, default=64)
    args = ap.parse_args()

    pc = PholdConfig(
        objects=args.objects,
        initial_events=4,
        state_size=args.state_size,
        realloc_fraction=0.5,
        lookahead=1.0,
        mean_increment=2.0,
    )
    ec = EngineConfig(
        num_threads=args.threads,
        lookahead=1.0,
        end_time=1e18,
        rng_seed=1234,
        wall_clock_limit=args.seconds,
        pin=False,
    )

    backends = ["python"]
    if epochsim.HAVE_COMPILED:
        backends.append("compiled")
    else:
        print("compiled backend not built; benchmarking python only")

    results = {}
    for backend in backends:
        report = run_phold(ec, pc, backend=backend)
        results[backend] = report
        print(
            f"{backend:>9}: {report.events_processed:>10} events in "
            f"{report.wall_clock_seconds:6.2f}s  "
            f"({report.throughput:,.0f} ev/s, "
            f"{report.epochs_completed} epochs)"
        )
    if len(results) == 2:
        speedup = results["compiled"].throughput / results["python"].throughput
        print(f"  speedup: {speedup:.1f}x")


if __name__ == "__main__":
    main()
