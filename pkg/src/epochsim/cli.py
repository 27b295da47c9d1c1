"""Command-line PHOLD runner with metrics, tracing, oracle and verification."""

import argparse
import csv
import sys
import time

from . import HAVE_COMPILED, run_phold
from .config import EngineConfig
from .engine import Engine
from .errors import ConfigError, LookaheadViolation
from .oracle import sequential_oracle
from .phold import PholdConfig, PholdModel
from .verify import verify_trace


def build_parser():
    p = argparse.ArgumentParser(
        prog="epochsim-phold",
        description="Run the PHOLD benchmark on the epoch-synchronized engine.")
    p.add_argument("--objects", type=int, default=64)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--initial-events", type=int, default=10, metavar="M")
    p.add_argument("--state-size", type=int, default=32, metavar="S")
    p.add_argument("--realloc-fraction", type=float, default=0.001, metavar="P")
    p.add_argument("--lookahead", type=float, default=0.1, metavar="L")
    p.add_argument("--mean-increment", type=float, default=1.0, metavar="TA")
    p.add_argument("--epoch-width", type=float, default=None, metavar="W")
    p.add_argument("--calendar-depth", type=int, default=16, metavar="N")
    p.add_argument("--end-time", type=float, default=100.0)
    p.add_argument("--wall-clock-limit", type=float, default=None,
                   help="stop after this many seconds of wall-clock time")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--emulate-nodes", type=int, default=None,
                   help="force an emulated memory-node layout")
    pin = p.add_mutually_exclusive_group()
    pin.add_argument("--pin", dest="pin", action="store_true", default=True)
    pin.add_argument("--no-pin", dest="pin", action="store_false")
    p.add_argument("--trace", metavar="PATH",
                   help="write the processing trace (tab-separated)")
    p.add_argument("--metrics", metavar="PATH", help="write the metrics CSV")
    p.add_argument("--verify", action="store_true",
                   help="check the trace for ordering violations")
    p.add_argument("--oracle", action="store_true",
                   help="compare against the sequential reference run")
    p.add_argument("--inject-at-zero", action="store_true",
                   help="timestamp all initial events at t=0")
    p.add_argument("--backend", choices=("auto", "python", "compiled"),
                   default="auto")
    return p


def _write_trace(path, entries):
    with open(path, "w") as fh:
        for e in entries:
            fh.write(f"{e.obj}\t{e.timestamp!r}\t{e.seq}\t{e.order}\t"
                     f"{e.worker}\t{e.epoch}\n")


class _MetricsSampler:
    """Collects a throughput row roughly every 100 ms, between barriers."""

    INTERVAL = 0.1

    def __init__(self, num_nodes):
        self.rows = []
        self.num_nodes = num_nodes
        self._t0 = time.monotonic()
        self._last = self._t0
        self._last_events = 0

    def sample(self, engine, force=False):
        now = time.monotonic()
        if not force and now - self._last < self.INTERVAL:
            return
        events = sum(engine._per_thread_events)
        dt = now - self._last
        inst = (events - self._last_events) / dt if dt > 0 else 0.0
        local = [sum(engine._acq_local[w][n]
                     for w in range(engine.config.num_threads))
                 for n in range(self.num_nodes)]
        stolen = [sum(engine._acq_stolen[w][n]
                      for w in range(engine.config.num_threads))
                  for n in range(self.num_nodes)]
        self.rows.append([now - self._t0, events, inst,
                          engine.pool.base_epoch] + local + stolen)
        self._last, self._last_events = now, events

    def write(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = (["elapsed_seconds", "cumulative_events",
                       "throughput_eps", "epoch"]
                      + [f"local_node{n}" for n in range(self.num_nodes)]
                      + [f"stolen_node{n}" for n in range(self.num_nodes)])
            w.writerow(header)
            w.writerows(self.rows)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        ecfg = EngineConfig(
            num_threads=args.threads, lookahead=args.lookahead,
            epoch_width=args.epoch_width, calendar_depth=args.calendar_depth,
            end_time=args.end_time, rng_seed=args.seed,
            emulate_nodes=args.emulate_nodes, pin=args.pin,
            wall_clock_limit=args.wall_clock_limit)
        pcfg = PholdConfig(
            objects=args.objects, initial_events=args.initial_events,
            state_size=args.state_size, realloc_fraction=args.realloc_fraction,
            lookahead=args.lookahead, mean_increment=args.mean_increment,
            inject_at_zero=args.inject_at_zero)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    need_python = args.verify or args.oracle or args.trace or args.metrics
    backend = args.backend
    if backend == "compiled" and not HAVE_COMPILED:
        print("compiled core is not built", file=sys.stderr)
        return 2
    if backend == "auto":
        backend = "compiled" if HAVE_COMPILED and not need_python else "python"
    if backend == "compiled" and need_python:
        print("--trace/--metrics/--verify/--oracle require --backend python",
              file=sys.stderr)
        return 2

    try:
        if backend == "compiled":
            report = run_phold(ecfg, pcfg, backend="compiled")
            trace = None
        else:
            model = PholdModel(pcfg)
            want_trace = bool(args.trace or args.verify or args.oracle)
            sampler = _MetricsSampler(1)
            eng = Engine(ecfg, model.binding(), trace=want_trace)
            sampler.num_nodes = eng.topology.num_nodes
            eng.rollover_hook = sampler.sample
            report = eng.run()
            sampler.sample(eng, force=True)
            trace = eng.trace
            if args.metrics:
                sampler.write(args.metrics)
    except LookaheadViolation as exc:
        print(f"lookahead violation: {exc}", file=sys.stderr)
        return 1

    if args.trace and trace is not None:
        _write_trace(args.trace, trace.entries)

    status = 0
    if args.verify and trace is not None:
        verdict = verify_trace(trace.entries, ecfg.epoch_width, ecfg.lookahead,
                               trace.schedule_log)
        print(f"verify: {'pass' if verdict.ok else 'FAIL'} ({verdict.reason})")
        if not verdict.ok:
            status = 1

    if args.oracle and trace is not None:
        ref = sequential_oracle(ecfg, PholdModel(pcfg).binding())
        got = sorted((e.obj, e.timestamp) for e in trace.entries)
        want = sorted((e.obj, e.timestamp) for e in ref)
        ok = got == want
        if ok:  # per-object orders must match too
            per_obj_got, per_obj_want = {}, {}
            for e in sorted(trace.entries, key=lambda e: e.order):
                per_obj_got.setdefault(e.obj, []).append(e.timestamp)
            for e in ref:
                per_obj_want.setdefault(e.obj, []).append(e.timestamp)
            ok = per_obj_got == per_obj_want
        print(f"oracle: {'match' if ok else 'MISMATCH'} "
              f"({len(ref)} reference events)")
        if not ok:
            status = 1

    acq = (sum(report.per_node_local_acquisitions),
           sum(report.per_node_stolen_acquisitions))
    total_acq = acq[0] + acq[1]
    steal_ratio = acq[1] / total_acq if total_acq else 0.0
    print(f"events={report.events_processed} epochs={report.epochs_completed} "
          f"wall={report.wall_clock_seconds:.3f}s "
          f"throughput={report.throughput:,.0f} ev/s "
          f"steal_ratio={steal_ratio:.3f} backend={backend}")
    return status


if __name__ == "__main__":
    sys.exit(main())
