"""Engine lifecycle: workers, the epoch loop, barriers, bookkeeping.

A run is a sequence of epochs.  Within an epoch every worker executes the
acquisition loop; at the end all workers meet at a barrier whose serial
action (run by exactly one thread while the rest wait) checks termination,
advances the calendar horizon and resets the per-node counters.  Released
workers first drain their own fallback lists, then start acquiring.

Waiting at the barrier uses a condition variable rather than busy-spinning:
with the interpreter lock, a spinning waiter would steal cycles from the
workers still processing.  The compiled core uses a true sense-reversing
spin barrier instead.
"""

import itertools
import threading
import time
from dataclasses import dataclass, field

from . import alloc, model, topology, workdist
from .config import EngineConfig, RunReport
from .pool import EventPool, EventRecord
from .rng import stream_for
from .timebase import epoch_of


@dataclass
class TraceEntry:
    obj: int
    timestamp: float
    seq: int
    order: int
    worker: int
    epoch: int


@dataclass
class EngineTrace:
    entries: list = field(default_factory=list)
    # (parent_obj, parent_ts, dest, child_ts) for every schedule() call
    schedule_log: list = field(default_factory=list)

    def sorted_entries(self):
        return sorted(self.entries, key=lambda e: e.order)


class Engine:
    def __init__(self, config: EngineConfig, binding: model.ModelBinding,
                 trace=False, record_epoch_stats=False, rollover_hook=None,
                 per_object_initial_bytes=4096):
        self.config = config
        self.model = binding
        self.num_objects = binding.object_count
        self.lookahead = config.lookahead
        self.epoch_width = config.epoch_width
        self.causality_check = config.causality_check

        self.topology = topology.detect_topology(config.emulate_nodes)
        self.partitions = topology.partition_objects(self.num_objects,
                                                     self.topology)
        self.pool = EventPool(self.num_objects, config.calendar_depth,
                              config.epoch_width, config.num_threads)
        self.allocators = alloc.setup_allocators(
            self.partitions, per_object_initial_bytes=per_object_initial_bytes)
        self._rngs = [stream_for(config.rng_seed, obj)
                      for obj in range(self.num_objects)]
        self.watermarks = [0.0] * self.num_objects

        self._seq = itertools.count()
        self._order = itertools.count()
        self._node_of = {}
        assignment = topology.worker_cpu_assignment(self.topology,
                                                    config.num_threads)
        self.contexts = []
        for wid, (cpu, node) in enumerate(assignment):
            ctx = model.WorkerContext(wid, node, self)
            self.contexts.append(ctx)
            self._node_of[wid] = (cpu, node)

        self.trace = EngineTrace() if trace else None
        self._trace_buffers = [[] for _ in range(config.num_threads)]
        self.record_epoch_stats = record_epoch_stats
        self.epoch_stats = []  # per epoch: list of AcquisitionStats per worker
        self._pending_epoch_stats = [None] * config.num_threads
        self.rollover_hook = rollover_hook

        self._per_thread_events = [0] * config.num_threads
        self._per_thread_ts_sum = [0.0] * config.num_threads
        # per-worker accumulators: plain += from several threads would race
        self._acq_local = [[0] * self.topology.num_nodes
                           for _ in range(config.num_threads)]
        self._acq_stolen = [[0] * self.topology.num_nodes
                            for _ in range(config.num_threads)]
        self._dropped_by = [0] * config.num_threads
        self._epochs_completed = 0
        self._stop = False
        self._error = None
        self._started = False
        self._deadline = None

    # -- services used by contexts and dispatch ------------------------------

    def rng_for(self, obj):
        return self._rngs[obj]

    def schedule(self, ctx, dest, ts, payload):
        payload = bytes(payload)
        if len(payload) > self.config.max_payload:
            raise ValueError(f"payload of {len(payload)} bytes exceeds the "
                             f"{self.config.max_payload}-byte limit")
        event = EventRecord(dest, ts, payload, next(self._seq),
                            self.pool.base_epoch)
        if self.trace is not None:
            self.trace.schedule_log.append(
                (ctx.current_object, ctx.now, dest, ts))
        return self.pool.insert(event, ctx.worker_id)

    def inject_initial(self, dest, ts, payload, worker_id=0):
        if not 0 <= dest < self.num_objects:
            raise ValueError(f"destination {dest} outside [0, {self.num_objects})")
        event = EventRecord(dest, ts, bytes(payload), next(self._seq), 0)
        return self.pool.insert_initial(event, worker_id)

    def note_processed(self, ctx, event):
        wid = ctx.worker_id
        self._per_thread_events[wid] += 1
        self._per_thread_ts_sum[wid] += event.timestamp
        if self.trace is not None:
            self._trace_buffers[wid].append(TraceEntry(
                event.dest, event.timestamp, event.seq, next(self._order),
                wid, self.pool.base_epoch))

    def current_epoch(self):
        if not self._started:
            raise RuntimeError("no run in progress")
        return self.pool.base_epoch

    # -- the run loop ---------------------------------------------------------

    def _dispatch(self, ctx, event):
        if event.timestamp >= self.config.end_time:
            # Beyond the simulated horizon; never processed.
            self._dropped_by[ctx.worker_id] += 1
            return False
        model.dispatch(ctx, event)
        return True

    def _epoch_action(self):
        """Serial barrier action: termination check, rollover, counter reset."""
        self._epochs_completed += 1
        if self.rollover_hook is not None:
            self.rollover_hook(self)
        next_epoch = self.pool.base_epoch + 1
        if (next_epoch * self.epoch_width >= self.config.end_time
                or self.pool.total_pending() == 0
                or (self._deadline is not None and time.monotonic() > self._deadline)):
            self._stop = True
            return
        self.pool.rollover()
        for part in self.partitions:
            part.reset_counter()

    def _worker(self, wid):
        ctx = self.contexts[wid]
        cpu, node = self._node_of[wid]
        if self.config.pin:
            topology.pin_worker(wid, cpu)
        try:
            while not self._stop:
                stats = workdist.process_epoch(ctx, self.partitions, self.pool,
                                               self._dispatch)
                for node, count in stats.local_from.items():
                    self._acq_local[wid][node] += count
                for node, count in stats.stolen_from.items():
                    self._acq_stolen[wid][node] += count
                if self.record_epoch_stats:
                    self._pending_epoch_stats[wid] = stats
                self._barrier.wait()
                if self._stop:
                    break
                self.pool.drain_fallback(wid)
        except threading.BrokenBarrierError:
            pass
        except BaseException as exc:  # propagate the first failure
            if self._error is None:
                self._error = exc
            self._stop = True
            self._barrier.abort()

    def _collect_epoch_stats(self):
        if self.record_epoch_stats:
            self.epoch_stats.append(list(self._pending_epoch_stats))
            self._pending_epoch_stats = [None] * self.config.num_threads

    def run(self) -> RunReport:
        if self._started:
            raise RuntimeError("engine instances are single-run")
        self._started = True
        cfg = self.config

        if self.model.init is not None:
            # Init runs single-threaded in object order so seq numbers (and
            # therefore tie-breaking of equal initial timestamps) are
            # deterministic across thread counts.
            init_ctx = self.contexts[0]
            init_ctx.in_init = True
            try:
                for obj in range(self.num_objects):
                    init_ctx.current_object = obj
                    self.model.init(obj, init_ctx)
            finally:
                init_ctx.current_object = None
                init_ctx.in_init = False

        start = time.monotonic()
        if cfg.wall_clock_limit is not None:
            self._deadline = start + cfg.wall_clock_limit

        if cfg.end_time > 0 and self.pool.total_pending() > 0:
            def action():
                self._collect_epoch_stats()
                self._epoch_action()

            self._barrier = threading.Barrier(cfg.num_threads, action=action)
            threads = [threading.Thread(target=self._worker, args=(wid,),
                                        name=f"epochsim-w{wid}", daemon=True)
                       for wid in range(cfg.num_threads)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            if self._error is not None:
                raise self._error

        elapsed = time.monotonic() - start
        if self.trace is not None:
            for buf in self._trace_buffers:
                self.trace.entries.extend(buf)
            self.trace.entries.sort(key=lambda e: e.order)
        num_nodes = self.topology.num_nodes
        local = [sum(self._acq_local[w][n] for w in range(cfg.num_threads))
                 for n in range(num_nodes)]
        stolen = [sum(self._acq_stolen[w][n] for w in range(cfg.num_threads))
                  for n in range(num_nodes)]
        report = RunReport(
            events_processed=sum(self._per_thread_events),
            epochs_completed=self._epochs_completed,
            wall_clock_seconds=elapsed,
            per_thread_events=list(self._per_thread_events),
            per_node_local_acquisitions=local,
            per_node_stolen_acquisitions=stolen,
            events_dropped_at_end=sum(self._dropped_by),
            timestamp_sum=sum(self._per_thread_ts_sum),
        )
        return report.validate()


def run(config, binding, **kwargs):
    """Configure, run and report in one call."""
    return Engine(config, binding, **kwargs).run()
