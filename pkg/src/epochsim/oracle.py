"""Single-threaded reference executor.

Runs the identical model with one global priority queue in strict global
(timestamp, seq) order.  Uses the same per-object random streams and its own
allocator set, so a correct parallel run must produce exactly the same
multiset of processed (object, timestamp) pairs and the same per-object
processing order.
"""

import heapq
import itertools

from . import alloc, topology
from .engine import TraceEntry
from .errors import LookaheadViolation
from .rng import stream_for
from .timebase import check_time, epoch_of


class _OracleContext:
    """Duck-typed WorkerContext for the reference run."""

    def __init__(self, runner):
        self.runner = runner
        self.engine = self  # model code reaches rng via ctx.engine.rng_for
        self.worker_id = 0
        self.local_node = 0
        self.current_object = None
        self.now = None
        self.in_init = False

    def rng_for(self, obj):
        return self.runner.rngs[obj]

    def schedule(self, dest, ts, payload=b""):
        r = self.runner
        ts = check_time(ts, "timestamp")
        if not 0 <= dest < r.num_objects:
            raise ValueError(f"destination {dest} outside [0, {r.num_objects})")
        if not self.in_init and ts < self.now + r.lookahead:
            raise LookaheadViolation(
                f"object {self.current_object} at t={self.now} scheduled "
                f"t={ts} closer than lookahead {r.lookahead}")
        heapq.heappush(r.queue, (ts, next(r.seq), dest, bytes(payload)))

    def alloc(self, size):
        return self.runner.allocators[self.current_object].alloc(size)

    def free(self, handle):
        self.runner.allocators[self.current_object].free(handle)

    def mem_read(self, handle, offset, length):
        return self.runner.allocators[self.current_object].read(
            handle, offset, length)

    def mem_write(self, handle, offset, data):
        self.runner.allocators[self.current_object].write(handle, offset, data)

    def rng(self):
        return self.runner.rngs[self.current_object]


class SequentialOracle:
    def __init__(self, config, binding):
        self.config = config
        self.num_objects = binding.object_count
        self.lookahead = config.lookahead
        self.binding = binding
        topo = topology.TopologyDescriptor(1, ((0,),), "emulated")
        parts = topology.partition_objects(self.num_objects, topo)
        self.allocators = alloc.setup_allocators(parts)
        self.rngs = [stream_for(config.rng_seed, obj)
                     for obj in range(self.num_objects)]
        self.queue = []
        self.seq = itertools.count()

    def run(self):
        """Process everything before end_time; returns the ordered trace."""
        cfg = self.config
        ctx = _OracleContext(self)
        if self.binding.init is not None:
            ctx.in_init = True
            for obj in range(self.num_objects):
                ctx.current_object = obj
                self.binding.init(obj, ctx)
            ctx.current_object = None
            ctx.in_init = False

        trace = []
        order = 0
        while self.queue:
            ts, seq, dest, payload = heapq.heappop(self.queue)
            if ts >= cfg.end_time:
                continue  # half-open horizon, same rule as the engine
            ctx.current_object = dest
            ctx.now = ts
            self.binding.process_event(dest, ts, payload, ctx)
            ctx.current_object = None
            ctx.now = None
            trace.append(TraceEntry(dest, ts, seq, order, 0,
                                    epoch_of(ts, cfg.epoch_width)))
            order += 1
        return trace


def sequential_oracle(config, binding):
    return SequentialOracle(config, binding).run()
