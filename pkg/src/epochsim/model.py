"""Application-facing contract: model registration, scheduling, dispatch.

A model supplies two callbacks: init(obj, ctx), run once per object before
the first epoch, and process_event(obj, now, payload, ctx), invoked for
every event.  All interaction with the engine goes through the WorkerContext
passed in: schedule(), alloc()/free(), chunk read/write and the per-object
random stream.
"""

from dataclasses import dataclass

from .errors import CausalityError, LookaheadViolation
from .timebase import check_time


@dataclass
class ModelBinding:
    object_count: int
    process_event: callable
    init: callable = None


class WorkerContext:
    """Per-worker view of the engine services, valid inside callbacks.

    current_object tracks which object's callback is running, which is what
    routes allocation requests to the right per-object arena.
    """

    __slots__ = ("worker_id", "local_node", "engine", "current_object", "now",
                 "in_init")

    def __init__(self, worker_id, local_node, engine):
        self.worker_id = worker_id
        self.local_node = local_node
        self.engine = engine
        self.current_object = None
        self.now = None
        self.in_init = False

    # -- model services ------------------------------------------------------

    def schedule(self, dest, ts, payload=b""):
        """Schedule a new event; ts must respect the model lookahead."""
        eng = self.engine
        ts = check_time(ts, "timestamp")
        if not 0 <= dest < eng.num_objects:
            raise ValueError(f"destination {dest} outside [0, {eng.num_objects})")
        if self.in_init:
            return eng.inject_initial(dest, ts, payload, self.worker_id)
        if self.now is None:
            raise RuntimeError("schedule() is only valid inside a callback")
        if ts < self.now + eng.lookahead:
            raise LookaheadViolation(
                f"object {self.current_object} at t={self.now} scheduled an "
                f"event at t={ts}, closer than the lookahead {eng.lookahead}")
        return eng.schedule(self, dest, ts, payload)

    def alloc(self, size):
        return self._allocator().alloc(size)

    def free(self, handle):
        self._allocator().free(handle)

    def mem_read(self, handle, offset, length):
        return self._allocator().read(handle, offset, length)

    def mem_write(self, handle, offset, data):
        self._allocator().write(handle, offset, data)

    def rng(self):
        return self.engine.rng_for(self.current_object)

    def _allocator(self):
        if self.current_object is None:
            raise RuntimeError("no object callback is active on this worker")
        return self.engine.allocators[self.current_object]


def dispatch(ctx, event):
    """Run the model callback for one extracted event.

    Sets up the current-object context, enforces the per-object watermark
    when causality checking is on, and records the trace entry.
    """
    eng = ctx.engine
    obj = event.dest
    if eng.causality_check:
        last = eng.watermarks[obj]
        if event.timestamp < last:
            raise CausalityError(
                f"object {obj}: event at t={event.timestamp} after watermark "
                f"t={last}")
        eng.watermarks[obj] = event.timestamp
    ctx.current_object = obj
    ctx.now = event.timestamp
    try:
        eng.model.process_event(obj, event.timestamp, event.payload, ctx)
    finally:
        ctx.current_object = None
        ctx.now = None
    eng.note_processed(ctx, event)
