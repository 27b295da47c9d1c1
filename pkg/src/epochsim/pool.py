"""The pending-event set.

One calendar per object, each a circular array of N epoch buckets, plus one
fallback list per worker for events landing beyond the calendar's N*W
horizon.  Inserts into a bucket are serialized by that bucket's lock;
extraction of the current epoch's bucket never takes a lock, because object
ownership within an epoch is exclusive (work distribution) and every
concurrent insert targets a strictly later epoch (lookahead).

Instrumentation counters record every lock acquisition and counter
reservation, tagged with whether the caller was inside an extraction, so
tests can assert the hot path really is lock- and RMW-free.
"""

import threading
from dataclasses import dataclass, field

from .errors import LookaheadViolation
from .timebase import epoch_of

CALENDAR = "calendar"
FALLBACK = "fallback"


@dataclass(frozen=True)
class EventRecord:
    dest: int
    timestamp: float
    payload: bytes
    seq: int
    emit_epoch: int = 0

    def sort_key(self):
        return (self.timestamp, self.seq)


@dataclass
class PoolStats:
    lock_acquisitions: int = 0
    rmw_ops: int = 0
    extract_calls: int = 0
    extract_lock_acquisitions: int = 0
    extract_rmw_ops: int = 0
    calendar_inserts: int = 0
    fallback_inserts: int = 0
    events_extracted: int = 0
    fallback_drained: int = 0


class _Bucket:
    # In the compiled core each bucket's spinlock is padded to its own
    # cache line; Python lock objects are already distinct heap objects.
    __slots__ = ("lock", "events")

    def __init__(self):
        self.lock = threading.Lock()
        self.events = []


class EventPool:
    def __init__(self, num_objects, depth, epoch_width, num_workers):
        assert depth >= 2
        self.num_objects = num_objects
        self.depth = depth
        self.epoch_width = epoch_width
        self.base_epoch = 0  # epoch currently mapped to its own slot; == current epoch
        self.calendars = [[_Bucket() for _ in range(depth)]
                          for _ in range(num_objects)]
        self.fallback = [[] for _ in range(num_workers)]
        self.stats = PoolStats()
        self._tl = threading.local()

    # -- instrumented primitives -------------------------------------------

    def _acquire(self, lock):
        st = self.stats
        st.lock_acquisitions += 1
        st.rmw_ops += 1  # lock take implies one RMW
        if getattr(self._tl, "in_extract", False):
            st.extract_lock_acquisitions += 1
            st.extract_rmw_ops += 1
        lock.acquire()

    # -- operations ---------------------------------------------------------

    def insert(self, event, worker_id):
        """Route an event to its calendar bucket or the worker's fallback list.

        Returns CALENDAR or FALLBACK. Rejects events that fall into the
        current (or an earlier) epoch: those would break the epoch-safety
        argument and indicate a lookahead-contract violation upstream.
        """
        ep = epoch_of(event.timestamp, self.epoch_width)
        if ep <= self.base_epoch:
            raise LookaheadViolation(
                f"event for object {event.dest} at t={event.timestamp} lands "
                f"in epoch {ep} but epoch {self.base_epoch} is current")
        if ep < self.base_epoch + self.depth:
            bucket = self.calendars[event.dest][ep % self.depth]
            self._acquire(bucket.lock)
            try:
                bucket.events.append(event)
            finally:
                bucket.lock.release()
            self.stats.calendar_inserts += 1
            return CALENDAR
        self.fallback[worker_id].append(event)
        self.stats.fallback_inserts += 1
        return FALLBACK

    def insert_initial(self, event, worker_id=0):
        """Pre-run injection: no current epoch yet, so no lookahead gate."""
        ep = epoch_of(event.timestamp, self.epoch_width)
        if ep < self.base_epoch + self.depth:
            self.calendars[event.dest][ep % self.depth].events.append(event)
            self.stats.calendar_inserts += 1
            return CALENDAR
        self.fallback[worker_id].append(event)
        self.stats.fallback_inserts += 1
        return FALLBACK

    def extract_epoch_batch(self, obj):
        """Remove and return all current-epoch events of obj, (ts, seq)-sorted.

        Lock-free by construction: only the owning worker touches this
        bucket this epoch, and concurrent inserts target future epochs.
        """
        self.stats.extract_calls += 1
        self._tl.in_extract = True
        try:
            bucket = self.calendars[obj][self.base_epoch % self.depth]
            events = bucket.events
            if not events:
                return []
            bucket.events = []
            events.sort(key=EventRecord.sort_key)
            self.stats.events_extracted += len(events)
            return events
        finally:
            self._tl.in_extract = False

    def rollover(self):
        """Advance the horizon by one epoch (barrier window only).

        The departing slot must be empty for every object -- a non-empty
        slot is an engine bug, not a model error.
        """
        slot = self.base_epoch % self.depth
        for obj in range(self.num_objects):
            bucket = self.calendars[obj][slot]
            assert not bucket.events, (
                f"object {obj} still has {len(bucket.events)} events in the "
                f"departing epoch {self.base_epoch}")
        self.base_epoch += 1

    def drain_fallback(self, worker_id):
        """Move the worker's now-maintainable fallback events into the calendar.

        Called by each worker on its own list after a rollover; events whose
        epoch is still beyond the horizon stay. Returns the number moved.
        """
        src = self.fallback[worker_id]
        if not src:
            return 0
        horizon = self.base_epoch + self.depth
        keep, moved = [], 0
        for event in src:
            if epoch_of(event.timestamp, self.epoch_width) < horizon:
                self.stats.fallback_inserts -= 1  # re-counted by insert()
                self.insert(event, worker_id)
                moved += 1
            else:
                keep.append(event)
        self.fallback[worker_id] = keep
        self.stats.fallback_drained += moved
        return moved

    def total_pending(self):
        """Event count across all buckets and fallback lists (quiescent only)."""
        n = sum(len(b.events) for cal in self.calendars for b in cal)
        return n + sum(len(fl) for fl in self.fallback)
