"""Trace-level verification of the engine's ordering guarantees.

Four checks over a complete run trace:
  (a) per-object timestamps are non-decreasing in processing order;
  (b) each entry's recorded epoch matches its timestamp's epoch;
  (c) no entry of epoch i+1 precedes, in processing order, an entry of
      epoch i (barrier safety);
  (d) every scheduled event is at least one lookahead ahead of its parent
      (checked over the schedule log, when one was captured).
"""

from dataclasses import dataclass

from .timebase import epoch_of


@dataclass
class Verdict:
    ok: bool
    reason: str = ""

    def __bool__(self):
        return self.ok


def verify_trace(entries, epoch_width, lookahead, schedule_log=None):
    """Check a processing trace; returns a Verdict naming the first violation."""
    orders = [e.order for e in entries]
    if sorted(orders) != list(range(len(entries))):
        return Verdict(False, "processing order indices are not dense and unique")
    ordered = sorted(entries, key=lambda e: e.order)

    last_ts = {}
    max_epoch_seen = -1
    for e in ordered:
        prev = last_ts.get(e.obj)
        if prev is not None and e.timestamp < prev:
            return Verdict(False,
                           f"object {e.obj}: t={e.timestamp} processed after "
                           f"t={prev} (order {e.order})")
        last_ts[e.obj] = e.timestamp

        actual = epoch_of(e.timestamp, epoch_width)
        if actual != e.epoch:
            return Verdict(False,
                           f"entry at order {e.order}: recorded epoch "
                           f"{e.epoch}, timestamp implies {actual}")

        if e.epoch < max_epoch_seen:
            return Verdict(False,
                           f"entry of epoch {e.epoch} at order {e.order} "
                           f"after an entry of epoch {max_epoch_seen}")
        max_epoch_seen = max(max_epoch_seen, e.epoch)

    if schedule_log is not None:
        for parent_obj, parent_ts, dest, child_ts in schedule_log:
            # one-ulp slack: child - parent re-rounds the engine's exact
            # now + increment comparison
            slack = 1e-9 * max(1.0, abs(parent_ts))
            if child_ts - parent_ts < lookahead - slack:
                return Verdict(False,
                               f"object {parent_obj} at t={parent_ts} "
                               f"scheduled t={child_ts} for {dest}: distance "
                               f"below lookahead {lookahead}")
    return Verdict(True, "trace passes all checks")
