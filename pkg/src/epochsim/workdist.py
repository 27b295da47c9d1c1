"""Per-epoch object acquisition: fetch-and-add, local node first, then steal.

The loop mirrors the counter-dispenser algorithm exactly: starting from the
worker's local node, fetch-and-add that node's counter; a returned index
still inside the node's object range is a valid acquisition, otherwise move
to the next node (modulo node count) and try there.  After probing every
node without success the epoch holds no more work for anyone.

There is no critical section anywhere: the only shared mutation is the
fetch-and-add itself, and overshooting a range when several workers race on
an exhausted node is harmless because validity is re-checked from the
returned value.
"""

from dataclasses import dataclass, field

EXHAUSTED = None


@dataclass
class AcquisitionStats:
    local_hits: int = 0
    remote_steals: int = 0
    exhausted_probes: int = 0
    events: int = 0
    local_from: dict = field(default_factory=dict)   # node -> local acquisitions
    stolen_from: dict = field(default_factory=dict)  # node -> acquisitions by remote workers


def acquire_next(local_node, partitions, stats=None):
    """Return the next object id for this worker, or EXHAUSTED.

    Each object id in the partitions is handed to exactly one caller per
    epoch across all workers.
    """
    n = len(partitions)
    i, j = local_node, 0
    while j < n:
        part = partitions[i % n]
        v = part.fetch_and_add()
        if v + part.min_id <= part.max_id:
            if stats is not None:
                node = i % n
                if node == local_node:
                    stats.local_hits += 1
                    stats.local_from[node] = stats.local_from.get(node, 0) + 1
                else:
                    stats.remote_steals += 1
                    stats.stolen_from[node] = stats.stolen_from.get(node, 0) + 1
            return v + part.min_id
        i += 1
        j += 1
        if stats is not None:
            stats.exhausted_probes += 1
    return EXHAUSTED


def process_epoch(ctx, partitions, pool, dispatch_fn):
    """Acquire objects until the epoch is drained, batch-processing each one.

    Batches come out of the pool already (timestamp, seq)-ordered; the
    per-worker context is set around each callback by dispatch_fn.
    """
    stats = AcquisitionStats()
    while True:
        obj = acquire_next(ctx.local_node, partitions, stats)
        if obj is EXHAUSTED:
            return stats
        for event in pool.extract_epoch_batch(obj):
            if dispatch_fn(ctx, event):
                stats.events += 1
