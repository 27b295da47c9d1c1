"""Extended PHOLD: list-structured state, per-event touch and reallocation.

Each object's state is two singly-linked chains of chunks, one from the
32-byte class and one from the 64-byte class, together holding S nodes
(next pointer in the first 8 bytes, payload after).  Processing an event
walks ceil(S/32) nodes from a rotating cursor, reading and rewriting a
payload byte per node, frees and re-allocates the last ceil(P*S) nodes
visited, and schedules exactly one successor event: uniform destination,
timestamp now + L + Exp(TA - L), so the increment mean is TA while the
lookahead bound holds with certainty.
"""

import math
from dataclasses import dataclass

from .errors import ConfigError
from .model import ModelBinding

NEXT_BYTES = 8
_NULL = 0


@dataclass
class PholdConfig:
    objects: int = 64
    initial_events: int = 10         # M
    state_size: int = 32             # S, list nodes per object
    realloc_fraction: float = 0.001  # P
    lookahead: float = 0.1           # L
    mean_increment: float = 1.0      # TA
    touch_divisor: int = 32          # ceil(S / divisor) nodes touched per event
    inject_at_zero: bool = False     # initial events at t=0 instead of drawn

    def __post_init__(self):
        if self.objects < 1 or self.initial_events < 0 or self.state_size < 2:
            raise ConfigError("objects >= 1, M >= 0 and S >= 2 required")
        if self.lookahead <= 0:
            raise ConfigError("lookahead must be > 0")
        if self.mean_increment < self.lookahead:
            raise ConfigError("mean increment TA must be >= lookahead L")
        if not 0.0 <= self.realloc_fraction <= 1.0:
            raise ConfigError("realloc fraction must be in [0, 1]")

    @property
    def touch_count(self):
        return -(-self.state_size // self.touch_divisor)

    @property
    def realloc_count(self):
        return math.ceil(self.realloc_fraction * self.state_size)


def draw_increment(rng, cfg):
    """Timestamp increment: L plus an exponential with mean TA - L."""
    return cfg.lookahead + rng.exponential(cfg.mean_increment - cfg.lookahead)


class _ObjectState:
    __slots__ = ("heads", "tails", "counts", "cursor", "cursor_prev",
                 "cursor_list")

    def __init__(self):
        self.heads = [_NULL, _NULL]   # [32-byte chain, 64-byte chain]
        self.tails = [_NULL, _NULL]
        self.counts = [0, 0]
        self.cursor = _NULL
        self.cursor_prev = _NULL
        self.cursor_list = 0


class PholdModel:
    """One instance per run; holds the per-object chain bookkeeping."""

    CLASS_SIZES = (32, 64)

    def __init__(self, cfg: PholdConfig):
        self.cfg = cfg
        self.states = [None] * cfg.objects

    def binding(self):
        return ModelBinding(object_count=self.cfg.objects,
                            process_event=self.handle, init=self.init)

    # -- chain plumbing -------------------------------------------------------

    def _read_next(self, ctx, handle):
        return int.from_bytes(ctx.mem_read(handle, 0, NEXT_BYTES), "little")

    def _write_next(self, ctx, handle, nxt):
        ctx.mem_write(handle, 0, nxt.to_bytes(NEXT_BYTES, "little"))

    def _append_node(self, ctx, st, which):
        handle = ctx.alloc(self.CLASS_SIZES[which])
        self._write_next(ctx, handle, _NULL)
        if st.heads[which] == _NULL:
            st.heads[which] = handle
        else:
            self._write_next(ctx, st.tails[which], handle)
        st.tails[which] = handle
        st.counts[which] += 1
        return handle

    # -- callbacks ------------------------------------------------------------

    def init(self, obj, ctx):
        cfg = self.cfg
        st = _ObjectState()
        self.states[obj] = st
        n32 = (cfg.state_size + 1) // 2  # odd remainder to the 32-byte list
        for _ in range(n32):
            self._append_node(ctx, st, 0)
        for _ in range(cfg.state_size - n32):
            self._append_node(ctx, st, 1)
        st.cursor = st.heads[0]
        st.cursor_prev = _NULL
        st.cursor_list = 0

        rng = ctx.engine.rng_for(obj)
        for _ in range(cfg.initial_events):
            ts = 0.0 if cfg.inject_at_zero else draw_increment(rng, cfg)
            ctx.schedule(obj, ts)

    def handle(self, obj, now, payload, ctx):
        cfg = self.cfg
        st = self.states[obj]
        visited = self._touch(ctx, st, cfg.touch_count)
        if cfg.realloc_count:
            self._realloc(ctx, st, visited[-cfg.realloc_count:])
        rng = ctx.engine.rng_for(obj)
        ts = now + draw_increment(rng, cfg)
        dest = rng.randrange(cfg.objects)
        ctx.schedule(dest, ts)

    # -- per-event state work ---------------------------------------------------

    def _touch(self, ctx, st, count):
        """Walk the chains from the cursor, mutating one payload byte each.

        Returns the visited (list_index, prev, handle) triples; the cursor
        advances so successive events cover the whole state round-robin.
        """
        visited = []
        li, prev, cur = st.cursor_list, st.cursor_prev, st.cursor
        for _ in range(count):
            if cur == _NULL:  # wrapped past a chain end
                li = 1 - li if st.heads[1 - li] != _NULL else li
                prev, cur = _NULL, st.heads[li]
            b = ctx.mem_read(cur, NEXT_BYTES, 1)[0]
            ctx.mem_write(cur, NEXT_BYTES, bytes(((b + 1) & 0xFF,)))
            visited.append((li, prev, cur))
            prev, cur = cur, self._read_next(ctx, cur)
        st.cursor_list, st.cursor_prev, st.cursor = li, prev, cur
        return visited

    def _realloc(self, ctx, st, victims):
        """Free and re-allocate the given nodes, preserving chain layout.

        The stack allocator normally hands the same chunk straight back, but
        the relink below stays correct if it ever does not (e.g. after a
        growth interleaves).
        """
        renamed = {}
        for li, prev, handle in victims:
            prev = renamed.get(prev, prev)
            handle_now = renamed.get(handle, handle)
            size = self.CLASS_SIZES[li]
            content = ctx.mem_read(handle_now, 0, size)
            ctx.free(handle_now)
            fresh = ctx.alloc(size)
            ctx.mem_write(fresh, 0, content)
            if fresh != handle_now:
                renamed[handle] = fresh
                if prev == _NULL:
                    st.heads[li] = fresh
                else:
                    self._write_next(ctx, prev, fresh)
                if st.tails[li] == handle_now:
                    st.tails[li] = fresh
                if st.cursor == handle_now:
                    st.cursor = fresh
                if st.cursor_prev == handle_now:
                    st.cursor_prev = fresh

    def total_nodes(self, obj):
        st = self.states[obj]
        return st.counts[0] + st.counts[1]
