"""Engine configuration and run summary records."""

import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .timebase import check_time


@dataclass
class EngineConfig:
    num_threads: int = 1
    lookahead: float = 1.0          # L, strictly positive
    epoch_width: float = None       # W, defaults to L
    calendar_depth: int = 16        # N buckets per per-object calendar
    end_time: float = 0.0
    rng_seed: int = 1
    emulate_nodes: int = None       # force an emulated node layout
    pin: bool = True
    causality_check: bool = True
    wall_clock_limit: float = None  # optional seconds cap for throughput runs
    max_payload: int = 64

    def __post_init__(self):
        if self.num_threads < 1:
            raise ConfigError("num_threads must be >= 1")
        self.lookahead = check_time(self.lookahead, "lookahead")
        if self.lookahead <= 0.0:
            raise ConfigError("lookahead must be > 0")
        if self.epoch_width is None:
            self.epoch_width = self.lookahead
        self.epoch_width = check_time(self.epoch_width, "epoch_width")
        if not (0.0 < self.epoch_width <= self.lookahead):
            raise ConfigError(
                f"epoch width must satisfy 0 < W <= L "
                f"(W={self.epoch_width}, L={self.lookahead})")
        if self.calendar_depth < 2:
            raise ConfigError("calendar_depth must be >= 2")
        self.end_time = check_time(self.end_time, "end_time")
        if self.pin:
            # One worker per CPU when pinning; unpinned runs may
            # oversubscribe (needed for correctness tests on small boxes).
            try:
                avail = len(os.sched_getaffinity(0))
            except AttributeError:
                avail = os.cpu_count() or 1
            if self.num_threads > avail:
                raise ConfigError(
                    f"num_threads={self.num_threads} exceeds the {avail} "
                    f"available CPUs; pass pin=False to oversubscribe")


@dataclass
class RunReport:
    events_processed: int = 0
    epochs_completed: int = 0
    wall_clock_seconds: float = 0.0
    per_thread_events: list = field(default_factory=list)
    per_node_local_acquisitions: list = field(default_factory=list)
    per_node_stolen_acquisitions: list = field(default_factory=list)
    events_dropped_at_end: int = 0
    timestamp_sum: float = 0.0  # cross-backend checksum

    @property
    def throughput(self):
        if self.wall_clock_seconds <= 0.0:
            return 0.0
        return self.events_processed / self.wall_clock_seconds

    def validate(self):
        assert self.events_processed == sum(self.per_thread_events)
        return self
