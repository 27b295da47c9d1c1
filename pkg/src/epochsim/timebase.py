"""Simulation-time validation and epoch arithmetic.

An epoch of width W is the half-open simulation-time interval
[i*W, (i+1)*W).  Every timestamp belongs to exactly one epoch.
"""

import math

from .errors import ConfigError


def check_time(value, name="time"):
    """Validate a simulation time: finite, non-negative. Returns it as float."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    if value < 0.0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}")
    return value


def epoch_of(t, width):
    """Index i of the epoch containing t, i.e. the unique i with i*width <= t < (i+1)*width."""
    t = check_time(t, "timestamp")
    width = check_time(width, "epoch width")
    if width <= 0.0:
        raise ConfigError(f"epoch width must be > 0, got {width!r}")
    i = int(t // width)
    # Float floor division can be off by one right at a bucket boundary;
    # nudge until the half-open membership holds exactly.
    while (i + 1) * width <= t:
        i += 1
    while i * width > t:
        i -= 1
    return i
