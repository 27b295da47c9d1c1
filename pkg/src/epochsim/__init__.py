"""Conservative epoch-synchronized parallel discrete event simulation.

Public surface: EngineConfig / Engine / run for arbitrary models,
PholdConfig / PholdModel for the benchmark, sequential_oracle and
verify_trace for checking runs, and run_phold which picks the compiled
core when it is available and applicable.
"""

from .config import EngineConfig, RunReport
from .engine import Engine, run
from .errors import (AllocatorError, CausalityError, ConfigError,
                     LookaheadViolation)
from .model import ModelBinding, WorkerContext
from .oracle import sequential_oracle
from .phold import PholdConfig, PholdModel
from .timebase import epoch_of
from .verify import verify_trace

try:
    from . import _core
    HAVE_COMPILED = True
except ImportError:  # pure-Python fallback only
    _core = None
    HAVE_COMPILED = False


def run_phold(engine_config, phold_config, backend="auto", trace=False,
              **kwargs):
    """Run the PHOLD benchmark on the fastest applicable backend.

    The compiled core carries the benchmark model inside the hot loop, so
    it cannot capture traces or host instrumentation hooks; any such
    request (or backend="python") routes to the pure-Python engine.
    """
    want_compiled = backend == "compiled" or (
        backend == "auto" and HAVE_COMPILED and not trace and not kwargs)
    if want_compiled:
        if not HAVE_COMPILED:
            raise RuntimeError("compiled core is not built")
        return _core.run_phold(engine_config, phold_config)
    model = PholdModel(phold_config)
    eng = Engine(engine_config, model.binding(), trace=trace, **kwargs)
    report = eng.run()
    return report if not trace else (report, eng.trace)


__all__ = [
    "EngineConfig", "RunReport", "Engine", "run", "run_phold",
    "ModelBinding", "WorkerContext", "PholdConfig", "PholdModel",
    "sequential_oracle", "verify_trace", "epoch_of",
    "LookaheadViolation", "CausalityError", "AllocatorError", "ConfigError",
    "HAVE_COMPILED",
]
