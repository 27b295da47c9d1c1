import pytest

import epochsim
from epochsim import run_phold
from epochsim.config import EngineConfig
from epochsim.phold import PholdConfig

pytestmark = pytest.mark.skipif(not epochsim.HAVE_COMPILED,
                                reason="compiled core not built")


def _configs(threads=1, seed=42, end_time=40.0, **pc_kw):
    pc_kw.setdefault("objects", 8)
    pc_kw.setdefault("initial_events", 3)
    pc_kw.setdefault("state_size", 12)
    pc_kw.setdefault("realloc_fraction", 0.25)
    pc_kw.setdefault("lookahead", 1.0)
    pc_kw.setdefault("mean_increment", 2.0)
    pc = PholdConfig(**pc_kw)
    ec = EngineConfig(num_threads=threads, lookahead=pc.lookahead,
                      end_time=end_time, rng_seed=seed, pin=False)
    return ec, pc


def test_parity_with_python_backend():
    """Same seed and workload: both backends process the same events."""
    for seed in (1, 42, 987654321):
        ec, pc = _configs(seed=seed)
        rp = run_phold(ec, pc, backend="python")
        rc = run_phold(ec, pc, backend="compiled")
        assert rc.events_processed == rp.events_processed
        assert rc.epochs_completed == rp.epochs_completed
        assert rc.events_dropped_at_end == rp.events_dropped_at_end
        assert rc.timestamp_sum == pytest.approx(rp.timestamp_sum, rel=1e-12)


def test_parity_with_larger_state():
    ec, pc = _configs(objects=16, state_size=100, realloc_fraction=0.5,
                      end_time=25.0)
    rp = run_phold(ec, pc, backend="python")
    rc = run_phold(ec, pc, backend="compiled")
    assert rc.events_processed == rp.events_processed
    assert rc.timestamp_sum == pytest.approx(rp.timestamp_sum, rel=1e-12)


def test_deterministic_across_thread_counts():
    base = None
    for threads in (1, 2, 4, 8):
        ec, pc = _configs(threads=threads, objects=16)
        r = run_phold(ec, pc, backend="compiled")
        key = (r.events_processed, round(r.timestamp_sum, 6))
        if base is None:
            base = key
        else:
            assert key == base


def test_emulated_nodes_steal_counts():
    ec, pc = _configs()
    ec = EngineConfig(num_threads=1, lookahead=1.0, end_time=20.0,
                      rng_seed=3, pin=False, emulate_nodes=2)
    r = run_phold(ec, pc, backend="compiled")
    assert r.per_node_stolen_acquisitions[0] == 0  # worker 0 is node-0 local
    assert r.per_node_stolen_acquisitions[1] > 0
    assert r.per_node_local_acquisitions[1] == 0


def test_empty_run():
    ec, pc = _configs(initial_events=0)
    r = run_phold(ec, pc, backend="compiled")
    assert r.events_processed == 0
    assert r.epochs_completed == 0


def test_wall_clock_limit():
    ec, pc = _configs()
    ec = EngineConfig(num_threads=1, lookahead=1.0, end_time=1e18,
                      rng_seed=5, pin=False, wall_clock_limit=0.3)
    r = run_phold(ec, pc, backend="compiled")
    assert r.events_processed > 0
    assert r.wall_clock_seconds < 5.0


def test_report_accounting_consistent():
    ec, pc = _configs(threads=2)
    r = run_phold(ec, pc, backend="compiled")
    assert sum(r.per_thread_events) == r.events_processed
    total_acq = (sum(r.per_node_local_acquisitions)
                 + sum(r.per_node_stolen_acquisitions))
    # every object is dispensed exactly once per epoch
    assert total_acq == r.epochs_completed * pc.objects
