from collections import Counter

import pytest

from epochsim.config import EngineConfig, RunReport
from epochsim.engine import Engine
from epochsim.errors import ConfigError, LookaheadViolation
from epochsim.model import ModelBinding
from epochsim.phold import PholdConfig, PholdModel


def _phold(objects=8, initial_events=2, **kw):
    kw.setdefault("state_size", 8)
    kw.setdefault("realloc_fraction", 0.25)
    kw.setdefault("lookahead", 1.0)
    kw.setdefault("mean_increment", 2.0)
    return PholdConfig(objects=objects, initial_events=initial_events, **kw)


def _cfg(**kw):
    kw.setdefault("num_threads", 1)
    kw.setdefault("lookahead", 1.0)
    kw.setdefault("end_time", 25.0)
    kw.setdefault("rng_seed", 7)
    kw.setdefault("pin", False)
    return EngineConfig(**kw)


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(epoch_width=2.0)  # wider than lookahead
    with pytest.raises(ConfigError):
        _cfg(calendar_depth=1)
    with pytest.raises(ConfigError):
        _cfg(num_threads=0)
    with pytest.raises(ConfigError):
        _cfg(lookahead=0.0)
    assert _cfg(epoch_width=0.5).epoch_width == 0.5
    assert _cfg().epoch_width == 1.0  # defaults to the lookahead


def test_report_shape_and_validation():
    model = PholdModel(_phold())
    report = Engine(_cfg(), model.binding()).run()
    assert isinstance(report, RunReport)
    assert report.events_processed == sum(report.per_thread_events)
    assert report.epochs_completed > 0
    assert report.throughput > 0
    assert report.timestamp_sum > 0


def test_empty_run_terminates_immediately():
    model = PholdModel(_phold(initial_events=0))
    report = Engine(_cfg(), model.binding()).run()
    assert report.events_processed == 0
    assert report.epochs_completed == 0


def test_end_time_zero_processes_nothing():
    model = PholdModel(_phold())
    report = Engine(_cfg(end_time=0.0), model.binding()).run()
    assert report.events_processed == 0


def test_events_never_processed_at_or_after_end_time():
    model = PholdModel(_phold())
    engine = Engine(_cfg(end_time=10.0), model.binding(), trace=True)
    engine.run()
    assert all(e.timestamp < 10.0 for e in engine.trace.entries)


def test_deterministic_across_thread_counts():
    results = []
    for threads in (1, 2, 4, 8):
        model = PholdModel(_phold(objects=16))
        engine = Engine(_cfg(num_threads=threads), model.binding(),
                        trace=True)
        report = engine.run()
        multiset = Counter((e.obj, e.timestamp) for e in engine.trace.entries)
        results.append((report.events_processed, report.timestamp_sum,
                        multiset))
    first = results[0]
    for other in results[1:]:
        assert other[0] == first[0]
        assert other[1] == pytest.approx(first[1], rel=1e-12)
        assert other[2] == first[2]


def test_deterministic_across_emulated_layouts():
    baseline = None
    for nodes in (None, 2, 4):
        model = PholdModel(_phold(objects=12))
        engine = Engine(_cfg(num_threads=2, emulate_nodes=nodes),
                        model.binding(), trace=True)
        engine.run()
        multiset = Counter((e.obj, e.timestamp) for e in engine.trace.entries)
        if baseline is None:
            baseline = multiset
        else:
            assert multiset == baseline


def test_acquisitions_split_local_vs_stolen():
    model = PholdModel(_phold(objects=8))
    engine = Engine(_cfg(num_threads=1, emulate_nodes=2), model.binding())
    report = engine.run()
    # the lone worker lives on node 0: everything from node 1 is stolen
    assert report.per_node_local_acquisitions[1] == 0
    assert report.per_node_stolen_acquisitions[0] == 0
    assert report.per_node_stolen_acquisitions[1] > 0
    total = (sum(report.per_node_local_acquisitions)
             + sum(report.per_node_stolen_acquisitions))
    assert total == report.epochs_completed * 8  # every object, every epoch


def test_lookahead_violation_aborts_the_run():
    def bad_handler(obj, now, payload, ctx):
        ctx.schedule(obj, now + 0.25)

    binding = ModelBinding(object_count=2, process_event=bad_handler)
    engine = Engine(_cfg(), binding)
    engine.inject_initial(0, 1.5, b"")
    with pytest.raises(LookaheadViolation):
        engine.run()


def test_wall_clock_limit_stops_the_run():
    model = PholdModel(_phold(objects=8))
    cfg = _cfg(end_time=1e18, wall_clock_limit=0.3)
    report = Engine(cfg, model.binding()).run()
    assert report.wall_clock_seconds < 5.0


def test_engine_is_single_run():
    model = PholdModel(_phold())
    engine = Engine(_cfg(), model.binding())
    engine.run()
    with pytest.raises(RuntimeError):
        engine.run()


def test_rollover_hook_sees_every_epoch():
    epochs = []
    model = PholdModel(_phold())
    engine = Engine(_cfg(), model.binding(),
                    rollover_hook=lambda e: epochs.append(e.pool.base_epoch))
    report = engine.run()
    assert len(epochs) == report.epochs_completed
    assert epochs == sorted(epochs)


def test_epoch_stats_recording():
    model = PholdModel(_phold(objects=6))
    engine = Engine(_cfg(num_threads=2), model.binding(),
                    record_epoch_stats=True)
    report = engine.run()
    assert len(engine.epoch_stats) == report.epochs_completed
    for per_worker in engine.epoch_stats:
        assert len(per_worker) == 2
        acquired = sum(s.local_hits + s.remote_steals for s in per_worker)
        assert acquired == 6  # every object acquired exactly once per epoch
