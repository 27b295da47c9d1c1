from epochsim.config import EngineConfig
from epochsim.engine import Engine, TraceEntry
from epochsim.phold import PholdConfig, PholdModel
from epochsim.verify import verify_trace


def _entry(obj, ts, order, epoch, seq=0, worker=0):
    return TraceEntry(obj, ts, seq, order, worker, epoch)


def test_accepts_real_engine_trace():
    pc = PholdConfig(objects=8, initial_events=2, state_size=8,
                     realloc_fraction=0.25, lookahead=1.0, mean_increment=2.0)
    ec = EngineConfig(num_threads=2, lookahead=1.0, end_time=25.0,
                      rng_seed=5, pin=False)
    engine = Engine(ec, PholdModel(pc).binding(), trace=True)
    engine.run()
    verdict = verify_trace(engine.trace.entries, ec.epoch_width, ec.lookahead,
                           engine.trace.schedule_log)
    assert verdict, verdict.reason


def test_accepts_empty_trace():
    assert verify_trace([], 1.0, 1.0)


def test_rejects_duplicate_order():
    entries = [_entry(0, 0.5, 0, 0), _entry(0, 1.5, 0, 1)]
    v = verify_trace(entries, 1.0, 1.0)
    assert not v and "order" in v.reason


def test_rejects_per_object_time_regression():
    entries = [_entry(0, 1.5, 0, 1, seq=0), _entry(0, 1.2, 1, 1, seq=1)]
    v = verify_trace(entries, 1.0, 1.0)
    assert not v and "object 0" in v.reason


def test_allows_cross_object_time_overlap_within_epoch():
    entries = [_entry(0, 1.9, 0, 1), _entry(1, 1.1, 1, 1)]
    assert verify_trace(entries, 1.0, 1.0)


def test_rejects_wrong_epoch_tag():
    entries = [_entry(0, 2.5, 0, 1)]  # timestamp 2.5 lies in epoch 2
    v = verify_trace(entries, 1.0, 1.0)
    assert not v and "epoch" in v.reason


def test_rejects_epoch_order_inversion():
    entries = [_entry(0, 2.5, 0, 2), _entry(1, 1.5, 1, 1)]
    v = verify_trace(entries, 1.0, 1.0)
    assert not v


def test_rejects_lookahead_violation_in_schedule_log():
    log = [(0, 5.0, 1, 5.4)]  # distance 0.4 < L = 1.0
    v = verify_trace([], 1.0, 1.0, log)
    assert not v and "lookahead" in v.reason


def test_schedule_log_tolerates_float_rounding():
    parent = 1e6 + 0.1
    child = parent + 1.0 - 1e-12  # one rounding step inside the slack
    assert verify_trace([], 1.0, 1.0, [(0, parent, 1, child)])
