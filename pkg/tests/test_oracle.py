from collections import Counter, defaultdict

from epochsim.config import EngineConfig
from epochsim.engine import Engine
from epochsim.oracle import sequential_oracle
from epochsim.phold import PholdConfig, PholdModel


def _configs(**kw):
    kw.setdefault("objects", 10)
    kw.setdefault("initial_events", 2)
    kw.setdefault("state_size", 8)
    kw.setdefault("realloc_fraction", 0.25)
    kw.setdefault("lookahead", 1.0)
    kw.setdefault("mean_increment", 2.0)
    threads = kw.pop("num_threads", 2)
    end_time = kw.pop("end_time", 30.0)
    seed = kw.pop("rng_seed", 4242)
    pc = PholdConfig(**kw)
    ec = EngineConfig(num_threads=threads, lookahead=pc.lookahead,
                      end_time=end_time, rng_seed=seed, pin=False)
    return ec, pc


def _engine_trace(ec, pc):
    engine = Engine(ec, PholdModel(pc).binding(), trace=True)
    engine.run()
    return engine.trace.entries


def _oracle_trace(ec, pc):
    return sequential_oracle(ec, PholdModel(pc).binding())


def test_oracle_is_deterministic():
    ec, pc = _configs()
    a = _oracle_trace(ec, pc)
    b = _oracle_trace(ec, pc)
    assert [(e.obj, e.timestamp) for e in a] == [(e.obj, e.timestamp) for e in b]


def test_oracle_orders_globally_by_timestamp():
    ec, pc = _configs()
    trace = _oracle_trace(ec, pc)
    ts = [e.timestamp for e in trace]
    assert ts == sorted(ts)


def test_engine_matches_oracle_multiset():
    for seed in (1, 2, 3):
        ec, pc = _configs(rng_seed=seed)
        engine_trace = _engine_trace(ec, pc)
        oracle_trace = _oracle_trace(ec, pc)
        assert (Counter((e.obj, e.timestamp) for e in engine_trace)
                == Counter((e.obj, e.timestamp) for e in oracle_trace))


def test_engine_matches_oracle_per_object_order():
    ec, pc = _configs(num_threads=4, objects=12)
    engine_trace = sorted(_engine_trace(ec, pc), key=lambda e: e.order)
    oracle_trace = _oracle_trace(ec, pc)
    by_obj_engine = defaultdict(list)
    by_obj_oracle = defaultdict(list)
    for e in engine_trace:
        by_obj_engine[e.obj].append(e.timestamp)
    for e in oracle_trace:
        by_obj_oracle[e.obj].append(e.timestamp)
    assert by_obj_engine == by_obj_oracle


def test_oracle_respects_end_time():
    ec, pc = _configs(end_time=5.0)
    assert all(e.timestamp < 5.0 for e in _oracle_trace(ec, pc))


def test_match_holds_across_epoch_widths():
    for width in (1.0, 0.5, 0.25):
        ec, pc = _configs()
        ec = EngineConfig(num_threads=2, lookahead=1.0, epoch_width=width,
                          end_time=20.0, rng_seed=11, pin=False)
        engine_trace = _engine_trace(ec, pc)
        oracle_trace = _oracle_trace(ec, pc)
        assert (Counter((e.obj, e.timestamp) for e in engine_trace)
                == Counter((e.obj, e.timestamp) for e in oracle_trace))
