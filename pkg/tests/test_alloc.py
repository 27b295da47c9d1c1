import pytest
from hypothesis import given, settings, strategies as st

from epochsim.alloc import (
    MIN_CHUNK,
    AddressSpace,
    ObjectAllocator,
    default_class_sizes,
    setup_allocators,
)
from epochsim.errors import AllocatorError
from epochsim.topology import NodePartition


def _alloc(classes=(32, 64), chunks=4, obj=0):
    return ObjectAllocator(obj, 0, AddressSpace(), list(classes), chunks)


def test_default_class_sizes_are_powers_of_two_from_min():
    sizes = default_class_sizes(4096)
    assert sizes[0] == MIN_CHUNK == 32
    assert sizes == [32, 64, 128, 256, 512, 1024, 2048, 4096]


def test_alloc_free_is_lifo():
    a = _alloc()
    h1 = a.alloc(32)
    h2 = a.alloc(32)
    a.free(h2)
    a.free(h1)
    assert a.alloc(32) == h1  # last freed comes back first
    assert a.alloc(32) == h2


def test_requests_round_up_to_class():
    a = _alloc(classes=(32, 64, 128))
    h_small = a.alloc(1)
    h_mid = a.alloc(33)
    assert a.areas[0].outstanding() == 1
    assert a.areas[1].outstanding() == 1
    a.free(h_small)
    a.free(h_mid)
    assert a.areas[0].outstanding() == a.areas[1].outstanding() == 0


def test_growth_doubles_capacity():
    a = _alloc(classes=(32,), chunks=4)
    handles = [a.alloc(32) for _ in range(4)]
    assert a.grow_count == 0
    handles.append(a.alloc(32))  # 5th triggers growth
    assert a.grow_count == 1
    assert a.areas[0].count == 8
    handles.extend(a.alloc(32) for _ in range(3))
    assert a.grow_count == 1
    a.alloc(32)
    assert a.grow_count == 2
    assert a.areas[0].count == 16


def test_handles_are_disjoint_and_aligned():
    a = _alloc(classes=(32, 64), chunks=8)
    hs = [a.alloc(32) for _ in range(16)] + [a.alloc(64) for _ in range(16)]
    assert len(set(hs)) == len(hs)
    for h in hs[:16]:
        assert h % 32 == 0
    for h in hs[16:]:
        assert h % 64 == 0


def test_free_foreign_handle_raises():
    space = AddressSpace()
    a = ObjectAllocator(0, 0, space, [32], 4)
    b = ObjectAllocator(1, 0, space, [32], 4)
    h = b.alloc(32)
    with pytest.raises(AllocatorError):
        a.free(h)
    b.free(h)  # still valid for its owner


def test_read_write_roundtrip():
    a = _alloc()
    h = a.alloc(32)
    a.write(h, 0, b"\x01\x02\x03")
    a.write(h, 8, (1234).to_bytes(8, "little"))
    assert a.read(h, 0, 3) == b"\x01\x02\x03"
    assert int.from_bytes(a.read(h, 8, 8), "little") == 1234


def test_chunks_do_not_alias():
    a = _alloc(classes=(32,), chunks=4)
    h1, h2 = a.alloc(32), a.alloc(32)
    a.write(h1, 0, b"\xff" * 32)
    assert a.read(h2, 0, 32) == b"\x00" * 32


def test_oversize_requests_are_served_and_releasable():
    a = _alloc(classes=(32, 64))
    h = a.alloc(10_000)
    a.write(h, 9_000, b"xyz")
    assert a.read(h, 9_000, 3) == b"xyz"
    a.free(h)
    with pytest.raises(AllocatorError):
        a.read(h, 0, 1)


def test_negative_size_rejected():
    with pytest.raises(AllocatorError):
        _alloc().alloc(-1)


def test_setup_allocators_tags_nodes():
    parts = [NodePartition(node=0, min_id=0, max_id=2),
             NodePartition(node=1, min_id=3, max_id=5)]
    allocs = setup_allocators(parts, per_object_initial_bytes=1024)
    assert [a.obj_id for a in allocs] == list(range(6))
    assert [a.node for a in allocs] == [0, 0, 0, 1, 1, 1]


class _ReferenceStack:
    """Trivial model: a LIFO stack of live/free handles per class."""

    def __init__(self):
        self.free = {}
        self.live = set()
        self.order = {}

    def alloc(self, cls, handle):
        if self.free.get(cls):
            assert handle == self.free[cls].pop()
        self.live.add(handle)

    def release(self, cls, handle):
        self.live.discard(handle)
        self.free.setdefault(cls, []).append(handle)


@given(
    script=st.lists(
        st.tuples(st.sampled_from(["alloc", "free"]),
                  st.sampled_from([16, 32, 48, 64])),
        min_size=1, max_size=200),
)
@settings(max_examples=100)
def test_random_scripts_match_reference_model(script):
    """Drive the allocator with random alloc/free traffic and check the
    stack (LIFO reuse) discipline against the reference model."""
    a = _alloc(classes=(32, 64), chunks=2)
    ref = _ReferenceStack()
    live_by_class = {32: [], 64: []}
    for op, size in script:
        cls = 32 if size <= 32 else 64
        if op == "alloc":
            h = a.alloc(size)
            ref.alloc(cls, h)
            live_by_class[cls].append(h)
        elif live_by_class[cls]:
            h = live_by_class[cls].pop()
            a.free(h)
            ref.release(cls, h)
    # Everything still live is readable; everything freed is reusable LIFO.
    for cls, handles in live_by_class.items():
        for h in handles:
            a.read(h, 0, cls)
    for cls in (32, 64):
        expected = list(reversed(ref.free.get(cls, [])))
        got = [a.alloc(cls) for _ in range(len(expected))]
        assert got == expected
