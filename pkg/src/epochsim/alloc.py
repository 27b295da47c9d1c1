"""Per-object, node-affine arena allocation.

Every simulation object owns one allocator with one area per power-of-two
size class (32 bytes upward).  An area is a stack of pre-reserved chunk
addresses: allocation pops, release pushes, growth reserves another
node-tagged region and doubles the address array.  Chunks carry no header
metadata; releases locate their area by binary search over the reservation
ranges.

Handles are integers in a process-wide address space, with each reservation
backed by a bytearray, so chunk contents can be read and written and a
foreign handle is detectable.
"""

import bisect
import itertools
from dataclasses import dataclass, field

from .errors import AllocatorError

MIN_CHUNK = 32
DEFAULT_MAX_CHUNK = 4096
_MAX_RESERVATION = 1 << 34  # sanity cap before asking for backing memory


class AddressSpace:
    """Dispenses disjoint, aligned base addresses for reservations."""

    def __init__(self, start=1 << 12):
        self._next = start

    def reserve(self, length, align):
        base = -(-self._next // align) * align
        self._next = base + length
        return base


@dataclass
class _Reservation:
    base: int
    length: int
    memory: bytearray
    area: "AreaDescriptor"

    @property
    def end(self):
        return self.base + self.length


@dataclass
class AreaDescriptor:
    """One size class of one object: a stack of free chunk addresses."""
    chunk_size: int
    node: int
    addresses: list = field(default_factory=list)
    top_elem: int = 0          # index of the next handle to hand out
    reservations: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.addresses)

    def outstanding(self):
        return self.top_elem


class ObjectAllocator:
    def __init__(self, obj_id, node, space, class_sizes, initial_chunks,
                 node_binding=False):
        self.obj_id = obj_id
        self.node = node
        self.node_binding = node_binding  # placement hint honored by platform?
        self._space = space
        self.areas = []
        self._res_bases = []   # sorted reservation base addresses
        self._res = []         # reservations, parallel to _res_bases
        self._oversize = {}    # handle -> _Reservation for beyond-class requests
        for size in class_sizes:
            area = AreaDescriptor(chunk_size=size, node=node)
            self.areas.append(area)
            self._grow_area(area, max(1, initial_chunks))
        self.grow_count = 0

    # -- internals -----------------------------------------------------------

    def _class_index(self, size):
        if size < 0:
            raise AllocatorError(f"negative allocation size {size}")
        idx = 0
        cap = self.areas[0].chunk_size
        while size > cap:
            idx += 1
            if idx >= len(self.areas):
                return None  # oversize path
            cap = self.areas[idx].chunk_size
        return idx

    def _grow_area(self, area, chunks):
        length = area.chunk_size * chunks
        if length > _MAX_RESERVATION:
            raise AllocatorError(
                f"object {self.obj_id}: reservation of {length} bytes for the "
                f"{area.chunk_size}-byte class exceeds the platform cap")
        try:
            memory = bytearray(length)
        except MemoryError as exc:
            raise AllocatorError(
                f"object {self.obj_id}: cannot reserve {length} bytes for the "
                f"{area.chunk_size}-byte class") from exc
        base = self._space.reserve(length, area.chunk_size)
        res = _Reservation(base, length, memory, area)
        area.reservations.append((base, length))
        # New handles extend the free region of the stack (indices >= top_elem).
        area.addresses.extend(range(base, base + length, area.chunk_size))
        pos = bisect.bisect(self._res_bases, base)
        self._res_bases.insert(pos, base)
        self._res.insert(pos, res)

    def _find_reservation(self, handle):
        pos = bisect.bisect_right(self._res_bases, handle) - 1
        if pos >= 0:
            res = self._res[pos]
            if res.base <= handle < res.end:
                return res
        return None

    # -- allocation API ------------------------------------------------------

    def alloc(self, size):
        idx = self._class_index(size)
        if idx is None:
            return self._alloc_oversize(size)
        area = self.areas[idx]
        if area.top_elem == len(area.addresses):
            self.grow(area)
        handle = area.addresses[area.top_elem]
        area.top_elem += 1
        return handle

    def free(self, handle):
        if handle in self._oversize:
            res = self._oversize.pop(handle)
            pos = self._res_bases.index(res.base)
            del self._res_bases[pos], self._res[pos]
            return
        res = self._find_reservation(handle)
        if res is None:
            raise AllocatorError(
                f"handle {handle:#x} does not belong to object {self.obj_id}")
        area = res.area
        area.top_elem -= 1
        area.addresses[area.top_elem] = handle

    def grow(self, area):
        """Double the area: reserve another node-tagged region of equal size."""
        current_chunks = len(area.addresses)
        self._grow_area(area, max(1, current_chunks))
        self.grow_count += 1

    def _alloc_oversize(self, size):
        length = max(size, 1)
        if length > _MAX_RESERVATION:
            raise AllocatorError(
                f"object {self.obj_id}: oversize request of {size} bytes")
        base = self._space.reserve(length, MIN_CHUNK)
        res = _Reservation(base, length, bytearray(length), None)
        pos = bisect.bisect(self._res_bases, base)
        self._res_bases.insert(pos, base)
        self._res.insert(pos, res)
        self._oversize[base] = res
        return base

    # -- chunk contents ------------------------------------------------------

    def read(self, handle, offset, length):
        res = self._find_reservation(handle)
        if res is None:
            raise AllocatorError(f"handle {handle:#x} is foreign to object "
                                 f"{self.obj_id}")
        start = handle - res.base + offset
        return bytes(res.memory[start:start + length])

    def write(self, handle, offset, data):
        res = self._find_reservation(handle)
        if res is None:
            raise AllocatorError(f"handle {handle:#x} is foreign to object "
                                 f"{self.obj_id}")
        start = handle - res.base + offset
        res.memory[start:start + len(data)] = data


def default_class_sizes(max_chunk=DEFAULT_MAX_CHUNK):
    sizes = []
    size = MIN_CHUNK
    while size <= max_chunk:
        sizes.append(size)
        size *= 2
    return sizes


def setup_allocators(partitions, per_object_initial_bytes=4096,
                     class_sizes=None, node_binding=False, space=None):
    """One allocator per object, tagged with (and, where the platform
    supports it, bound to) the node owning the object's partition."""
    if class_sizes is None:
        class_sizes = default_class_sizes()
    if space is None:
        space = AddressSpace()
    per_class = max(1, per_object_initial_bytes // (len(class_sizes) * MIN_CHUNK))
    allocators = []
    for part in partitions:
        for obj in range(part.min_id, part.max_id + 1):
            allocators.append(ObjectAllocator(
                obj, part.node, space, class_sizes, per_class,
                node_binding=node_binding))
    allocators.sort(key=lambda a: a.obj_id)
    return allocators
