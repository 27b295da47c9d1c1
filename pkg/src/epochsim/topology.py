"""Memory-node / CPU layout discovery, worker pinning, object partitioning.

On Linux the node map is read from /sys/devices/system/node; anywhere else
(or when that information is missing) we fall back to a single node covering
every usable CPU.  An emulated layout can be forced for tests and for
exercising the stealing logic on single-node desks.
"""

import glob
import itertools
import logging
import os
import re
from dataclasses import dataclass, field

from .errors import ConfigError

log = logging.getLogger(__name__)

ENV_FORCE_NODES = "EPOCHSIM_EMULATE_NODES"


@dataclass(frozen=True)
class TopologyDescriptor:
    num_nodes: int
    cpus_per_node: tuple  # tuple of tuples of CPU ids
    mode: str             # "detected" or "emulated"

    def all_cpus(self):
        return [c for cpus in self.cpus_per_node for c in cpus]

    def node_of_cpu(self, cpu):
        for node, cpus in enumerate(self.cpus_per_node):
            if cpu in cpus:
                return node
        raise ConfigError(f"cpu {cpu} not in topology")


def _parse_cpulist(text):
    """Parse a kernel cpulist string like '0-3,8,10-11'."""
    cpus = []
    for part in text.strip().split(","):
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-")
            cpus.extend(range(int(lo), int(hi) + 1))
        else:
            cpus.append(int(part))
    return cpus


def detect_topology(emulate_nodes=None):
    """Discover the node/CPU map, or build an emulated one.

    emulate_nodes forces an emulated layout with that many nodes; the
    EPOCHSIM_EMULATE_NODES environment variable does the same. Detection
    failure degrades to one node holding every usable CPU.
    """
    if emulate_nodes is None and os.environ.get(ENV_FORCE_NODES):
        emulate_nodes = int(os.environ[ENV_FORCE_NODES])

    try:
        usable = sorted(os.sched_getaffinity(0))
    except AttributeError:  # non-Linux
        usable = list(range(os.cpu_count() or 1))

    if emulate_nodes is not None:
        return emulated_topology(emulate_nodes, usable)

    nodes = {}
    for path in glob.glob("/sys/devices/system/node/node[0-9]*/cpulist"):
        m = re.search(r"node(\d+)", path)
        try:
            with open(path) as fh:
                cpus = [c for c in _parse_cpulist(fh.read()) if c in usable]
        except OSError:
            continue
        if cpus:
            nodes[int(m.group(1))] = tuple(sorted(cpus))
    if len(nodes) >= 1 and sum(len(v) for v in nodes.values()) == len(usable):
        layout = tuple(nodes[k] for k in sorted(nodes))
        return TopologyDescriptor(len(layout), layout, "detected")

    return TopologyDescriptor(1, (tuple(usable),), "emulated")


def emulated_topology(num_nodes, cpus=None):
    """Force a layout with num_nodes nodes, CPUs dealt round-robin.

    Nodes beyond the CPU count end up with no CPUs; their objects are only
    ever reached through stealing, which is exactly what desk-scale tests
    of the remote path need.
    """
    if num_nodes < 1:
        raise ConfigError("need at least one node")
    if cpus is None:
        try:
            cpus = sorted(os.sched_getaffinity(0))
        except AttributeError:
            cpus = list(range(os.cpu_count() or 1))
    buckets = [[] for _ in range(num_nodes)]
    for i, cpu in enumerate(cpus):
        buckets[i % num_nodes].append(cpu)
    return TopologyDescriptor(num_nodes, tuple(tuple(b) for b in buckets), "emulated")


@dataclass
class NodePartition:
    """Contiguous object-id range owned by one node, plus its epoch counter.

    The counter is an itertools.count: next() is the fetch-and-add (returns
    the prior value, increments atomically under the interpreter lock, no
    user-level lock involved).
    """
    node: int
    min_id: int
    max_id: int  # inclusive; min_id > max_id means the range is empty
    _counter: itertools.count = field(default_factory=itertools.count, repr=False)

    def fetch_and_add(self):
        return next(self._counter)

    def reset_counter(self):
        self._counter = itertools.count()

    def size(self):
        return max(0, self.max_id - self.min_id + 1)


def partition_objects(num_objects, topo):
    """Split [0, num_objects) into contiguous near-equal per-node ranges."""
    if num_objects < 1:
        raise ConfigError("need at least one object")
    n = topo.num_nodes
    base, rem = divmod(num_objects, n)
    parts = []
    start = 0
    for node in range(n):
        count = base + (1 if node < rem else 0)
        parts.append(NodePartition(node, start, start + count - 1))
        start += count
    return parts


def worker_cpu_assignment(topo, num_workers):
    """Map worker ids to (cpu, node) pairs, filling node 0's CPUs first.

    Low worker ids land on low node indices, so small thread counts sit on
    the node owning the low object ranges. Oversubscribed workers wrap
    around the CPU list.
    """
    flat = []
    for node, cpus in enumerate(topo.cpus_per_node):
        flat.extend((cpu, node) for cpu in cpus)
    if not flat:
        raise ConfigError("topology has no CPUs")
    return [flat[w % len(flat)] for w in range(num_workers)]


def pin_worker(worker_id, cpu):
    """Restrict the calling thread to one CPU. Returns True when it stuck.

    Failures (containers, non-Linux) degrade to unpinned with a warning;
    the caller keeps the intended CPU's node as its local node either way.
    """
    try:
        os.sched_setaffinity(0, {cpu})
        return True
    except (AttributeError, OSError, ValueError) as exc:
        log.warning("could not pin worker %d to cpu %d: %s", worker_id, cpu, exc)
        return False
