# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loop: the PHOLD benchmark run entirely without the GIL.

Workers are Python threads that drop the GIL on entry and coordinate only
through hardware primitives: a fetch-and-add per object acquisition, one
test-and-set spinlock per calendar bucket (padded to its own cache line),
and a two-phase sense-reversing spin barrier with the lowest-indexed worker
doing the epoch rollover between the phases.  The benchmark model (chain
touch, partial reallocation from the per-object stack arenas, successor
scheduling) is compiled into the loop; the pure-Python engine remains the
general-model and instrumentation backend.

The per-object random streams are bit-identical to epochsim.rng, so a run
here and a pure-Python run with the same seed process the same events.
"""

from libc.stdlib cimport malloc, calloc, free, qsort
from libc.string cimport memset, memcpy
from libc.math cimport log

import threading
import time

from .config import RunReport
from . import topology as _topology

cdef extern from *:
    """
    #include <stdint.h>
    #include <stdlib.h>
    #include <time.h>
    #include <sched.h>
    static inline long long es_faa(long long *p) {
        return __sync_fetch_and_add((volatile long long *)p, 1);
    }
    static inline unsigned long long es_faa_u64(unsigned long long *p) {
        return __sync_fetch_and_add((volatile unsigned long long *)p, 1);
    }
    static inline void es_lock(int *l) {
        volatile int *p = (volatile int *)l;
        while (__sync_lock_test_and_set(p, 1)) {
            while (*p) sched_yield();
        }
    }
    static inline void es_unlock(int *l) {
        __sync_lock_release((volatile int *)l);
    }
    static inline int es_load_int(int *p) { return *(volatile int *)p; }
    static inline void es_store_int(int *p, int v) { *(volatile int *)p = v; }
    static inline long long es_load_ll(long long *p) {
        return *(volatile long long *)p;
    }
    static inline void es_fence(void) { __sync_synchronize(); }
    static inline void es_pause(void) { sched_yield(); }
    static inline void *es_realloc(void *p, size_t n) { return realloc(p, n); }
    static inline double es_now(void) {
        struct timespec t;
        clock_gettime(CLOCK_MONOTONIC, &t);
        return t.tv_sec + 1e-9 * t.tv_nsec;
    }
    """
    long long es_faa(long long *p) nogil
    unsigned long long es_faa_u64(unsigned long long *p) nogil
    void es_lock(int *l) nogil
    void es_unlock(int *l) nogil
    int es_load_int(int *p) nogil
    void es_store_int(int *p, int v) nogil
    long long es_load_ll(long long *p) nogil
    void es_fence() nogil
    void es_pause() nogil
    void *es_realloc(void *p, size_t n) nogil
    double es_now() nogil

cdef enum:
    CACHE_LINE = 64
    NEXT_OFF = 8          # chunk bytes 0..7 hold the next-node pointer

ctypedef unsigned long long u64

cdef u64 GOLDEN = <u64>0x9E3779B97F4A7C15

cdef struct Event:
    double ts
    u64 seq
    int dest
    Event *nxt

cdef struct Area:
    char **addresses
    long top_elem
    long count
    long chunk_size
    int node
    void **reservations   # backing regions, released at teardown
    int n_res
    int cap_res

cdef struct ObjState:
    char *head[2]
    char *tail[2]
    char *cursor
    char *cursor_prev
    int cursor_list
    u64 rng
    Area area[2]          # 32- and 64-byte classes

cdef struct Visit:
    char *prev
    char *cur
    int li

cdef struct WorkerSlot:
    Event *fallback
    Event *freelist
    long long events
    long long dropped
    double ts_sum
    long long *local_from    # per node
    long long *stolen_from
    Event **sortbuf
    long sortcap
    Visit *visits
    int local_node
    int oom
    char pad[CACHE_LINE]


cdef inline u64 _mix(u64 z) nogil:
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)

cdef inline u64 _rng_next(u64 *state) nogil:
    state[0] = state[0] + GOLDEN
    return _mix(state[0])

cdef inline double _rng_uniform(u64 *state) nogil:
    return (_rng_next(state) >> 11) * (1.0 / 9007199254740992.0)


cdef int _cmp_events(const void *a, const void *b) noexcept nogil:
    cdef Event *x = (<Event **>a)[0]
    cdef Event *y = (<Event **>b)[0]
    if x.ts < y.ts: return -1
    if x.ts > y.ts: return 1
    if x.seq < y.seq: return -1
    if x.seq > y.seq: return 1
    return 0


cdef int _area_reserve(Area *a, long chunks) nogil:
    """Reserve another region for the area and push its chunk addresses."""
    cdef char *region = <char *>malloc(chunks * a.chunk_size)
    cdef char **addrs
    cdef void **res
    cdef long i
    if region == NULL:
        return -1
    if a.n_res == a.cap_res:
        a.cap_res = 4 if a.cap_res == 0 else a.cap_res * 2
        res = <void **>es_realloc(<void *>a.reservations,
                                  a.cap_res * sizeof(void *))
        if res == NULL:
            free(region)
            return -1
        a.reservations = res
    a.reservations[a.n_res] = region
    a.n_res += 1
    addrs = <char **>es_realloc(<void *>a.addresses,
                                (a.count + chunks) * sizeof(char *))
    if addrs == NULL:
        return -1
    a.addresses = addrs
    for i in range(chunks):
        a.addresses[a.count + i] = region + i * a.chunk_size
    a.count += chunks
    return 0


cdef class PholdCore:
    cdef:
        # model / engine parameters
        int O, N, T, nodes
        long long S, touch_count, realloc_count
        double W, L, TA, end_time
        double wall_limit
        u64 seed
        # shared engine state
        Event **cal            # O*N bucket heads
        char *locks            # O*N spinlocks, CACHE_LINE apart
        long long *node_min
        long long *node_max
        char *counters         # per-node fetch-and-add counters, padded
        ObjState *objs
        WorkerSlot *workers
        u64 seq_counter
        # barrier / loop control
        long long bar_count[2]
        int bar_sense[2]
        int *my_sense          # per worker, both phases
        long long cur_epoch
        int stop
        long long epochs_completed
        double t_start
        object error

    def __cinit__(self, int num_objects, int num_threads, int depth,
                  double epoch_width, double lookahead, double mean_increment,
                  double end_time, double wall_limit, u64 seed,
                  long long state_size, long long touch_count,
                  long long realloc_count, object partitions,
                  object worker_nodes):
        cdef int i, n
        self.O = num_objects
        self.T = num_threads
        self.N = depth
        self.W = epoch_width
        self.L = lookahead
        self.TA = mean_increment
        self.end_time = end_time
        self.wall_limit = wall_limit
        self.seed = seed
        self.S = state_size
        self.touch_count = touch_count
        self.realloc_count = realloc_count
        self.nodes = len(partitions)
        self.error = None

        self.cal = <Event **>calloc(self.O * self.N, sizeof(Event *))
        self.locks = <char *>calloc(self.O * self.N, CACHE_LINE)
        self.node_min = <long long *>malloc(self.nodes * sizeof(long long))
        self.node_max = <long long *>malloc(self.nodes * sizeof(long long))
        self.counters = <char *>calloc(self.nodes, CACHE_LINE)
        self.objs = <ObjState *>calloc(self.O, sizeof(ObjState))
        self.workers = <WorkerSlot *>calloc(self.T, sizeof(WorkerSlot))
        self.my_sense = <int *>calloc(self.T * 2, sizeof(int))
        if (self.cal == NULL or self.locks == NULL or self.objs == NULL
                or self.workers == NULL or self.node_min == NULL
                or self.node_max == NULL or self.counters == NULL
                or self.my_sense == NULL):
            raise MemoryError

        for i, part in enumerate(partitions):
            self.node_min[i] = part.min_id
            self.node_max[i] = part.max_id
        for i in range(self.T):
            n = worker_nodes[i]
            self.workers[i].local_node = n
            self.workers[i].local_from = <long long *>calloc(
                self.nodes, sizeof(long long))
            self.workers[i].stolen_from = <long long *>calloc(
                self.nodes, sizeof(long long))
            self.workers[i].sortcap = 64
            self.workers[i].sortbuf = <Event **>malloc(64 * sizeof(Event *))
            self.workers[i].visits = <Visit *>malloc(
                (touch_count if touch_count > 0 else 1) * sizeof(Visit))
            if (self.workers[i].local_from == NULL
                    or self.workers[i].stolen_from == NULL
                    or self.workers[i].sortbuf == NULL
                    or self.workers[i].visits == NULL):
                raise MemoryError
        self.bar_count[0] = self.bar_count[1] = 0
        self.bar_sense[0] = self.bar_sense[1] = 0
        self.cur_epoch = 0
        self.stop = 0
        self.epochs_completed = 0
        self.seq_counter = 0

    def __dealloc__(self):
        cdef int i, c
        cdef Event *e
        cdef Event *nx
        if self.objs != NULL:
            for i in range(self.O):
                for c in range(2):
                    self._free_area(&self.objs[i].area[c])
            free(self.objs)
        if self.workers != NULL:
            for i in range(self.T):
                free(self.workers[i].local_from)
                free(self.workers[i].stolen_from)
                free(self.workers[i].sortbuf)
                free(self.workers[i].visits)
                self._free_chain(self.workers[i].freelist)
                self._free_chain(self.workers[i].fallback)
            free(self.workers)
        if self.cal != NULL:
            for i in range(self.O * self.N):
                self._free_chain(self.cal[i])
            free(self.cal)
        free(self.locks)
        free(self.node_min)
        free(self.node_max)
        free(self.counters)
        free(self.my_sense)

    cdef void _free_chain(self, Event *e) nogil:
        cdef Event *nx
        while e != NULL:
            nx = e.nxt
            free(e)
            e = nx

    cdef void _free_area(self, Area *a) nogil:
        cdef int i
        if a.reservations != NULL:
            for i in range(a.n_res):
                free(a.reservations[i])
            free(a.reservations)
            a.reservations = NULL
        free(a.addresses)
        a.addresses = NULL

    # ------------------------------------------------------------------ arena

    cdef inline char *_obj_alloc(self, WorkerSlot *w, ObjState *st, int li) nogil:
        cdef Area *a = &st.area[li]
        if a.top_elem == a.count:
            if _area_reserve(a, a.count) != 0:  # doubling growth
                w.oom = 1
                es_store_int(&self.stop, 1)
                return NULL
        a.top_elem += 1
        return a.addresses[a.top_elem - 1]

    cdef inline void _obj_free(self, ObjState *st, int li, char *h) nogil:
        cdef Area *a = &st.area[li]
        a.top_elem -= 1
        a.addresses[a.top_elem] = h

    # ------------------------------------------------------------- event pool

    cdef inline Event *_new_event(self, WorkerSlot *w, int dest, double ts,
                                  u64 seq) nogil:
        cdef Event *e = w.freelist
        if e != NULL:
            w.freelist = e.nxt
        else:
            e = <Event *>malloc(sizeof(Event))
            if e == NULL:
                w.oom = 1
                es_store_int(&self.stop, 1)
                return NULL
        e.dest = dest
        e.ts = ts
        e.seq = seq
        e.nxt = NULL
        return e

    cdef inline long long _epoch_of(self, double ts) nogil:
        cdef long long i = <long long>(ts / self.W)
        while (i + 1) * self.W <= ts:
            i += 1
        while i * self.W > ts:
            i -= 1
        return i

    cdef inline void _insert(self, WorkerSlot *w, Event *e) nogil:
        cdef long long ep = self._epoch_of(e.ts)
        cdef long slot
        cdef int *lk
        if e == NULL:
            return
        if ep < self.cur_epoch + self.N:
            slot = e.dest * self.N + <long>(ep % self.N)
            lk = <int *>(self.locks + slot * CACHE_LINE)
            es_lock(lk)
            e.nxt = self.cal[slot]
            self.cal[slot] = e
            es_unlock(lk)
        else:
            e.nxt = w.fallback
            w.fallback = e

    cdef void _drain_fallback(self, WorkerSlot *w) nogil:
        cdef Event *e = w.fallback
        cdef Event *nx
        cdef Event *keep = NULL
        w.fallback = NULL
        while e != NULL:
            nx = e.nxt
            if self._epoch_of(e.ts) < self.cur_epoch + self.N:
                self._insert(w, e)
            else:
                e.nxt = keep
                keep = e
            e = nx
        w.fallback = keep

    # ------------------------------------------------------------ PHOLD model

    cdef inline double _draw_increment(self, u64 *rng) nogil:
        cdef double mean = self.TA - self.L
        if mean <= 0.0:
            return self.L
        return self.L - mean * log(1.0 - _rng_uniform(rng))

    cdef int _build_object(self, int obj, int node) nogil:
        """Chains and initial arena for one object (setup phase)."""
        cdef ObjState *st = &self.objs[obj]
        cdef long n32 = <long>((self.S + 1) // 2)
        cdef long counts[2]
        cdef long k
        cdef int li
        cdef char *h
        counts[0] = n32
        counts[1] = <long>self.S - n32
        st.rng = self.seed ^ (<u64>(obj + 1) * GOLDEN)
        for li in range(2):
            st.area[li].chunk_size = 32 if li == 0 else 64
            st.area[li].node = node
            if _area_reserve(&st.area[li],
                             counts[li] if counts[li] > 4 else 4) != 0:
                return -1
            for k in range(counts[li]):
                h = self._obj_alloc(&self.workers[0], st, li)
                if h == NULL:
                    return -1
                (<char **>h)[0] = NULL
                h[NEXT_OFF] = 0
                if st.head[li] == NULL:
                    st.head[li] = h
                else:
                    (<char **>st.tail[li])[0] = h
                st.tail[li] = h
        st.cursor = st.head[0]
        st.cursor_prev = NULL
        st.cursor_list = 0
        return 0

    cdef void _process_event(self, WorkerSlot *w, Event *e) nogil:
        cdef ObjState *st = &self.objs[e.dest]
        cdef long long k, first
        cdef int li = st.cursor_list
        cdef char *prev = st.cursor_prev
        cdef char *cur = st.cursor
        cdef char *fresh
        cdef Visit *v
        cdef long long nvis = 0
        cdef double ts
        cdef int dest

        for k in range(self.touch_count):
            if cur == NULL:
                if st.head[1 - li] != NULL:
                    li = 1 - li
                prev = NULL
                cur = st.head[li]
            cur[NEXT_OFF] = <char>(cur[NEXT_OFF] + 1)
            v = &w.visits[nvis]
            v.prev = prev
            v.cur = cur
            v.li = li
            nvis += 1
            prev = cur
            cur = (<char **>cur)[0]
        st.cursor_list = li
        st.cursor_prev = prev
        st.cursor = cur

        # Free/re-allocate the tail of the visit window; the stack arena
        # hands the same chunk straight back, so relinking is the rare branch.
        first = nvis - (self.realloc_count if self.realloc_count < nvis
                        else nvis)
        for k in range(first, nvis):
            v = &w.visits[k]
            self._obj_free(st, v.li, v.cur)
            fresh = self._obj_alloc(w, st, v.li)
            if fresh == NULL:
                return
            if fresh != v.cur:
                self._relink(st, w, v, fresh, nvis)

        ts = e.ts + self._draw_increment(&st.rng)
        dest = <int>(_rng_next(&st.rng) % <u64>self.O)
        self._insert(w, self._new_event(
            w, dest, ts, es_faa_u64(&self.seq_counter)))

    cdef void _relink(self, ObjState *st, WorkerSlot *w, Visit *v,
                      char *fresh, long long nvis) nogil:
        cdef long long k
        memcpy(fresh, v.cur, st.area[v.li].chunk_size)
        if v.prev == NULL:
            st.head[v.li] = fresh
        else:
            (<char **>v.prev)[0] = fresh
        if st.tail[v.li] == v.cur:
            st.tail[v.li] = fresh
        if st.cursor == v.cur:
            st.cursor = fresh
        if st.cursor_prev == v.cur:
            st.cursor_prev = fresh
        for k in range(nvis):
            if w.visits[k].prev == v.cur:
                w.visits[k].prev = fresh
        v.cur = fresh

    # --------------------------------------------------------------- epoch run

    cdef void _process_object(self, WorkerSlot *w, int obj) nogil:
        cdef long slot = obj * self.N + <long>(self.cur_epoch % self.N)
        cdef Event *e = self.cal[slot]           # lock-free: exclusive owner
        cdef long n = 0, i
        cdef Event **buf
        if e == NULL:
            return
        self.cal[slot] = NULL
        while e != NULL:
            if n == w.sortcap:
                w.sortcap *= 2
                buf = <Event **>es_realloc(<void *>w.sortbuf,
                                           w.sortcap * sizeof(Event *))
                if buf == NULL:
                    w.oom = 1
                    es_store_int(&self.stop, 1)
                    return
                w.sortbuf = buf
            w.sortbuf[n] = e
            n += 1
            e = e.nxt
        qsort(w.sortbuf, n, sizeof(Event *), _cmp_events)
        for i in range(n):
            e = w.sortbuf[i]
            if e.ts < self.end_time:
                self._process_event(w, e)
                w.events += 1
                w.ts_sum += e.ts
            else:
                w.dropped += 1
            e.nxt = w.freelist
            w.freelist = e

    cdef void _acquire_loop(self, WorkerSlot *w) nogil:
        cdef int i = w.local_node
        cdef int j = 0
        cdef int node
        cdef long long v
        while j < self.nodes:
            node = i % self.nodes
            v = es_faa(<long long *>(self.counters + node * CACHE_LINE))
            if v + self.node_min[node] <= self.node_max[node]:
                if node == w.local_node:
                    w.local_from[node] += 1
                else:
                    w.stolen_from[node] += 1
                self._process_object(w, <int>(v + self.node_min[node]))
            else:
                i += 1
                j += 1

    cdef void _barrier(self, int wid, int phase) nogil:
        cdef int sense = self.my_sense[wid * 2 + phase] ^ 1
        self.my_sense[wid * 2 + phase] = sense
        if es_faa(&self.bar_count[phase]) == self.T - 1:
            self.bar_count[phase] = 0
            es_fence()
            es_store_int(&self.bar_sense[phase], sense)
        else:
            while es_load_int(&self.bar_sense[phase]) != sense:
                es_pause()

    cdef void _rollover(self) nogil:
        """Serial phase between the two barrier halves (worker 0 only)."""
        self.epochs_completed += 1
        if es_load_int(&self.stop):
            return
        if (self.cur_epoch + 1) * self.W >= self.end_time:
            es_store_int(&self.stop, 1)
            return
        if self.wall_limit > 0.0 and es_now() - self.t_start > self.wall_limit:
            es_store_int(&self.stop, 1)
            return
        self.cur_epoch += 1
        memset(self.counters, 0, self.nodes * CACHE_LINE)

    cdef void _worker_loop(self, int wid) nogil:
        cdef WorkerSlot *w = &self.workers[wid]
        while True:
            self._drain_fallback(w)
            self._acquire_loop(w)
            self._barrier(wid, 0)
            if wid == 0:
                self._rollover()
            self._barrier(wid, 1)
            if es_load_int(&self.stop):
                break

    # -------------------------------------------------------------- driver API

    def setup(self, int initial_events, int inject_at_zero, object partitions):
        """Build all object state and inject initial events (single-threaded)."""
        cdef int obj, m
        cdef double ts
        cdef ObjState *st
        cdef Event *e
        node_of = {}
        for part in partitions:
            for o in range(part.min_id, part.max_id + 1):
                node_of[o] = part.node
        for obj in range(self.O):
            if self._build_object(obj, node_of[obj]) != 0:
                raise MemoryError(
                    f"object {obj}: cannot reserve arena for S={self.S}")
        for obj in range(self.O):
            st = &self.objs[obj]
            for m in range(initial_events):
                if inject_at_zero:
                    ts = 0.0
                else:
                    ts = self._draw_increment(&st.rng)
                e = self._new_event(&self.workers[0], obj, ts,
                                    es_faa_u64(&self.seq_counter))
                if e == NULL:
                    raise MemoryError("event buffer allocation failed")
                self._insert(&self.workers[0], e)

    def worker(self, int wid):
        with nogil:
            self._worker_loop(wid)
        if self.workers[wid].oom and self.error is None:
            self.error = MemoryError(f"worker {wid}: arena growth failed")

    def start_clock(self):
        self.t_start = es_now()

    def report(self, double elapsed):
        per_thread = [self.workers[i].events for i in range(self.T)]
        local = [0] * self.nodes
        stolen = [0] * self.nodes
        for i in range(self.T):
            for n in range(self.nodes):
                local[n] += self.workers[i].local_from[n]
                stolen[n] += self.workers[i].stolen_from[n]
        return RunReport(
            events_processed=sum(per_thread),
            epochs_completed=self.epochs_completed,
            wall_clock_seconds=elapsed,
            per_thread_events=per_thread,
            per_node_local_acquisitions=local,
            per_node_stolen_acquisitions=stolen,
            events_dropped_at_end=sum(self.workers[i].dropped
                                      for i in range(self.T)),
            timestamp_sum=sum(self.workers[i].ts_sum for i in range(self.T)),
        ).validate()

    def snapshot(self):
        """Racy progress counters, safe to read from the main thread."""
        return (sum(self.workers[i].events for i in range(self.T)),
                self.epochs_completed)


def run_phold(engine_config, phold_config):
    """Run PHOLD on the compiled core; mirrors Engine.run() + PholdModel."""
    topo = _topology.detect_topology(engine_config.emulate_nodes)
    partitions = _topology.partition_objects(phold_config.objects, topo)
    assignment = _topology.worker_cpu_assignment(topo,
                                                 engine_config.num_threads)
    worker_nodes = [node for _, node in assignment]

    core = PholdCore(
        phold_config.objects, engine_config.num_threads,
        engine_config.calendar_depth, engine_config.epoch_width,
        engine_config.lookahead, phold_config.mean_increment,
        engine_config.end_time, engine_config.wall_clock_limit or 0.0,
        engine_config.rng_seed & ((1 << 64) - 1), phold_config.state_size,
        phold_config.touch_count, phold_config.realloc_count,
        partitions, worker_nodes)
    core.setup(phold_config.initial_events,
               1 if phold_config.inject_at_zero else 0, partitions)

    start = time.monotonic()
    if engine_config.end_time > 0 and phold_config.initial_events > 0:
        core.start_clock()

        def _run(wid, cpu):
            if engine_config.pin:
                _topology.pin_worker(wid, cpu)
            core.worker(wid)

        threads = [threading.Thread(target=_run, args=(wid, cpu), daemon=True)
                   for wid, (cpu, _) in enumerate(assignment)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if core.error is not None:
            raise core.error
    return core.report(time.monotonic() - start)
