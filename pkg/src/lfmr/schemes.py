"""Baseline reclamation schemes: hazard slots, epochs, and no reclamation.

These exist for comparison against the tracing runtime.  They share the
same arena, so reclamation here means pushing nodes back on the arena's
free list.

* :class:`HazardScheme` -- per-thread published slots; a retired node is
  reused only once no slot holds it.  Readers pay a publish + re-validate
  per visited node but a stalled thread blocks at most the nodes its own
  slots pin.
* :class:`EpochScheme` -- per-thread epoch announcements with three limbo
  generations; nodes retired two epochs ago are reused.  Readers pay
  almost nothing, but one stalled thread inside a critical section stops
  the epoch from advancing and reclamation halts globally.
* :func:`nr_alloc` / :func:`nr_free` -- the leaky baseline: free is a
  no-op, memory is never reused.
"""

from __future__ import annotations

import bisect
import threading

from .atomics import AtomicWord
from .node_pool import Arena, PoolExhausted

#: Retire-list length that triggers a scan, before dividing by the thread
#: count of the run.
RETIRE_SCAN_NUMERATOR = 100000


class _Registry:
    """Thread-id assignment shared by both baseline schemes."""

    def __init__(self, max_threads: int) -> None:
        self.max_threads = max_threads
        self._tls = threading.local()
        self._lock = threading.Lock()
        self._count = 0

    def register(self) -> int:
        tid = getattr(self._tls, "tid", None)
        if tid is None:
            with self._lock:
                tid = self._count
                self._count += 1
            if tid >= self.max_threads:
                raise RuntimeError("too many threads for scheme")
            self._tls.tid = tid
        return tid

    def current(self) -> int:
        tid = getattr(self._tls, "tid", None)
        if tid is None:
            raise RuntimeError("calling thread is not registered")
        return tid

    @property
    def thread_count(self) -> int:
        return self._count


class HazardScheme(_Registry):
    """Hazard-slot reclamation over one arena.

    Each thread owns ``slots_per_thread`` published slots (plain stores;
    see :mod:`lfmr.atomics` for why no fence is needed here) and a private
    retire list.  When the retire list reaches the scan threshold, the
    thread snapshots all slots and frees every retired node not present.

    The threshold defaults to ``100000 // threads`` but is capped at half
    the pool per thread so the aggregate of all retire lists cannot exhaust
    a desk-scale arena.
    """

    def __init__(self, arena: Arena, max_threads: int = 64,
                 slots_per_thread: int = 3, threads_hint: int = 1) -> None:
        super().__init__(max_threads)
        self.arena = arena
        self.slots_per_thread = slots_per_thread
        self.slots = [[None] * slots_per_thread for _ in range(max_threads)]
        self.retired: list[list[int]] = [[] for _ in range(max_threads)]
        self.scan_threshold = max(
            64,
            min(RETIRE_SCAN_NUMERATOR // max(1, threads_hint),
                arena.capacity // (2 * max(1, threads_hint))))
        self.reclaimed = AtomicWord(0)
        self.scans = AtomicWord(0)

    def protect(self, tid: int, slot: int, addr: int | None) -> None:
        self.slots[tid][slot] = addr

    def clear(self, tid: int) -> None:
        row = self.slots[tid]
        for i in range(self.slots_per_thread):
            row[i] = None

    def hp_read(self, tid: int, slot: int, owner_addr: int, word: int) -> int:
        """Protected read of a link word: load, publish, re-validate until
        stable.  Returns the (possibly tagged) link value; its untagged
        target is protected in ``slot`` on return."""
        storage = self.arena.storage
        off = owner_addr - self.arena.base + word
        row = self.slots[tid]
        while True:
            v = storage[off]
            row[slot] = v & -2
            if storage[off] == v:
                return v

    def retire(self, tid: int, addr: int) -> None:
        lst = self.retired[tid]
        lst.append(addr)
        if len(lst) >= self.scan_threshold:
            self.scan(tid)

    def scan(self, tid: int) -> int:
        """Free every node on this thread's retire list that no slot
        protects.  Returns the number freed."""
        self.scans.add(1)
        hazards = sorted({a for row in self.slots for a in row
                          if a is not None})
        lst = self.retired[tid]
        keep: list[int] = []
        freed = 0
        for addr in lst:
            i = bisect.bisect_left(hazards, addr)
            if i < len(hazards) and hazards[i] == addr:
                keep.append(addr)
            else:
                self.arena.release(addr)
                freed += 1
        self.retired[tid] = keep
        if freed:
            self.reclaimed.add(freed)
        return freed

    def retired_count(self) -> int:
        return sum(len(lst) for lst in self.retired)


class EpochScheme(_Registry):
    """Epoch-based reclamation over one arena.

    Threads announce the global epoch on entering a critical section.  A
    node retired in epoch ``e`` is freed once the thread observes an
    announced epoch ``>= e + 2``: by then every thread active during
    ``e`` has left its critical section.  The epoch only advances when
    every active thread has announced the current one, so a single thread
    parked inside a critical section blocks all reclamation -- the
    well-known robustness gap this scheme trades for cheap reads.
    """

    def __init__(self, arena: Arena, max_threads: int = 64) -> None:
        super().__init__(max_threads)
        self.arena = arena
        self.global_epoch = AtomicWord(0)
        self.announced = [0] * max_threads
        self.active = [False] * max_threads
        # per-thread limbo buckets: epoch -> list of retired addresses
        self.limbo: list[dict[int, list[int]]] = [dict() for _ in range(max_threads)]
        self.reclaimed = AtomicWord(0)

    def enter(self, tid: int) -> None:
        self.active[tid] = True
        e = self.global_epoch.value
        self.announced[tid] = e
        self._reclaim_old(tid, e)
        self._try_advance(e)

    def exit(self, tid: int) -> None:
        self.active[tid] = False

    def retire(self, tid: int, addr: int) -> None:
        bucket = self.limbo[tid].setdefault(self.announced[tid], [])
        bucket.append(addr)

    def _reclaim_old(self, tid: int, epoch: int) -> None:
        limbo = self.limbo[tid]
        stale = [e for e in limbo if e <= epoch - 2]
        for e in stale:
            nodes = limbo.pop(e)
            for addr in nodes:
                self.arena.release(addr)
            self.reclaimed.add(len(nodes))

    def _try_advance(self, e: int) -> None:
        if self.global_epoch.value != e:
            return
        for t in range(self._count):
            if self.active[t] and self.announced[t] != e:
                return
        self.global_epoch.compare_exchange(e, e + 1)

    def limbo_count(self) -> int:
        return sum(len(b) for limbo in self.limbo for b in limbo.values())


def nr_alloc(arena: Arena) -> int:
    """Leaky-baseline allocation: pop from the free list or fail loudly."""
    i = arena.try_pop_free()
    if i is None:
        raise PoolExhausted(
            "leaky baseline exhausted its preallocated pool; nothing is "
            "ever freed, so size the pool for the whole run")
    return arena._claim(i)


def nr_free(arena: Arena, addr: int) -> None:
    """Leaky-baseline free: deliberately does nothing."""
