"""Fixed-capacity allocation arena with a phase-versioned mark table.

The arena backs every data structure in this package.  Its storage is a
flat word array allocated once and never shrunk, so a load through any
node handle that was ever issued can return stale ("arbitrary") words but
can never fault -- the property the optimistic read protocol relies on.

Node handles are plain integers: globally unique even word addresses.
The low bit of a link word is reserved for the logical-deletion tag used
by the list algorithms, and is cleared whenever a link is followed or
gathered as a root.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .atomics import AtomicWord, SharedCell

WORD_BYTES = 8

#: Value written into every word of a reclaimed node when poison mode is
#: on.  Chosen to be negative so it can never collide with a node address
#: (addresses are positive) or a set key (keys are non-negative, and the
#: sentinels are -1 and 2**63).
POISON = -(2**40 + 0xDEAD)

_FREE = 0
_ALLOCATED = 1

# Arena address spaces never overlap: bases are handed out from a global
# cursor so a raw link value identifies its arena unambiguously.
_base_lock = threading.Lock()
_next_base = 8


def _claim_address_space(nwords: int) -> int:
    global _next_base
    with _base_lock:
        base = _next_base
        _next_base += nwords + 8  # guard gap between arenas
        if _next_base % 2:
            _next_base += 1
        return base


class PoolExhausted(Exception):
    """Raised when a full reclamation phase frees nothing and the free
    list is still empty: the pool is too small for the live set."""


class LayoutError(ValueError):
    """Invalid node layout or arena configuration."""


@dataclass(frozen=True)
class NodeLayout:
    """Shape of one node type: total size plus the byte offsets of the
    fields that hold references to other nodes."""

    node_size: int
    link_offsets: tuple[int, ...]

    def __post_init__(self):
        if self.node_size <= 0 or self.node_size % WORD_BYTES:
            raise LayoutError(f"node_size must be a positive multiple of "
                              f"{WORD_BYTES}, got {self.node_size}")
        for off in self.link_offsets:
            if off % WORD_BYTES:
                raise LayoutError(f"link offset {off} is not word aligned")
            if not 0 <= off < self.node_size:
                raise LayoutError(f"link offset {off} outside node")
        object.__setattr__(self, "link_offsets", tuple(self.link_offsets))

    @property
    def words(self) -> int:
        return self.node_size // WORD_BYTES

    @property
    def link_words(self) -> tuple[int, ...]:
        return tuple(off // WORD_BYTES for off in self.link_offsets)


class MarkTable:
    """Dense side table of per-node mark words.

    A node is marked in phase ``p`` iff its word equals ``p``.  Words only
    move forward, so a thread marking with a stale phase index is a
    harmless no-op.
    """

    __slots__ = ("words", "_lock")

    def __init__(self, capacity: int) -> None:
        self.words = [0] * capacity
        self._lock = threading.Lock()

    def mark(self, index: int, phase: int) -> bool:
        """Advance the mark word to ``phase``; True iff this call did it."""
        with self._lock:
            if self.words[index] >= phase:
                return False
            self.words[index] = phase
            return True

    def cas(self, index: int, expected: int, new: int) -> bool:
        with self._lock:
            if self.words[index] != expected:
                return False
            self.words[index] = new
            return True


class Arena:
    """Lock-free fixed pool of identically shaped nodes.

    Storage is never returned to the OS; reclaimed nodes go back on an
    intrusive Treiber free list whose head carries a version tag to defeat
    ABA.  ``base`` is the word address of node 0; node ``i`` lives at
    ``base + i * stride`` (stride is the node word count rounded up to
    even so addresses keep their low bit free for tagging).
    """

    def __init__(self, capacity: int, layout: NodeLayout) -> None:
        if capacity < 1:
            raise LayoutError("capacity must be >= 1")
        self.capacity = capacity
        self.layout = layout
        self.stride = layout.words + (layout.words % 2)
        self.base = _claim_address_space(capacity * self.stride)
        self.limit = self.base + capacity * self.stride
        self.storage = [0] * (capacity * self.stride)
        self.mark_table = MarkTable(capacity)
        self.state = [_FREE] * capacity
        self.global_roots: list[SharedCell] = []
        self._word_lock = threading.Lock()
        # free list: head packs (tag << 32) | (index + 1); 0 means empty
        self._free_next = list(range(1, capacity)) + [-1]
        self._free_head = AtomicWord(1)  # index 0, tag 0
        self._runtime = None  # set by Runtime.attach_arena

    # -- address arithmetic ------------------------------------------------

    def addr_of(self, index: int) -> int:
        return self.base + index * self.stride

    def index_of(self, addr: int) -> int:
        return (addr - self.base) // self.stride

    def contains(self, addr: int) -> bool:
        """True iff ``addr`` is a valid, aligned node address here."""
        return (self.base <= addr < self.limit
                and (addr - self.base) % self.stride == 0)

    def word_offset(self, addr: int, word: int = 0) -> int:
        return addr - self.base + word

    # -- raw word access ---------------------------------------------------

    def read_word(self, addr: int, word: int = 0) -> int:
        return self.storage[addr - self.base + word]

    def write_word(self, addr: int, word: int, value: int) -> None:
        rt = self._runtime
        if rt is not None and rt.write_log is not None:
            rt.note_write(("store", addr, word))
        self.storage[addr - self.base + word] = value

    def cas_word(self, addr: int, word: int, expected: int, new: int) -> bool:
        off = addr - self.base + word
        with self._word_lock:
            if self.storage[off] != expected:
                return False
            self.storage[off] = new
        rt = self._runtime
        if rt is not None and rt.write_log is not None:
            rt.note_write(("cas", addr, word))
        return True

    # -- free list ---------------------------------------------------------

    def try_pop_free(self) -> int | None:
        """Pop a free node index, or None when the free list is empty."""
        head = self._free_head
        nxt_arr = self._free_next
        while True:
            h = head.value
            i = (h & 0xFFFFFFFF) - 1
            if i < 0:
                return None
            nxt = nxt_arr[i]
            new = ((h >> 32) + 1) << 32 | (nxt + 1)
            if head.compare_exchange(h, new):
                return i

    def push_free(self, index: int) -> None:
        head = self._free_head
        nxt_arr = self._free_next
        while True:
            h = head.value
            nxt_arr[index] = (h & 0xFFFFFFFF) - 1
            new = ((h >> 32) + 1) << 32 | (index + 1)
            if head.compare_exchange(h, new):
                return

    def free_count(self) -> int:
        """Free-node count; exact only at quiescence."""
        return self.capacity - sum(self.state)

    def allocated_count(self) -> int:
        return sum(self.state)

    # -- allocation --------------------------------------------------------

    def _claim(self, index: int) -> int:
        # Stamp the mark word with the current phase before flipping the
        # state, so a lagging sweeper of an older phase can never claim a
        # node that was just handed out.
        rt = self._runtime
        phase = rt.phase_counter.value if rt is not None else 0
        table = self.mark_table
        while True:
            m = table.words[index]
            if m >= phase or table.cas(index, m, phase):
                break
        self.state[index] = _ALLOCATED
        return self.addr_of(index)

    def setup_alloc(self) -> int:
        """Allocation for the single-threaded setup period (sentinels,
        pre-population).  Raises if the pool is already empty."""
        i = self.try_pop_free()
        if i is None:
            raise PoolExhausted("arena empty during setup")
        return self._claim(i)

    def release(self, addr: int, poison: bool = False) -> None:
        """Return a node to the free list (baseline schemes / unused
        preallocations).  Not used by the tracing scheme's steady state."""
        index = self.index_of(addr)
        if poison:
            off = index * self.stride
            for w in range(self.stride):
                self.storage[off + w] = POISON
        self.state[index] = _FREE
        self.push_free(index)

    # -- sweeping ----------------------------------------------------------

    def sweep(self, phase: int, poison: bool = False) -> int:
        """Reclaim every allocated node not marked in ``phase``.

        Safe to run from several helpers at once: the mark-word CAS from
        the observed stale value to ``phase`` claims each victim exactly
        once.  Returns the number of nodes this caller reclaimed.
        """
        marks = self.mark_table
        words = marks.words
        state = self.state
        stride = self.stride
        storage = self.storage
        n = 0
        for i in range(self.capacity):
            m = words[i]
            if m >= phase:
                continue
            if state[i] != _ALLOCATED:
                continue
            if not marks.cas(i, m, phase):
                continue
            if poison:
                off = i * stride
                for w in range(stride):
                    storage[off + w] = POISON
            state[i] = _FREE
            self.push_free(i)
            n += 1
        return n


def arena_new(capacity: int, layout: NodeLayout) -> Arena:
    """Create an arena with all ``capacity`` nodes on the free list."""
    return Arena(capacity, layout)


def register_global_root(arena: Arena, location: SharedCell) -> None:
    """Register a stable shared cell (e.g. a list head) whose value is
    treated as a root in every reclamation phase.  Idempotent."""
    if location not in arena.global_roots:
        arena.global_roots.append(location)


def mark_node(table: MarkTable, index: int, phase: int) -> bool:
    return table.mark(index, phase)


def sweep(arena: Arena, table: MarkTable, phase: int, poison: bool = False) -> int:
    assert table is arena.mark_table
    return arena.sweep(phase, poison=poison)


def alloc(arena: Arena, ctx) -> int:
    """Allocate a node for ``ctx``'s thread, running reclamation phases
    on exhaustion.  Two consecutive phases that free nothing prove the
    pool is undersized and raise :class:`PoolExhausted`.

    The returned node's words are unspecified; the caller must initialize
    it inside a write-only period that published the new reference.
    """
    from . import tracer  # circular at import time only

    rt = ctx.runtime
    for _ in range(3):
        i = arena.try_pop_free()
        if i is not None:
            return arena._claim(i)
        tracer.reclamation_phase(rt)
    raise PoolExhausted(
        f"arena of {arena.capacity} nodes exhausted after 2 reclamation phases")
