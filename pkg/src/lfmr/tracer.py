"""Lock-free reclamation phase driver: signal, gather, trace, sweep.

A phase is a status machine advanced by CAS; any registered thread may
drive any stage, so a stalled thread never blocks a phase.  Helpers
cooperate on marking through a shared gray stack, publishing the node
they are currently scanning so that a stalled scan can be redone by
others.  The helper that finishes tracing recomputes the reachability
closure from the then-current roots before advancing to the sweep stage,
which subsumes the rescan of every published in-progress node.

Link words read from nodes may be arbitrary when the node was unlinked or
already reclaimed; every followed value is untagged and bounds-checked
against the attached arenas, and out-of-arena values are skipped.
"""

from __future__ import annotations

from .atomics import AtomicWord, ConsStack
from .node_pool import Arena
from .runtime import Runtime, gather_local_roots, init_reclamation

SIGNALING = 0
TRACING = 1
SWEEPING = 2
DONE = 3

#: Published in an in-progress slot while a helper is between popping the
#: gray stack and announcing the popped node.
BUSY = object()


def clear_tag(value: int) -> int:
    """Strip the logical-deletion tag (the low bit) from a link value."""
    return value & ~1


class PhaseState:
    """One reclamation phase: its index, CAS-advanced status, the shared
    gray stack of (node address, phase) pairs, and per-participant
    in-progress slots."""

    __slots__ = ("phase", "status", "gray", "in_progress", "reclaimed")

    def __init__(self, phase: int, max_threads: int,
                 status: int = SIGNALING) -> None:
        self.phase = phase
        self.status = AtomicWord(status)
        self.gray = ConsStack()
        self.in_progress = [None] * max_threads
        self.reclaimed = AtomicWord(0)


def _ensure_state(rt: Runtime) -> PhaseState:
    st = rt.phase_state.value
    if st is None:
        sentinel = PhaseState(0, rt.max_threads, status=DONE)
        rt.phase_state.compare_exchange(None, sentinel)
        st = rt.phase_state.value
    return st


def _arena_for(rt: Runtime, addr: int) -> Arena | None:
    for arena in rt.arenas:
        if arena.contains(addr):
            return arena
    return None


def _gather_global_roots(rt: Runtime) -> set[int]:
    roots: set[int] = set()
    for arena in rt.arenas:
        for cell in arena.global_roots:
            v = cell.value
            if v > 0:
                roots.add(v & ~1)
    return roots


def _current_roots(rt: Runtime) -> set[int]:
    roots = gather_local_roots(rt)
    roots |= _gather_global_roots(rt)
    return roots


def trace(rt: Runtime, roots, phase: int) -> set[int]:
    """Mark the closure of ``roots`` under the registered link offsets.

    Visitation does not prune on the mark bit (a concurrent marker may
    have marked a node without scanning it), so the returned set is the
    full reachable closure regardless of interleavings."""
    stack = [r & ~1 for r in roots]
    visited: set[int] = set()
    while stack:
        addr = stack.pop()
        if addr in visited:
            continue
        arena = _arena_for(rt, addr)
        if arena is None:
            continue
        visited.add(addr)
        arena.mark_table.mark(arena.index_of(addr), phase)
        off = addr - arena.base
        storage = arena.storage
        for w in arena.layout.link_words:
            child = storage[off + w] & ~1
            if child > 0 and child not in visited:
                stack.append(child)
    return visited


def _scan(rt: Runtime, st: PhaseState, addr: int) -> None:
    """Mark and enqueue the unmarked children of one gray node."""
    arena = _arena_for(rt, addr)
    if arena is None:
        return
    hook = rt.hook
    if hook is not None:
        hook(rt.current().index, "trace:scan")
    off = addr - arena.base
    storage = arena.storage
    phase = st.phase
    for w in arena.layout.link_words:
        child = storage[off + w] & ~1
        if child <= 0:
            continue
        child_arena = arena if arena.contains(child) else _arena_for(rt, child)
        if child_arena is None:
            continue
        if child_arena.mark_table.mark(child_arena.index_of(child), phase):
            st.gray.push((child, phase))


def _drain_gray(rt: Runtime, st: PhaseState) -> None:
    me = rt.current().index
    ip = st.in_progress
    gray = st.gray
    while st.status.value == TRACING:
        ip[me] = BUSY
        entry = gray.pop()
        if entry is None:
            ip[me] = None
            return
        addr, phase = entry
        if phase != st.phase:
            ip[me] = None
            continue
        ip[me] = addr
        _scan(rt, st, addr)
        ip[me] = None
    ip[me] = None


def _push_roots(rt: Runtime, st: PhaseState) -> None:
    phase = st.phase
    for r in _current_roots(rt):
        arena = _arena_for(rt, r)
        if arena is not None and arena.mark_table.mark(arena.index_of(r), phase):
            st.gray.push((r, phase))


def _finish_tracing(rt: Runtime, st: PhaseState) -> None:
    # Decisive closure: re-gather the current roots plus every node some
    # helper has announced as in progress, and mark their full closure.
    # Covers children a stalled helper marked but never pushed.
    roots = _current_roots(rt)
    for v in st.in_progress:
        if isinstance(v, int):
            roots.add(v)
    trace(rt, roots, st.phase)


def _drive(rt: Runtime, st: PhaseState) -> None:
    while True:
        s = st.status.value
        if s == SIGNALING:
            init_reclamation(rt, st.phase)
            st.status.compare_exchange(SIGNALING, TRACING)
        elif s == TRACING:
            _push_roots(rt, st)
            _drain_gray(rt, st)
            if st.status.value != TRACING:
                continue
            _finish_tracing(rt, st)
            st.status.compare_exchange(TRACING, SWEEPING)
        elif s == SWEEPING:
            poison = rt.poison
            for arena in rt.arenas:
                n = arena.sweep(st.phase, poison=poison)
                if n:
                    st.reclaimed.add(n)
                    rt.total_reclaimed.add(n)
            st.status.compare_exchange(SWEEPING, DONE)
        else:
            return


def reclamation_phase(rt: Runtime) -> int:
    """Run (or join) one full reclamation phase and return its reclaimed
    count.  Idempotent under concurrent helpers: all observe the same
    final status and each victim is reclaimed exactly once."""
    st = _ensure_state(rt)
    if st.status.value == DONE:
        candidate = PhaseState(st.phase + 1, rt.max_threads)
        rt.phase_state.compare_exchange(st, candidate)
        st = rt.phase_state.value
    _drive(rt, st)
    return st.reclaimed.value


def help(rt: Runtime) -> None:
    """Participate in the in-flight phase, if any, until it is done."""
    st = rt.phase_state.value
    if st is not None and st.status.value != DONE:
        _drive(rt, st)
