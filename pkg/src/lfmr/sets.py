"""Lock-free ordered sets used for evaluation.

Three list algorithms over a shared node shape (key word + successor link
whose low bit is the deletion tag):

* wait-free-search list (``hhs``): searches never write, traversals walk
  straight over logically deleted nodes -- only usable under the tracing
  scheme or the leaky baseline;
* eager-unlink list (``hm``): traversals help disconnect tagged nodes and
  restart from the head on CAS failure -- usable under hazard slots,
  epochs, the tracing scheme, or the leaky baseline;
* run-unlink list (``harris``): updates disconnect a maximal run of
  consecutively tagged nodes with a single CAS -- tracing scheme only.

A hash set is a bucket array of list heads with ``hash = key % buckets``;
every class here takes a ``buckets`` count, so the plain list is just the
one-bucket case.

Keys are non-negative 64-bit integers.  Each bucket owns a head sentinel
(key -1) and all buckets share one tail sentinel (key 2**63), allocated
from the arena at construction and permanently reachable.

The traversal loops intentionally inline the guarded-load protocol (raw
load, then the owner's dirty-flag check that certifies it) instead of
calling :func:`lfmr.runtime.guarded_load` per field: node visits dominate
the running time of every workload.  The fences the protocol calls for
are no-ops in this interpreter, see :mod:`lfmr.atomics`.
"""

from __future__ import annotations

import threading

from .atomics import SharedCell
from .node_pool import (POISON, Arena, NodeLayout, PoolExhausted, alloc,
                        register_global_root)
from .runtime import (Done, OpSpec, Runtime, begin_write_only, end_write_only,
                      restart, run_operation)

KEY_MAX = 1 << 63  # tail sentinel key; real keys are < 2**63
KEY_MIN = -1       # head sentinel key

#: Node shape shared by all variants: word 0 key, word 1 tagged successor.
LIST_NODE_LAYOUT = NodeLayout(node_size=16, link_offsets=(8,))

_PREV, _CUR, _AUX, _SPARE = 0, 1, 2, 3


def _new_node(arena: Arena, key: int, nxt: int) -> int:
    addr = arena.setup_alloc()
    off = addr - arena.base
    arena.storage[off] = key
    arena.storage[off + 1] = nxt
    return addr


class _BucketBase:
    """Shared construction: bucket head sentinels plus one tail sentinel."""

    def __init__(self, arena: Arena, buckets: int = 1) -> None:
        self.arena = arena
        self.buckets = buckets
        self.tail = _new_node(arena, KEY_MAX, 0)
        self.heads = [_new_node(arena, KEY_MIN, self.tail)
                      for _ in range(buckets)]
        self.head_cells = [SharedCell(h) for h in self.heads]
        for cell in self.head_cells:
            register_global_root(arena, cell)
        self.hook = None  # per-visit test hook (tid, point)

    def _bucket(self, key: int) -> int:
        return self.heads[key % self.buckets]

    def live_node_count(self) -> int:
        """Nodes physically in the structure (sentinels included);
        meaningful at quiescence."""
        S = self.arena.storage
        delta = self.arena.base
        n = 1  # shared tail
        for head in self.heads:
            cur = head
            while cur != self.tail:
                n += 1
                cur = S[cur - delta + 1] & -2
        return n


# ---------------------------------------------------------------------------
# Tracing-scheme lists (restartable operations)


class _FaListBase(_BucketBase):
    """Common machinery for the restartable-operation list variants."""

    def __init__(self, runtime: Runtime, arena: Arena, buckets: int = 1) -> None:
        super().__init__(arena, buckets)
        self.runtime = runtime
        runtime.attach_arena(arena)
        # poison-audit builds take the checked (slower) traversal path
        self._checked = runtime.audit is not None
        self._build_ops()

    def register_thread(self):
        return self.runtime.register_thread()

    def contains(self, key: int) -> bool:
        return run_operation(self.runtime, self._op_contains,
                             {"key": key, "head": self._bucket(key)})

    def insert(self, key: int) -> bool:
        return run_operation(self.runtime, self._op_insert,
                             {"key": key, "head": self._bucket(key)})

    def remove(self, key: int) -> bool:
        return run_operation(self.runtime, self._op_remove,
                             {"key": key, "head": self._bucket(key)})

    # -- checked-load helper used by the audit/mutation traversal paths ----

    def _certify(self, ctx, *values) -> None:
        rt = self.runtime
        if not rt.mut_skip_validate and ctx.rec.dirty_phase.value & 1:
            restart(ctx)
        audit = rt.audit
        if audit is not None and POISON in values:
            audit.record(ctx.rec.index, "traverse")
            restart(ctx)


class FaEagerUnlinkList(_FaListBase):
    """Eager-unlink ordered set: traversals disconnect tagged nodes before
    proceeding, restarting the search from the head when a CAS fails."""

    def _build_ops(self):
        arena = self.arena
        S = arena.storage
        delta = arena.base
        rt = self.runtime
        checked = self._checked
        certify = self._certify

        def find(ctx):
            """Returns (prev, cur, k, nxt) at the first untagged node with
            key >= key, or the string "help" after staging an unlink."""
            rec = ctx.rec
            dp = rec.dirty_phase
            vars_ = ctx.vars
            key = vars_["key"]
            hook = self.hook
            refs = ctx.refs
            prev = vars_["head"]
            nr = S[prev - delta + 1]
            if checked:
                certify(ctx, nr)
            elif dp.value & 1:
                restart(ctx)
            cur = nr & -2
            if not checked and hook is None:
                # two visits per dirty check; the speculative follow between
                # checks cannot fault (out-of-range implies dirty, caught)
                try:
                    while True:
                        o = cur - delta
                        k = S[o]
                        nr = S[o + 1]
                        if nr & 1 or k >= key:
                            if dp.value & 1:
                                restart(ctx)
                            if nr & 1:
                                refs[_PREV] = prev
                                refs[_CUR] = cur
                                refs[_AUX] = nr & -2
                                return "help"
                            return prev, cur, k, nr
                        prev = cur
                        cur = nr
                        o = cur - delta
                        k = S[o]
                        nr = S[o + 1]
                        if dp.value & 1:
                            restart(ctx)
                        if nr & 1:
                            refs[_PREV] = prev
                            refs[_CUR] = cur
                            refs[_AUX] = nr & -2
                            return "help"
                        if k >= key:
                            return prev, cur, k, nr
                        prev = cur
                        cur = nr
                except IndexError:
                    if dp.value & 1:
                        restart(ctx)
                    raise
            while True:
                if hook is not None:
                    hook(rec.index, "search:visit")
                o = cur - delta
                k = S[o]
                nr = S[o + 1]
                if checked:
                    certify(ctx, k, nr)
                elif dp.value & 1:
                    restart(ctx)
                if nr & 1:
                    refs[_PREV] = prev
                    refs[_CUR] = cur
                    refs[_AUX] = nr & -2
                    return "help"
                if k >= key:
                    return prev, cur, k, nr
                prev = cur
                cur = nr

        def help_unlink(ctx):
            refs = ctx.refs
            begin_write_only(ctx)
            arena.cas_word(refs[_PREV], 1, refs[_CUR], refs[_AUX])
            end_write_only(ctx, "search")
            return "search"

        def c_search(ctx):
            out = find(ctx)
            if out == "help":
                return "help"
            _, _, k, _ = out
            return Done(k == ctx.vars["key"])

        self._op_contains = OpSpec("contains", 3, ("key", "head"), "search",
                                   {"search": c_search, "help": help_unlink})

        def i_search(ctx):
            out = find(ctx)
            if out == "help":
                return "help"
            refs = ctx.refs
            prev, cur, k, _ = out
            if k == ctx.vars["key"]:
                spare = refs[_SPARE]
                if spare is not None:
                    refs[_SPARE] = None
                    arena.release(spare, poison=rt.poison)
                return Done(False)
            refs[_PREV] = prev
            refs[_CUR] = cur
            if refs[_SPARE] is None:
                refs[_SPARE] = alloc(arena, ctx)
            return "link"

        def i_link(ctx):
            refs = ctx.refs
            begin_write_only(ctx)
            new, cur, prev = refs[_SPARE], refs[_CUR], refs[_PREV]
            arena.write_word(new, 0, ctx.vars["key"])
            arena.write_word(new, 1, cur)
            ok = arena.cas_word(prev, 1, cur, new)
            end_write_only(ctx, "finish" if ok else "search")
            if ok:
                refs[_SPARE] = None
                return "finish"
            return "search"

        self._op_insert = OpSpec("insert", 4, ("key", "head"), "search",
                                 {"search": i_search, "help": help_unlink,
                                  "link": i_link,
                                  "finish": lambda ctx: Done(True)})

        def r_search(ctx):
            out = find(ctx)
            if out == "help":
                return "help"
            refs = ctx.refs
            prev, cur, k, nr = out
            if k != ctx.vars["key"]:
                return Done(False)
            refs[_PREV] = prev
            refs[_CUR] = cur
            refs[_AUX] = nr
            return "tag"

        def r_tag(ctx):
            refs = ctx.refs
            begin_write_only(ctx)
            ok = arena.cas_word(refs[_CUR], 1, refs[_AUX], refs[_AUX] | 1)
            end_write_only(ctx, "unlink" if ok else "search")
            return "unlink" if ok else "search"

        def r_unlink(ctx):
            refs = ctx.refs
            begin_write_only(ctx)
            arena.cas_word(refs[_PREV], 1, refs[_CUR], refs[_AUX])
            end_write_only(ctx, "finish")
            return "finish"

        self._op_remove = OpSpec("remove", 3, ("key", "head"), "search",
                                 {"search": r_search, "help": help_unlink,
                                  "tag": r_tag, "unlink": r_unlink,
                                  "finish": lambda ctx: Done(True)})


class FaWaitFreeSearchList(FaEagerUnlinkList):
    """Ordered set with a wait-free membership query: contains traverses
    straight over logically deleted nodes and never writes; membership
    means "found and untagged".  Updates reuse the eager-unlink machinery
    -- an update that ignored deletion tags could spin forever on a CAS
    against a tagged predecessor left behind by a failed unlink."""

    def _build_ops(self):
        super()._build_ops()
        arena = self.arena
        S = arena.storage
        delta = arena.base
        checked = self._checked
        certify = self._certify

        # contains: a single read-only period, zero shared writes
        def c_search(ctx):
            rec = ctx.rec
            dp = rec.dirty_phase
            key = ctx.vars["key"]
            hook = self.hook
            nr = S[ctx.vars["head"] - delta + 1]
            if checked:
                certify(ctx, nr)
            elif dp.value & 1:
                restart(ctx)
            cur = nr & -2
            if not checked and hook is None:
                # tight traversal, two visits per dirty check: a check
                # certifies every load since the previous one, and the one
                # speculative pointer follow between checks cannot fault
                # (an out-of-range index is caught below and implies dirty)
                try:
                    while True:
                        o = cur - delta
                        k = S[o]
                        nr = S[o + 1]
                        if k >= key:
                            if dp.value & 1:
                                restart(ctx)
                            return Done(k == key and not (nr & 1))
                        o = (nr & -2) - delta
                        k = S[o]
                        nr = S[o + 1]
                        if dp.value & 1:
                            restart(ctx)
                        if k >= key:
                            return Done(k == key and not (nr & 1))
                        cur = nr & -2
                except IndexError:
                    if dp.value & 1:
                        restart(ctx)
                    raise
            while True:
                if hook is not None:
                    hook(rec.index, "search:visit")
                o = cur - delta
                k = S[o]
                nr = S[o + 1]
                if checked:
                    certify(ctx, k, nr)
                elif dp.value & 1:
                    restart(ctx)
                if k >= key:
                    return Done(k == key and not (nr & 1))
                cur = nr & -2

        self._op_contains = OpSpec("contains", 0, ("key", "head"),
                                   "search", {"search": c_search})


class FaRunUnlinkList(_FaListBase):
    """Ordered set whose updates disconnect whole runs of consecutively
    tagged nodes with one CAS.  Searches used by updates snip runs; plain
    membership queries use the wait-free traversal."""

    def _build_ops(self):
        arena = self.arena
        S = arena.storage
        delta = arena.base
        rt = self.runtime
        checked = self._checked
        certify = self._certify

        def search(ctx):
            """Find (left, left_next, right): left is the last untagged
            node with key < key, left_next the raw value of its successor
            link, right the first untagged node with key >= key.  When a
            tagged run separates them, stage a single-CAS unlink and
            return "snip"."""
            rec = ctx.rec
            dp = rec.dirty_phase
            vars_ = ctx.vars
            key = vars_["key"]
            hook = self.hook
            refs = ctx.refs
            left = vars_["head"]
            lnext = S[left - delta + 1]
            if checked:
                certify(ctx, lnext)
            elif dp.value & 1:
                restart(ctx)
            cur = lnext & -2
            if not checked and hook is None:
                while True:
                    o = cur - delta
                    k = S[o]
                    nr = S[o + 1]
                    if dp.value & 1:
                        restart(ctx)
                    if nr & 1:      # tagged: part of a run, skip over it
                        cur = nr & -2
                        continue
                    if k >= key:
                        if lnext != cur:
                            refs[_PREV] = left
                            refs[_CUR] = cur
                            refs[_AUX] = lnext
                            return "snip"
                        return left, lnext, cur, k, nr
                    left = cur
                    lnext = nr
                    cur = nr & -2
            while True:
                if hook is not None:
                    hook(rec.index, "search:visit")
                o = cur - delta
                k = S[o]
                nr = S[o + 1]
                if checked:
                    certify(ctx, k, nr)
                elif dp.value & 1:
                    restart(ctx)
                if nr & 1:          # tagged: part of a run, skip over it
                    cur = nr & -2
                    continue
                if k >= key:
                    if lnext != cur:        # a run separates left and cur
                        refs[_PREV] = left
                        refs[_CUR] = cur
                        refs[_AUX] = lnext
                        return "snip"
                    return left, lnext, cur, k, nr
                left = cur
                lnext = nr
                cur = nr & -2

        def snip(ctx):
            # one CAS disconnects the whole tagged run between left and right
            refs = ctx.refs
            begin_write_only(ctx)
            arena.cas_word(refs[_PREV], 1, refs[_AUX], refs[_CUR])
            end_write_only(ctx, "search")
            return "search"

        # membership: wait-free traversal, ignores runs entirely
        def c_search(ctx):
            rec = ctx.rec
            dp = rec.dirty_phase
            key = ctx.vars["key"]
            hook = self.hook
            cur = S[ctx.vars["head"] - delta + 1]
            if checked:
                certify(ctx, cur)
            elif dp.value & 1:
                restart(ctx)
            cur &= -2
            if not checked and hook is None:
                while True:
                    o = cur - delta
                    k = S[o]
                    nr = S[o + 1]
                    if dp.value & 1:
                        restart(ctx)
                    if k >= key:
                        return Done(k == key and not (nr & 1))
                    cur = nr & -2
            while True:
                if hook is not None:
                    hook(rec.index, "search:visit")
                o = cur - delta
                k = S[o]
                nr = S[o + 1]
                if checked:
                    certify(ctx, k, nr)
                elif dp.value & 1:
                    restart(ctx)
                if k >= key:
                    return Done(k == key and not (nr & 1))
                cur = nr & -2

        self._op_contains = OpSpec("contains", 0, ("key", "head"),
                                   "search", {"search": c_search})

        def i_search(ctx):
            out = search(ctx)
            if out == "snip":
                return "snip"
            refs = ctx.refs
            left, lnext, right, k, _ = out
            if k == ctx.vars["key"]:
                spare = refs[_SPARE]
                if spare is not None:
                    refs[_SPARE] = None
                    arena.release(spare, poison=rt.poison)
                return Done(False)
            refs[_PREV] = left
            refs[_CUR] = right
            if refs[_SPARE] is None:
                refs[_SPARE] = alloc(arena, ctx)
            return "link"

        def i_link(ctx):
            refs = ctx.refs
            begin_write_only(ctx)
            new, right, left = refs[_SPARE], refs[_CUR], refs[_PREV]
            arena.write_word(new, 0, ctx.vars["key"])
            arena.write_word(new, 1, right)
            ok = arena.cas_word(left, 1, right, new)
            end_write_only(ctx, "finish" if ok else "search")
            if ok:
                refs[_SPARE] = None
                return "finish"
            return "search"

        self._op_insert = OpSpec("insert", 4, ("key", "head"), "search",
                                 {"search": i_search, "snip": snip,
                                  "link": i_link,
                                  "finish": lambda ctx: Done(True)})

        def r_search(ctx):
            out = search(ctx)
            if out == "snip":
                return "snip"
            refs = ctx.refs
            left, _, right, k, nr = out
            if k != ctx.vars["key"]:
                return Done(False)
            refs[_PREV] = left
            refs[_CUR] = right
            refs[_AUX] = nr
            return "tag"

        def r_tag(ctx):
            refs = ctx.refs
            begin_write_only(ctx)
            ok = arena.cas_word(refs[_CUR], 1, refs[_AUX], refs[_AUX] | 1)
            end_write_only(ctx, "unlink" if ok else "search")
            return "unlink" if ok else "search"

        def r_unlink(ctx):
            refs = ctx.refs
            begin_write_only(ctx)
            arena.cas_word(refs[_PREV], 1, refs[_CUR], refs[_AUX])
            end_write_only(ctx, "finish")
            return "finish"

        self._op_remove = OpSpec("remove", 3, ("key", "head"), "search",
                                 {"search": r_search, "snip": snip,
                                  "tag": r_tag, "unlink": r_unlink,
                                  "finish": lambda ctx: Done(True)})


# ---------------------------------------------------------------------------
# Hazard-slot list (eager-unlink algorithm)


class HpEagerUnlinkList(_BucketBase):
    """Eager-unlink list under hazard-slot reclamation."""

    def __init__(self, scheme, arena: Arena, buckets: int = 1) -> None:
        super().__init__(arena, buckets)
        self.hp = scheme

    def register_thread(self) -> int:
        return self.hp.register()

    def _alloc(self, tid: int) -> int:
        i = self.arena.try_pop_free()
        if i is None:
            self.hp.scan(tid)  # flush own retired list
            i = self.arena.try_pop_free()
            if i is None:
                raise PoolExhausted("pool exhausted under hazard-slot scheme")
        return self.arena._claim(i)

    def _find(self, tid: int, key: int, head: int):
        """Returns (found, prev, cur, next); prev/cur protected by slots
        0/1.  Helps unlink tagged nodes, retiring each one it removes."""
        arena = self.arena
        S = arena.storage
        delta = arena.base
        slots = self.hp.slots[tid]
        hook = self.hook
        while True:
            prev = head  # sentinel: never retired, needs no protection
            slots[0] = None
            cur = S[prev - delta + 1] & -2
            retry = False
            while True:
                if hook is not None:
                    hook(tid, "search:visit")
                slots[1] = cur  # publish, then re-validate reachability
                if S[prev - delta + 1] != cur:
                    retry = True
                    break
                o = cur - delta
                nxt = S[o + 1]
                k = S[o]
                if S[prev - delta + 1] != cur:
                    retry = True
                    break
                if nxt & 1:
                    if arena.cas_word(prev, 1, cur, nxt & -2):
                        self.hp.retire(tid, cur)
                        cur = nxt & -2
                        continue
                    retry = True
                    break
                if k >= key:
                    return k == key, prev, cur, nxt
                slots[0] = cur
                prev = cur
                cur = nxt
            if retry:
                continue

    def contains(self, key: int, tid: int | None = None) -> bool:
        tid = self.hp.current() if tid is None else tid
        found, _, _, _ = self._find(tid, key, self._bucket(key))
        self.hp.clear(tid)
        return found

    def insert(self, key: int, tid: int | None = None) -> bool:
        tid = self.hp.current() if tid is None else tid
        arena = self.arena
        head = self._bucket(key)
        new = None
        try:
            while True:
                found, prev, cur, _ = self._find(tid, key, head)
                if found:
                    if new is not None:
                        arena.release(new)
                    return False
                if new is None:
                    new = self._alloc(tid)
                    arena.write_word(new, 0, key)
                arena.write_word(new, 1, cur)
                if arena.cas_word(prev, 1, cur, new):
                    return True
        finally:
            self.hp.clear(tid)

    def remove(self, key: int, tid: int | None = None) -> bool:
        tid = self.hp.current() if tid is None else tid
        arena = self.arena
        head = self._bucket(key)
        try:
            while True:
                found, prev, cur, nxt = self._find(tid, key, head)
                if not found:
                    return False
                if not arena.cas_word(cur, 1, nxt, nxt | 1):
                    continue
                if arena.cas_word(prev, 1, cur, nxt):
                    self.hp.retire(tid, cur)
                return True
        finally:
            self.hp.clear(tid)


# ---------------------------------------------------------------------------
# Epoch-based list (eager-unlink algorithm)


class EbrEagerUnlinkList(_BucketBase):
    """Eager-unlink list under epoch-based reclamation."""

    def __init__(self, scheme, arena: Arena, buckets: int = 1) -> None:
        super().__init__(arena, buckets)
        self.ebr = scheme

    def register_thread(self) -> int:
        return self.ebr.register()

    def _alloc(self) -> int:
        i = self.arena.try_pop_free()
        if i is None:
            raise PoolExhausted("pool exhausted under epoch scheme")
        return self.arena._claim(i)

    def _find(self, tid: int, key: int, head: int):
        arena = self.arena
        S = arena.storage
        delta = arena.base
        hook = self.hook
        while True:
            prev = head
            cur = S[prev - delta + 1] & -2
            retry = False
            while True:
                if hook is not None:
                    hook(tid, "search:visit")
                o = cur - delta
                k = S[o]
                nxt = S[o + 1]
                if nxt & 1:
                    if arena.cas_word(prev, 1, cur, nxt & -2):
                        self.ebr.retire(tid, cur)
                        cur = nxt & -2
                        continue
                    retry = True
                    break
                if k >= key:
                    return k == key, prev, cur, nxt
                prev = cur
                cur = nxt
            if retry:
                continue

    def contains(self, key: int, tid: int | None = None) -> bool:
        tid = self.ebr.current() if tid is None else tid
        self.ebr.enter(tid)
        try:
            found, _, _, _ = self._find(tid, key, self._bucket(key))
            return found
        finally:
            self.ebr.exit(tid)

    def insert(self, key: int, tid: int | None = None) -> bool:
        tid = self.ebr.current() if tid is None else tid
        arena = self.arena
        head = self._bucket(key)
        self.ebr.enter(tid)
        new = None
        try:
            while True:
                found, prev, cur, _ = self._find(tid, key, head)
                if found:
                    if new is not None:
                        arena.release(new)
                    return False
                if new is None:
                    new = self._alloc()
                    arena.write_word(new, 0, key)
                arena.write_word(new, 1, cur)
                if arena.cas_word(prev, 1, cur, new):
                    return True
        finally:
            self.ebr.exit(tid)

    def remove(self, key: int, tid: int | None = None) -> bool:
        tid = self.ebr.current() if tid is None else tid
        arena = self.arena
        head = self._bucket(key)
        self.ebr.enter(tid)
        try:
            while True:
                found, prev, cur, nxt = self._find(tid, key, head)
                if not found:
                    return False
                if not arena.cas_word(cur, 1, nxt, nxt | 1):
                    continue
                if arena.cas_word(prev, 1, cur, nxt):
                    self.ebr.retire(tid, cur)
                return True
        finally:
            self.ebr.exit(tid)


# ---------------------------------------------------------------------------
# Leaky baseline (no reclamation at all)


class NrList(_BucketBase):
    """Leaky list: plain loads, no read protocol, removed nodes are never
    reused.  ``variant`` selects the traversal style so it pairs with the
    scheme under comparison."""

    def __init__(self, arena: Arena, buckets: int = 1,
                 variant: str = "hhs") -> None:
        super().__init__(arena, buckets)
        if variant not in ("hhs", "hm", "harris"):
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self._tid = threading.local()
        self._next_tid = [0]
        self._tid_lock = threading.Lock()

    def register_thread(self) -> int:
        tid = getattr(self._tid, "v", None)
        if tid is None:
            with self._tid_lock:
                tid = self._next_tid[0]
                self._next_tid[0] += 1
            self._tid.v = tid
        return tid

    def _alloc(self) -> int:
        i = self.arena.try_pop_free()
        if i is None:
            raise PoolExhausted(
                "leaky baseline pool exhausted; size the pool for the run")
        return self.arena._claim(i)

    def contains(self, key: int) -> bool:
        if self.variant == "hm":
            found, _, _, _ = self._find(key, self._bucket(key))
            return found
        # wait-free flavour: walk over tagged nodes without writing
        S = self.arena.storage
        delta = self.arena.base
        hook = self.hook
        cur = S[self._bucket(key) - delta + 1] & -2
        if hook is None:
            while True:
                o = cur - delta
                k = S[o]
                nr = S[o + 1]
                if k >= key:
                    return k == key and not (nr & 1)
                cur = nr & -2
        while True:
            hook(getattr(self._tid, "v", 0), "search:visit")
            o = cur - delta
            k = S[o]
            nr = S[o + 1]
            if k >= key:
                return k == key and not (nr & 1)
            cur = nr & -2

    def _find(self, key: int, head: int):
        # updates help unlink tagged nodes (the unlinked node just leaks);
        # ignoring tags would let an update spin forever on a CAS against
        # a tagged predecessor
        arena = self.arena
        S = arena.storage
        delta = arena.base
        hook = self.hook
        while True:
            prev = head
            cur = S[prev - delta + 1] & -2
            retry = False
            if hook is None:
                while True:
                    o = cur - delta
                    k = S[o]
                    nr = S[o + 1]
                    if nr & 1:
                        if arena.cas_word(prev, 1, cur, nr & -2):
                            cur = nr & -2
                            continue
                        retry = True
                        break
                    if k >= key:
                        return k == key, prev, cur, nr
                    prev = cur
                    cur = nr
            else:
                while True:
                    hook(getattr(self._tid, "v", 0), "search:visit")
                    o = cur - delta
                    k = S[o]
                    nr = S[o + 1]
                    if nr & 1:
                        if arena.cas_word(prev, 1, cur, nr & -2):
                            cur = nr & -2
                            continue
                        retry = True
                        break
                    if k >= key:
                        return k == key, prev, cur, nr
                    prev = cur
                    cur = nr
            if retry:
                continue

    def insert(self, key: int) -> bool:
        arena = self.arena
        head = self._bucket(key)
        new = None
        while True:
            found, prev, cur, _ = self._find(key, head)
            if found:
                if new is not None:
                    arena.release(new)
                return False
            if new is None:
                new = self._alloc()
                arena.write_word(new, 0, key)
            arena.write_word(new, 1, cur)
            if arena.cas_word(prev, 1, cur, new):
                return True

    def remove(self, key: int) -> bool:
        arena = self.arena
        head = self._bucket(key)
        while True:
            found, prev, cur, nr = self._find(key, head)
            if not found:
                return False
            if arena.cas_word(cur, 1, nr, nr | 1):
                arena.cas_word(prev, 1, cur, nr)  # unlink; node leaks
                return True


# ---------------------------------------------------------------------------
# construction helpers


_FA_VARIANTS = {
    "hhs": FaWaitFreeSearchList,
    "hm": FaEagerUnlinkList,
    "harris": FaRunUnlinkList,
}


def make_set(structure: str, variant: str, scheme: str, *, arena: Arena,
             runtime: Runtime | None = None, scheme_state=None,
             buckets: int = 10000):
    """Build the configured set.  ``structure`` is "list" or "hash";
    hash uses ``buckets`` bucket heads, list uses one."""
    if structure not in ("list", "hash"):
        raise ValueError(f"unknown structure {structure!r}")
    if variant not in _FA_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    nbuckets = buckets if structure == "hash" else 1
    if scheme == "fa":
        if runtime is None:
            raise ValueError("tracing scheme requires a runtime")
        return _FA_VARIANTS[variant](runtime, arena, nbuckets)
    if scheme == "hp":
        if variant != "hm":
            raise ValueError("hazard slots support only the hm variant")
        return HpEagerUnlinkList(scheme_state, arena, nbuckets)
    if scheme == "ebr":
        if variant != "hm":
            raise ValueError("epochs support only the hm variant")
        return EbrEagerUnlinkList(scheme_state, arena, nbuckets)
    if scheme == "nr":
        return NrList(arena, nbuckets, variant=variant)
    raise ValueError(f"unknown scheme {scheme!r}")
