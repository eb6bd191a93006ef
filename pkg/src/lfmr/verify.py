"""Verification harness: event-log oracles, cooperative suspension
scripts, restart injection, and seeded-bug scenarios.

Everything here treats the structures as black boxes plus the runtime's
test hook.  The hook fires at labelled program points (``search:visit``
per traversed node, ``label:<name>`` per dispatched step, ``bwo:mid``
between the publication and the dirty check of a write-only entry,
``trace:scan`` per scanned gray node), which is enough to park a thread
at a chosen instant or to inject a restart, without any special paths in
the structures themselves.
"""

from __future__ import annotations

import random
import threading
from collections import defaultdict

from .atomics import AtomicWord
from .node_pool import POISON
from .runtime import Runtime

# ---------------------------------------------------------------------------
# event log + history oracles


class EventLog:
    """Append-only log of completed operations with start/end stamps from
    one global tick counter, so disjointness of two operations in real
    time is decidable from the log alone."""

    __slots__ = ("events", "_clock", "_lock")

    def __init__(self) -> None:
        self.events: list[tuple] = []
        self._clock = AtomicWord(0)
        self._lock = threading.Lock()

    def tick(self) -> int:
        return self._clock.add(1)

    def record(self, tid: int, op: str, key: int, result: bool,
               start: int, end: int) -> None:
        with self._lock:
            self.events.append((tid, op, key, result, start, end))

    def run_op(self, tid: int, op_name: str, fn, key: int) -> bool:
        start = self.tick()
        result = fn(key)
        end = self.tick()
        self.record(tid, op_name, key, result, start, end)
        return result


def alternation_violations(log: EventLog, initial_keys=()) -> list[str]:
    """Per key, successful inserts and removes must alternate in
    linearization order.  Real-time order is only known up to operation
    intervals, so a disjoint same-type pair is flagged only when no
    opposite-type success has an interval that could place its
    linearization point between the two -- that test is sound (every
    flag is a genuine violation) and still catches an update whose
    effect was applied twice."""
    initial = set(initial_keys)
    per_key: dict[int, list[tuple]] = defaultdict(list)
    for tid, op, key, result, start, end in log.events:
        if result and op in ("insert", "remove"):
            per_key[key].append((start, end, op, tid))
    out = []
    for key, evs in per_key.items():
        evs.sort()
        by_type = {"insert": [], "remove": []}
        for e in evs:
            by_type[e[2]].append(e)
        # the first success must match the initial state unless an
        # opposite-type op was in flight early enough to precede it
        first = evs[0]
        expect = "remove" if key in initial else "insert"
        if first[2] != expect:
            if not any(c[0] <= first[1] for c in by_type[expect]):
                out.append(f"key {key}: first success is {first[2]}, "
                           f"expected {expect}")
        for a, b in zip(evs, evs[1:]):
            if b[0] > a[1] and a[2] == b[2]:
                need = "remove" if a[2] == "insert" else "insert"
                if not any(c[1] >= a[0] and c[0] <= b[1]
                           for c in by_type[need]):
                    out.append(f"key {key}: two successful {a[2]}s with "
                               f"no possible {need} between them")
    return out


def membership_violations(log: EventLog, final_contains,
                          initial_keys=()) -> list[str]:
    """Conservation oracle: per key, initial membership plus successful
    inserts minus successful removes must be 0 or 1 and must equal the
    quiescent membership reported by ``final_contains(key)``."""
    initial = set(initial_keys)
    delta: dict[int, int] = defaultdict(int)
    for tid, op, key, result, start, end in log.events:
        if result and op == "insert":
            delta[key] += 1
        elif result and op == "remove":
            delta[key] -= 1
    out = []
    keys = set(delta) | initial
    for key in sorted(keys):
        expected = (1 if key in initial else 0) + delta.get(key, 0)
        if expected not in (0, 1):
            out.append(f"key {key}: net membership {expected} is not 0/1 "
                       f"(an update took effect more than once)")
            continue
        actual = 1 if final_contains(key) else 0
        if actual != expected:
            out.append(f"key {key}: final membership {actual}, "
                       f"expected {expected}")
    return out


def structure_violations(lst) -> list[str]:
    """Walk every bucket of a quiescent list/hash set: untagged keys must
    be strictly increasing, the walk must reach the tail within the arena
    capacity, and no reachable word may hold the poison pattern."""
    arena = lst.arena
    S, delta = arena.storage, arena.base
    out = []
    for b, head in enumerate(lst.heads):
        cur = S[head - delta + 1] & -2
        last = -1
        for _ in range(arena.capacity + 2):
            if cur == lst.tail:
                break
            if not arena.contains(cur):
                out.append(f"bucket {b}: link escapes the arena")
                break
            o = cur - delta
            k, nr = S[o], S[o + 1]
            if k == POISON or nr == POISON:
                out.append(f"bucket {b}: reachable poisoned node")
                break
            if not (nr & 1):
                if k <= last:
                    out.append(f"bucket {b}: keys not strictly increasing "
                               f"({last} then {k})")
                    break
                last = k
            cur = nr & -2
        else:
            out.append(f"bucket {b}: walk did not terminate (cycle)")
    return out


# ---------------------------------------------------------------------------
# cooperative suspension scripts


class SuspensionScript:
    """Parks threads at scripted hook points.

    Directives are ``(tid, point, occurrence)``: the given thread blocks
    the ``occurrence``-th time (1-based) it reaches ``point``, until
    :meth:`release` is called for it.  The text form accepted by the CLI
    is ``tid:point:occurrence``, e.g. ``1:search:visit:2``
    (the point itself may contain colons; the first and last fields are
    the integers).
    """

    def __init__(self, directives=()) -> None:
        self._armed: dict[tuple[int, str], int] = {}
        self._seen: dict[tuple[int, str], int] = defaultdict(int)
        self._gates: dict[int, threading.Event] = {}
        self._parked: dict[int, threading.Event] = {}
        self._lock = threading.Lock()
        self.chain = None  # optional second hook to run first
        for tid, point, occurrence in directives:
            self.arm(tid, point, occurrence)

    @classmethod
    def parse(cls, text: str) -> "SuspensionScript":
        directives = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            fields = part.split(":")
            if len(fields) < 3:
                raise ValueError(f"bad script directive {part!r}; "
                                 f"expected tid:point:occurrence")
            directives.append((int(fields[0]), ":".join(fields[1:-1]),
                               int(fields[-1])))
        return cls(directives)

    def arm(self, tid: int, point: str, occurrence: int = 1) -> None:
        with self._lock:
            self._armed[(tid, point)] = occurrence
            self._gates[tid] = threading.Event()
            self._parked[tid] = threading.Event()

    def hook(self, tid: int, point: str) -> None:
        if self.chain is not None:
            self.chain(tid, point)
        key = (tid, point)
        target = self._armed.get(key)
        if target is None:
            return
        with self._lock:
            self._seen[key] += 1
            if self._seen[key] != target:
                return
            del self._armed[key]
        self._parked[tid].set()
        self._gates[tid].wait()

    def wait_parked(self, tid: int, timeout: float = 30.0) -> bool:
        return self._parked[tid].wait(timeout)

    def release(self, tid: int) -> None:
        self._gates[tid].set()

    def release_all(self) -> None:
        for gate in self._gates.values():
            gate.set()


# ---------------------------------------------------------------------------
# restart injection


class RestartInjector:
    """Hook that sets the calling thread's own dirty flag at random hook
    points.  The thread then takes the full restart path (help, clear,
    restore, re-dispatch) even though no real phase ran, which exercises
    exactly-once behaviour of every checkpoint placement."""

    def __init__(self, rt: Runtime, rate: float, seed: int) -> None:
        self.rt = rt
        self.rate = rate
        self._rngs = [random.Random(f"{seed}:{t}") for t in range(rt.max_threads)]
        self.injected = AtomicWord(0)

    def __call__(self, tid: int, point: str) -> None:
        if self._rngs[tid].random() >= self.rate:
            return
        rec = self.rt.records[tid]
        if rec is None:
            return
        dp = rec.dirty_phase
        w = dp.value
        if not (w & 1):
            if dp.compare_exchange(w, w | 1):
                self.injected.add(1)


# ---------------------------------------------------------------------------
# scripted seeded-bug scenarios (used by the poison-audit sensitivity test)


def _scenario_list(poison: bool, **rt_flags):
    # local imports: sets depends on runtime, which this module also serves
    from .node_pool import arena_new
    from .sets import LIST_NODE_LAYOUT, FaWaitFreeSearchList

    rt = Runtime(max_threads=8, poison=poison)
    for flag, value in rt_flags.items():
        setattr(rt, flag, value)
    arena = arena_new(64, LIST_NODE_LAYOUT)
    lst = FaWaitFreeSearchList(rt, arena)
    return rt, arena, lst


def scenario_missing_validation(mutated: bool) -> dict:
    """A reader is parked one node short of a key that gets unlinked and
    reclaimed under it.  The intact protocol restarts on the dirty flag;
    the build with validation elided certifies the poison pattern.

    Returns {"violations": int, "result": bool}.
    """
    from .tracer import reclamation_phase

    rt, arena, lst = _scenario_list(poison=True, mut_skip_validate=mutated)
    rt.register_thread()
    for key in (10, 20, 30):
        lst.insert(key)

    script = SuspensionScript([(1, "search:visit", 2)])
    rt.hook = script.hook
    lst.hook = script.hook

    out = {}

    def reader():
        rt.register_thread()  # thread index 1
        out["result"] = lst.contains(30)

    t = threading.Thread(target=reader)
    t.start()
    assert script.wait_parked(1), "reader never reached the scripted point"
    # node 20 (the reader's current node) is unlinked, then reclaimed
    lst.remove(20)
    reclamation_phase(rt)
    script.release(1)
    t.join()
    out["violations"] = len(rt.audit.violations)
    return out


def scenario_reordered_publication(mutated: bool) -> dict:
    """An inserter is parked between its dirty check and its publication
    (the mutated order).  A reclamation phase then misses its fresh node,
    which is swept and handed to a second inserter; when the first thread
    resumes, both write the same node.  The intact protocol publishes
    before checking, so the node is gathered as a root and survives.

    Returns {"violations": int} where violations are structural.
    """
    from .tracer import reclamation_phase

    rt, arena, lst = _scenario_list(poison=True,
                                    mut_reorder_publish=mutated)
    rt.register_thread()
    for key in (10, 30):
        lst.insert(key)

    script = SuspensionScript([(1, "bwo:mid", 1)])
    rt.hook = script.hook
    lst.hook = script.hook

    def inserter():
        rt.register_thread()  # thread index 1
        lst.insert(20)

    t = threading.Thread(target=inserter)
    t.start()
    assert script.wait_parked(1), "inserter never reached the scripted point"
    # the parked thread's fresh node is unreachable iff it was not
    # published; a phase now decides its fate
    reclamation_phase(rt)
    lst.insert(40)  # reuses the swept node in the mutated build
    script.release(1)
    t.join()
    violations = structure_violations(lst)
    if not violations:
        # only probe membership on a structurally sound list; a broken
        # one may contain a cycle and diverge the traversal
        present = {k for k in (10, 20, 30, 40) if lst.contains(k)}
        if present != {10, 20, 30, 40}:
            violations.append(f"final membership {sorted(present)}, "
                              f"expected [10, 20, 30, 40]")
    return {"violations": len(violations), "detail": violations}


# ---------------------------------------------------------------------------
# swap-chain exactly-once check


def build_swap_chain_op(cells):
    """Operation that swaps its input token through every cell in turn
    and returns the value swapped out of the last cell.

    Each swap is followed by a handoff step that republishes the swapped-
    out value as the next step's input inside a (write-free) write-only
    bracket, so a restart landing between two swaps always resumes with
    the correct token: the checkpointed label and the published frame
    move together, and no CAS can be replayed with a consumed token.
    """
    from .runtime import (Done, OpSpec, begin_write_only, emulated_swap,
                          end_write_only)

    n = len(cells)
    steps = {}

    def make_swap(i: int):
        cell = cells[i]
        label = f"swap{i}"

        def step(ctx):
            emulated_swap(ctx, cell, ctx.refs[0], 1, label, f"hand{i}")
            return f"hand{i}"
        return step

    def make_hand(i: int, nxt: str):
        def step(ctx):
            refs = ctx.refs
            refs[0] = refs[1]
            refs[1] = None
            begin_write_only(ctx)
            end_write_only(ctx, nxt)
            return nxt
        return step

    for i in range(n):
        steps[f"swap{i}"] = make_swap(i)
        steps[f"hand{i}"] = make_hand(i, f"swap{i + 1}" if i + 1 < n
                                      else "finish")
    steps["finish"] = lambda ctx: Done(ctx.refs[0])
    return OpSpec("swap_chain", 2, ("token",), "swap0", steps)


def swap_chain_check(n_cells: int, n_threads: int = 4,
                     ops_per_thread: int = 200, seed: int = 1,
                     inject_rate: float = 0.05) -> dict:
    """Run concurrent swap chains under restart injection and check value
    conservation: every token appears exactly once across the final cell
    contents and the collected return values."""
    from .atomics import SharedCell
    from .runtime import run_operation

    rt = Runtime(max_threads=n_threads + 1)
    initial = [2 * (i + 1) for i in range(n_cells)]
    cells = [SharedCell(v) for v in initial]
    op = build_swap_chain_op(cells)
    injector = RestartInjector(rt, inject_rate, seed)
    rt.hook = injector

    base = 2 * (n_cells + 1)
    injected: list[list[int]] = [[] for _ in range(n_threads)]
    collected: list[list[int]] = [[] for _ in range(n_threads)]
    errors: list[str] = []

    def worker(t: int) -> None:
        try:
            rt.register_thread()
            for j in range(ops_per_thread):
                token = base + 2 * (t * ops_per_thread + j)
                injected[t].append(token)
                out = run_operation(rt, op, {"token": token},
                                    ref_inputs=(token,))
                collected[t].append(out)
        except Exception as exc:  # surfaced in the result
            errors.append(f"thread {t}: {exc!r}")

    threads = [threading.Thread(target=worker, args=(t,))
               for t in range(n_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    put = sorted(initial + [v for lst in injected for v in lst])
    got = sorted([c.value for c in cells]
                 + [v for lst in collected for v in lst])
    ok = not errors and put == got
    return {"ok": ok, "errors": errors, "injected_restarts":
            injector.injected.value, "put": len(put), "got": len(got),
            "mismatch": [] if put == got else
            sorted(set(put) ^ set(got))[:10]}


# ---------------------------------------------------------------------------
# write-discipline check


def write_discipline_violations(rt: Runtime) -> list[str]:
    """Every logged data-structure store/CAS must have happened inside a
    write-only period.  Requires ``rt.write_log`` to have been a list for
    the duration of the run."""
    out = []
    for tid, entry, in_write_only in rt.write_log or ():
        if not in_write_only:
            out.append(f"thread {tid}: shared write {entry} outside a "
                       f"write-only period")
    return out
