"""Per-thread protocol for lock-free root gathering with restartable reads.

Each registered thread owns:

* a packed dirty/phase word -- low 8 bits hold the dirty flag, the high
  56 bits the index of the last reclamation phase that signalled it;
* two frames of 7 hazard slots, laid out as one flat 16-slot array so the
  i-th slot of the current frame is ``slots[arbiter + i]`` with the
  arbiter encoded as 1 or 9 (flipping is XOR with 8);
* a checkpoint holding the operation's non-reference locals and a resume
  label.

Execution of a data-structure operation alternates read-only periods
(loads validated against the dirty flag, restartable from the checkpoint)
and write-only periods (all live references published to the inactive
frame before the first store).  An operation is expressed as a step
function per label; :func:`run_operation` drives it and re-dispatches at
the checkpointed label whenever a restart is signalled.
"""

from __future__ import annotations

import threading
from typing import Callable

from .atomics import AtomicRef, AtomicWord, SharedCell, fence_acquire, fence_seq_cst
from .node_pool import POISON

SLOTS_PER_FRAME = 7
MARKER = -1  # frame 1 slot 0 sentinel: "this thread holds no roots"
MAX_PHASE = (1 << 56) - 1

_FRAME1_SLOT0 = 9  # arbiter encoding: frame 0 base 1, frame 1 base 9


class OperationError(RuntimeError):
    """Operation lifecycle violation (nested begin, too many refs, ...)."""


class RestartSignal(Exception):
    """Raised by :func:`restart`; caught by the operation driver, which
    re-dispatches at the carried resume label.  Never escapes to callers."""

    def __init__(self, resume: str) -> None:
        super().__init__(resume)
        self.resume = resume


class Done:
    """Terminal step result wrapping the operation's return value."""

    __slots__ = ("value",)

    def __init__(self, value) -> None:
        self.value = value


def encode_dirty_phase(dirty: bool, phase: int) -> int:
    if not 0 <= phase <= MAX_PHASE:
        raise ValueError(f"phase {phase} out of 56-bit range")
    return (phase << 8) | (1 if dirty else 0)


def decode_dirty_phase(word: int) -> tuple[bool, int]:
    return bool(word & 1), word >> 8


class OpSpec:
    """Restartable operation description.

    ``steps`` maps each label to a callable taking the execution context
    and returning either the next label or a :class:`Done`.  Labels that
    begin read-only periods are the only valid resume targets.
    """

    __slots__ = ("name", "num_refs", "var_names", "entry", "steps")

    def __init__(self, name: str, num_refs: int, var_names: tuple[str, ...],
                 entry: str, steps: dict[str, Callable]) -> None:
        if num_refs > SLOTS_PER_FRAME:
            raise OperationError(
                f"operation {name!r} declares {num_refs} reference "
                f"variables; at most {SLOTS_PER_FRAME} are supported")
        self.name = name
        self.num_refs = num_refs
        self.var_names = tuple(var_names)
        self.entry = entry
        self.steps = steps


class ThreadRecord:
    """Per-thread protocol state.  Only ``dirty_phase`` and ``slots`` are
    ever touched by other threads; everything else is thread-private."""

    __slots__ = ("index", "dirty_phase", "slots", "arbiter", "checkpoint",
                 "op_active", "in_write_only", "last_phase", "_ctx_cache")

    def __init__(self, index: int) -> None:
        self.index = index
        self.dirty_phase = AtomicWord(0)
        self.slots = [None] * 16  # pad slot 0/8; frames at 1..7 and 9..15
        self.slots[_FRAME1_SLOT0] = MARKER
        self.arbiter = 1
        self.checkpoint = ("", ())
        self.op_active = False
        self.in_write_only = False
        self.last_phase = 0
        self._ctx_cache = {}


class AuditState:
    """Collects certified-value poison sightings during verification runs."""

    __slots__ = ("violations", "_lock")

    def __init__(self) -> None:
        self.violations = []
        self._lock = threading.Lock()

    def record(self, thread_index: int, where: str) -> None:
        with self._lock:
            self.violations.append((thread_index, where))


class Runtime:
    """Shared registry: phase counter, thread records, attached arenas.

    ``hook`` is an optional test-harness callback ``(thread_index, point)``
    invoked at labelled program points; ``mut_*`` flags enable seeded-bug
    builds used to prove detector sensitivity.
    """

    def __init__(self, max_threads: int = 64, poison: bool = False) -> None:
        self.max_threads = max_threads
        self.records: list[ThreadRecord | None] = [None] * max_threads
        self.phase_counter = AtomicWord(0)
        self.phase_state = AtomicRef(None)  # managed by the tracer module
        self.total_reclaimed = AtomicWord(0)
        self.arenas = []
        self.poison = poison
        self.audit: AuditState | None = AuditState() if poison else None
        self.hook = None
        self.write_log: list | None = None
        self.mut_skip_validate = False
        self.mut_reorder_publish = False
        self._reg_lock = threading.Lock()
        self._count = 0
        self._tls = threading.local()

    def register_thread(self) -> ThreadRecord:
        """Register the calling thread; idempotent per thread."""
        rec = getattr(self._tls, "rec", None)
        if rec is not None:
            return rec
        with self._reg_lock:
            if self._count >= self.max_threads:
                raise OperationError("thread registry full")
            rec = ThreadRecord(self._count)
            rec.last_phase = self.phase_counter.value
            self.records[self._count] = rec
            self._count += 1
        self._tls.rec = rec
        return rec

    def current(self) -> ThreadRecord:
        rec = getattr(self._tls, "rec", None)
        if rec is None:
            raise OperationError("calling thread is not registered")
        return rec

    def attach_arena(self, arena) -> None:
        arena._runtime = self
        if arena not in self.arenas:
            self.arenas.append(arena)

    def note_write(self, entry) -> None:
        """Write-discipline log hook: every data-structure store/CAS must
        happen inside a write-only period."""
        log = self.write_log
        if log is None:
            return
        rec = getattr(self._tls, "rec", None)
        tid = rec.index if rec is not None else -1
        ok = rec.in_write_only if rec is not None else False
        log.append((tid, entry, ok))


class ExecutionContext:
    """Handle through which one operation performs guarded loads,
    write-only brackets and restarts.  Cached per (thread, operation)."""

    __slots__ = ("runtime", "rec", "op", "refs", "vars")

    def __init__(self, runtime: Runtime, rec: ThreadRecord, op: OpSpec) -> None:
        self.runtime = runtime
        self.rec = rec
        self.op = op
        self.refs: list = [None] * op.num_refs
        self.vars: dict = {}


# ---------------------------------------------------------------------------
# phase signalling


def init_reclamation(rt: Runtime, target: int | None = None) -> int:
    """Advance the shared phase counter by one (exactly one advance even
    under contention) and set every registered thread's dirty flag, each
    via at most one successful CAS per phase.  Returns the phase index."""
    if target is None:
        rec = rt.current()
        lp = rec.last_phase
        rt.phase_counter.compare_exchange(lp, lp + 1)
        lp = rt.phase_counter.value
        rec.last_phase = lp
    else:
        rt.phase_counter.compare_exchange(target - 1, target)
        lp = target
    for rec in rt.records:
        if rec is None:
            continue
        word = rec.dirty_phase
        w = word.value
        while (w >> 8) < lp:
            if word.compare_exchange(w, (lp << 8) | 1):
                break
            w = word.value
    return lp


# ---------------------------------------------------------------------------
# restart and period brackets


def restart(ctx: ExecutionContext):
    """Help any in-flight phase to completion, clear the dirty flag, and
    resume the current read-only period from the checkpoint.

    The clear is a CAS that preserves the phase bits; if a newer phase
    signalled in the meantime the CAS fails and that phase is helped too,
    so no signal is ever lost.  Diverges by raising
    :class:`RestartSignal`.
    """
    from . import tracer

    rec = ctx.rec
    word = rec.dirty_phase
    while True:
        w = word.value
        if not (w & 1):
            break
        tracer.help(ctx.runtime)
        word.compare_exchange(w, w & ~0xFF)
    ar = rec.arbiter
    slots = rec.slots
    refs = ctx.refs
    for i in range(ctx.op.num_refs):
        v = slots[ar + i]
        refs[i] = None if v == MARKER else v
    resume, vals = rec.checkpoint
    vars_ = ctx.vars
    for k, v in zip(ctx.op.var_names, vals):
        vars_[k] = v
    raise RestartSignal(resume)


def begin_write_only(ctx: ExecutionContext) -> None:
    """End the current read-only period: publish all live references into
    the inactive frame, fence, then check the dirty flag.  If it is set,
    divert to :func:`restart`; otherwise flip the arbiter and enter the
    write-only period."""
    rec = ctx.rec
    rt = ctx.runtime
    other = rec.arbiter ^ 8
    slots = rec.slots
    refs = ctx.refs
    n = ctx.op.num_refs
    if rt.mut_reorder_publish:
        # Seeded-bug build: the dirty flag is read before the references
        # are visible, the exact reordering the full fence forbids.
        dirty = rec.dirty_phase.value & 1
        hook = rt.hook
        if hook is not None:
            hook(rec.index, "bwo:mid")
        for i in range(SLOTS_PER_FRAME):
            slots[other + i] = refs[i] if i < n else None
        if dirty:
            restart(ctx)
        rec.arbiter = other
        rec.in_write_only = True
        return
    for i in range(SLOTS_PER_FRAME):
        slots[other + i] = refs[i] if i < n else None
    fence_seq_cst()
    hook = rt.hook
    if hook is not None:
        hook(rec.index, "bwo:mid")
    if rec.dirty_phase.value & 1:
        restart(ctx)
    rec.arbiter = other
    rec.in_write_only = True


def end_write_only(ctx: ExecutionContext, resume: str) -> None:
    """Begin a read-only period: snapshot the non-reference locals and the
    resume label into the checkpoint.  The frame published at the matching
    :func:`begin_write_only` already holds the references."""
    rec = ctx.rec
    rec.checkpoint = (resume, tuple(ctx.vars[k] for k in ctx.op.var_names))
    rec.in_write_only = False


def validate_read(ctx: ExecutionContext) -> None:
    """Certify all values loaded since the previous validation: acquire
    fence, then the dirty flag; if set, the values may be arbitrary and
    the period restarts before they can be used."""
    fence_acquire()
    rt = ctx.runtime
    if rt.mut_skip_validate:
        return
    if ctx.rec.dirty_phase.value & 1:
        restart(ctx)


def guarded_load(ctx: ExecutionContext, cell: SharedCell):
    """Relaxed load of a shared cell followed by a validation."""
    v = cell.value
    validate_read(ctx)
    audit = ctx.runtime.audit
    if audit is not None and v == POISON:
        audit.record(ctx.rec.index, "guarded_load")
        if ctx.rec.dirty_phase.value & 1:
            restart(ctx)
    return v


def guarded_load_pair(ctx: ExecutionContext, cell_a: SharedCell, cell_b: SharedCell):
    """Two independent loads certified by a single dirty check."""
    a = cell_a.value
    b = cell_b.value
    validate_read(ctx)
    audit = ctx.runtime.audit
    if audit is not None and (a == POISON or b == POISON):
        audit.record(ctx.rec.index, "guarded_load_pair")
        if ctx.rec.dirty_phase.value & 1:
            restart(ctx)
    return a, b


# ---------------------------------------------------------------------------
# operation lifecycle


def op_begin(ctx: ExecutionContext, ref_inputs=(), entry: str | None = None) -> None:
    """Initialize thread-local state for a new operation and execute the
    initial dummy write-only period.

    If the inputs carry no node references, the publication and its fence
    are elided; the checkpoint is still taken so the entry period can be
    restarted."""
    rec = ctx.rec
    if rec.op_active:
        raise OperationError("op_begin while an operation is in progress")
    rec.op_active = True
    rec.arbiter = 1
    entry = entry if entry is not None else ctx.op.entry
    n = ctx.op.num_refs
    refs = ctx.refs
    for i in range(n):
        refs[i] = None
    for i, r in enumerate(ref_inputs):
        refs[i] = r
    # Seed the active frame with the inputs: a restart diverting out of
    # the entry period restores references from this frame, which would
    # otherwise still hold the previous operation's values.
    slots = rec.slots
    for i in range(SLOTS_PER_FRAME):
        slots[1 + i] = refs[i] if i < n else None
    rec.checkpoint = (entry, tuple(ctx.vars[k] for k in ctx.op.var_names))
    if ref_inputs:
        begin_write_only(ctx)
        end_write_only(ctx, entry)


def op_end(ctx: ExecutionContext) -> None:
    """Close the operation: write the marker into frame 1 slot 0, which
    implicitly nullifies every hazard slot for root gathering."""
    rec = ctx.rec
    rec.slots[_FRAME1_SLOT0] = MARKER
    rec.in_write_only = False
    rec.op_active = False


def run_operation(rt: Runtime, op: OpSpec, inputs: dict | None = None,
                  ref_inputs=()):
    """Drive one operation to completion, transparently re-dispatching at
    the checkpointed label on every restart.  Returns the Done value."""
    rec = rt.current()
    ctx = rec._ctx_cache.get(op)
    if ctx is None:
        ctx = ExecutionContext(rt, rec, op)
        rec._ctx_cache[op] = ctx
    vars_ = ctx.vars
    if inputs:
        for k in op.var_names:
            vars_[k] = inputs.get(k)
    else:
        for k in op.var_names:
            vars_[k] = None
    label = op.entry
    steps = op.steps
    try:
        op_begin(ctx, ref_inputs, op.entry)
    except RestartSignal as rs:
        # the entry period itself restarted; the checkpoint is in place
        label = rs.resume
    while True:
        hook = rt.hook
        if hook is not None:
            hook(rec.index, "label:" + label)
        try:
            out = steps[label](ctx)
        except RestartSignal as rs:
            label = rs.resume
            continue
        if type(out) is Done:
            break
        label = out
    op_end(ctx)
    return out.value


# ---------------------------------------------------------------------------
# root gathering and SWAP emulation


def gather_local_roots(rt: Runtime) -> set[int]:
    """Read every registered thread's hazard frames.  A thread whose
    frame 1 slot 0 holds the marker contributes nothing; otherwise every
    non-null slot of both frames contributes its untagged value."""
    roots: set[int] = set()
    for rec in rt.records:
        if rec is None:
            continue
        slots = rec.slots
        if slots[_FRAME1_SLOT0] == MARKER:
            continue
        for base in (1, 9):
            for i in range(SLOTS_PER_FRAME):
                v = slots[base + i]
                if v is not None and v > 0:
                    roots.add(v & ~1)
    return roots


def emulated_swap(ctx: ExecutionContext, cell: SharedCell, new: int,
                  out_slot: int, retry_label: str, done_label: str) -> int:
    """Atomic-exchange emulation: a loop of guarded read (read-only) plus
    CAS (write-only), as required for instructions that would otherwise
    both write shared memory and load a reference.

    ``out_slot`` names the reference slot that receives the swapped-out
    value; ``retry_label`` re-enters this call, ``done_label`` is the
    read-only period following a successful CAS."""
    refs = ctx.refs
    while True:
        cur = cell.value
        refs[out_slot] = cur if cur else None
        validate_read(ctx)
        begin_write_only(ctx)
        ok = cell.compare_exchange(cur, new)
        end_write_only(ctx, done_label if ok else retry_label)
        if ok:
            return cur
