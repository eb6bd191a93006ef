"""Unit tests for the restartable-operation protocol: dirty/phase word,
frames and arbiter, checkpointed restarts, root gathering, SWAP emulation."""

import pytest
from hypothesis import given, strategies as st

from lfmr import (Done, OperationError, OpSpec, Runtime, SharedCell,
                  begin_write_only, emulated_swap, end_write_only,
                  gather_local_roots, guarded_load, init_reclamation,
                  run_operation)
from lfmr.runtime import (MARKER, MAX_PHASE, SLOTS_PER_FRAME,
                          decode_dirty_phase, encode_dirty_phase)


# -- dirty/phase word --------------------------------------------------------


@given(st.booleans(), st.integers(min_value=0, max_value=MAX_PHASE))
def test_encode_decode_roundtrip(dirty, phase):
    assert decode_dirty_phase(encode_dirty_phase(dirty, phase)) == (dirty, phase)


def test_encode_boundaries():
    assert encode_dirty_phase(False, 0) == 0
    assert encode_dirty_phase(True, 0) == 1
    assert encode_dirty_phase(True, MAX_PHASE) == (MAX_PHASE << 8) | 1
    with pytest.raises(ValueError):
        encode_dirty_phase(False, MAX_PHASE + 1)
    with pytest.raises(ValueError):
        encode_dirty_phase(False, -1)


def test_init_reclamation_signals_every_thread_once():
    rt = Runtime(max_threads=4)
    rec = rt.register_thread()
    phase = init_reclamation(rt, 1)
    assert phase == 1
    assert decode_dirty_phase(rec.dirty_phase.value) == (True, 1)
    # re-signalling the same phase is a no-op (at most one CAS per phase)
    before = rec.dirty_phase.value
    init_reclamation(rt, 1)
    assert rec.dirty_phase.value == before


# -- OpSpec ------------------------------------------------------------------


def test_opspec_rejects_too_many_refs():
    with pytest.raises(OperationError):
        OpSpec("wide", SLOTS_PER_FRAME + 1, (), "a", {})


# -- simple driven operations ------------------------------------------------


def _trivial_op():
    return OpSpec("trivial", 0, ("x",), "go",
                  {"go": lambda ctx: Done(ctx.vars["x"] + 1)})


def test_run_operation_returns_done_value():
    rt = Runtime(max_threads=1)
    rt.register_thread()
    assert run_operation(rt, _trivial_op(), {"x": 41}) == 42


def test_marker_restored_after_operation():
    rt = Runtime(max_threads=1)
    rec = rt.register_thread()
    run_operation(rt, _trivial_op(), {"x": 0})
    assert rec.slots[9] == MARKER
    assert not rec.op_active


def test_restart_restores_checkpointed_vars_and_refs():
    """A dirty flag set mid-period must restore the variables of the last
    checkpoint and the references of the active frame, exactly once."""
    rt = Runtime(max_threads=1)
    rec = rt.register_thread()
    cell = SharedCell(7)
    seen = []

    def stage_a(ctx):
        ctx.refs[0] = 1234
        begin_write_only(ctx)        # publishes refs[0] to the other frame
        ctx.vars["acc"] = ctx.vars["acc"] + 1
        end_write_only(ctx, "b")     # checkpoint: resume at b with acc=1
        return "b"

    def stage_b(ctx):
        seen.append((ctx.vars["acc"], ctx.refs[0]))
        if len(seen) == 1:
            # simulate a phase signal landing inside the read-only period
            rec.dirty_phase.store(rec.dirty_phase.value | 1)
        v = guarded_load(ctx, cell)  # certifies; restarts on first pass
        return Done((ctx.vars["acc"], ctx.refs[0], v))

    op = OpSpec("restartable", 1, ("acc",), "a",
                {"a": stage_a, "b": stage_b})
    out = run_operation(rt, op, {"acc": 0})
    assert out == (1, 1234, 7)
    # the restart replayed only stage b, with state restored from the
    # checkpoint and frame, not re-incremented
    assert seen == [(1, 1234), (1, 1234)]


def test_restart_of_entry_period_restores_ref_inputs():
    rt = Runtime(max_threads=1)
    rec = rt.register_thread()
    passes = []

    def go(ctx):
        passes.append(ctx.refs[0])
        if len(passes) == 1:
            rec.dirty_phase.store(rec.dirty_phase.value | 1)
        guarded_load(ctx, SharedCell(0))
        return Done(ctx.refs[0])

    op = OpSpec("entry", 1, (), "go", {"go": go})
    assert run_operation(rt, op, ref_inputs=(777,)) == 777
    assert passes == [777, 777]


def test_nested_operations_rejected():
    rt = Runtime(max_threads=1)
    rt.register_thread()

    def outer(ctx):
        run_operation(rt, _trivial_op(), {"x": 0})
        return Done(None)

    with pytest.raises(OperationError):
        run_operation(rt, OpSpec("outer", 0, (), "o", {"o": outer}))


def test_arbiter_flips_per_write_only_period():
    rt = Runtime(max_threads=1)
    rec = rt.register_thread()
    arbiters = []

    def go(ctx):
        for _ in range(3):
            begin_write_only(ctx)
            arbiters.append(rec.arbiter)
            end_write_only(ctx, "go")
        return Done(None)

    run_operation(rt, OpSpec("flip", 0, (), "go", {"go": go}))
    assert arbiters == [9, 1, 9]


# -- root gathering table tests ----------------------------------------------


def test_gather_skips_thread_with_marker():
    rt = Runtime(max_threads=2)
    rec = rt.register_thread()
    assert rec.slots[9] == MARKER
    rec.slots[1] = 100  # stale frame content must not leak past the marker
    assert gather_local_roots(rt) == set()


def test_gather_reads_both_frames():
    rt = Runtime(max_threads=2)
    rec = rt.register_thread()
    rec.slots[9] = None  # marker cleared: thread participates
    rec.slots[1] = 100   # frame 0 slot 0
    rec.slots[7] = 200   # frame 0 slot 6
    rec.slots[10] = 300  # frame 1 slot 1
    rec.slots[15] = 400  # frame 1 slot 6
    assert gather_local_roots(rt) == {100, 200, 300, 400}


def test_gather_clears_tags_and_skips_nulls():
    rt = Runtime(max_threads=2)
    rec = rt.register_thread()
    rec.slots[9] = None
    rec.slots[1] = 101  # tagged link: gathered untagged
    rec.slots[2] = None
    rec.slots[3] = 0    # null encoded as 0: skipped
    assert gather_local_roots(rt) == {100}


def test_gather_merges_threads_and_ignores_unregistered():
    import threading

    rt = Runtime(max_threads=4)
    rec0 = rt.register_thread()
    rec0.slots[9] = None
    rec0.slots[1] = 100

    def other():
        rec1 = rt.register_thread()
        rec1.slots[9] = None
        rec1.slots[12] = 201  # tagged

    t = threading.Thread(target=other)
    t.start()
    t.join()
    assert gather_local_roots(rt) == {100, 200}


# -- SWAP emulation ------------------------------------------------------------


def test_emulated_swap_single_thread():
    rt = Runtime(max_threads=1)
    rt.register_thread()
    cell = SharedCell(10)

    def go(ctx):
        old = emulated_swap(ctx, cell, 12, 0, "go", "done")
        ctx.vars["old"] = old
        return "done"

    op = OpSpec("swap1", 1, ("old",), "go",
                {"go": go, "done": lambda ctx: Done(ctx.vars["old"])})
    assert run_operation(rt, op) == 10
    assert cell.value == 12


# -- write-only discipline log -------------------------------------------------


def test_note_write_records_period_flag():
    from lfmr import LIST_NODE_LAYOUT, arena_new

    rt = Runtime(max_threads=1)
    rt.write_log = []
    arena = arena_new(4, LIST_NODE_LAYOUT)
    rt.attach_arena(arena)
    rt.register_thread()
    n = arena.setup_alloc()

    def go(ctx):
        begin_write_only(ctx)
        arena.write_word(n, 0, 5)
        end_write_only(ctx, "go")
        return Done(None)

    run_operation(rt, OpSpec("w", 0, (), "go", {"go": go}))
    arena.write_word(n, 0, 6)  # outside any period
    flags = [ok for (_, _, ok) in rt.write_log]
    assert flags == [True, False]
