"""Unit tests for the baseline reclamation schemes."""

import threading

import pytest

from lfmr import (LIST_NODE_LAYOUT, EpochScheme, HazardScheme, PoolExhausted,
                  arena_new, nr_alloc, nr_free)


def _node(arena):
    a = arena.setup_alloc()
    arena.write_word(a, 0, 0)
    arena.write_word(a, 1, 0)
    return a


# -- hazard slots --------------------------------------------------------------


def test_hazard_protected_node_survives_scan():
    arena = arena_new(8, LIST_NODE_LAYOUT)
    hp = HazardScheme(arena, max_threads=2)
    tid = hp.register()
    a = _node(arena)
    b = _node(arena)
    hp.protect(tid, 0, a)
    hp.retire(tid, a)
    hp.retire(tid, b)
    hp.scan(tid)
    assert arena.allocated_count() == 1  # a survived, b was freed
    hp.protect(tid, 0, None)
    hp.scan(tid)
    assert arena.allocated_count() == 0
    assert hp.reclaimed.value == 2


def test_hazard_protection_is_cross_thread():
    arena = arena_new(8, LIST_NODE_LAYOUT)
    hp = HazardScheme(arena, max_threads=2)
    t0 = hp.register()
    a = _node(arena)
    done = threading.Event()
    release = threading.Event()

    def other():
        t1 = hp.register()
        hp.protect(t1, 0, a)
        done.set()
        release.wait()
        hp.protect(t1, 0, None)

    th = threading.Thread(target=other)
    th.start()
    done.wait()
    hp.retire(t0, a)
    hp.scan(t0)
    assert arena.allocated_count() == 1  # held by the other thread
    release.set()
    th.join()
    hp.scan(t0)
    assert arena.allocated_count() == 0


def test_hazard_hp_read_revalidates():
    arena = arena_new(4, LIST_NODE_LAYOUT)
    hp = HazardScheme(arena, max_threads=1)
    tid = hp.register()
    owner = _node(arena)
    child = _node(arena)
    arena.write_word(owner, 1, child)
    got = hp.hp_read(tid, 0, owner, 1)
    assert got == child
    assert hp.slots[tid][0] == child  # published before being returned


# -- epochs --------------------------------------------------------------------


def test_epoch_reclaims_after_two_epochs():
    arena = arena_new(8, LIST_NODE_LAYOUT)
    ebr = EpochScheme(arena, max_threads=2)
    tid = ebr.register()
    a = _node(arena)
    ebr.enter(tid)
    ebr.retire(tid, a)
    ebr.exit(tid)
    # entering advances the epoch when possible and frees limbo two
    # epochs back; a few cycles must be enough
    for _ in range(4):
        ebr.enter(tid)
        ebr.exit(tid)
    assert arena.allocated_count() == 0
    assert ebr.reclaimed.value == 1


def test_epoch_parked_thread_blocks_reclamation():
    arena = arena_new(8, LIST_NODE_LAYOUT)
    ebr = EpochScheme(arena, max_threads=2)
    t0 = ebr.register()
    entered = threading.Event()
    release = threading.Event()

    def parked():
        t1 = ebr.register()
        ebr.enter(t1)
        entered.set()
        release.wait()
        ebr.exit(t1)

    th = threading.Thread(target=parked)
    th.start()
    entered.wait()
    a = _node(arena)
    ebr.enter(t0)
    ebr.retire(t0, a)
    ebr.exit(t0)
    for _ in range(6):
        ebr.enter(t0)
        ebr.exit(t0)
    assert arena.allocated_count() == 1  # pinned: nothing reclaimed
    assert ebr.limbo_count() == 1
    release.set()
    th.join()
    for _ in range(6):
        ebr.enter(t0)
        ebr.exit(t0)
    assert arena.allocated_count() == 0  # unpinned: limbo drains


# -- leaky baseline --------------------------------------------------------------


def test_nr_alloc_and_deliberately_leaky_free():
    arena = arena_new(2, LIST_NODE_LAYOUT)
    a = nr_alloc(arena)
    nr_alloc(arena)
    assert arena.allocated_count() == 2
    nr_free(arena, a)  # a no-op by design: the baseline never reuses
    assert arena.allocated_count() == 2
    with pytest.raises(PoolExhausted):
        nr_alloc(arena)


def test_registry_ids_are_stable_and_unique():
    arena = arena_new(2, LIST_NODE_LAYOUT)
    hp = HazardScheme(arena, max_threads=4)
    ids = []
    lock = threading.Lock()

    def go():
        i = hp.register()
        assert hp.register() == i  # idempotent per thread
        with lock:
            ids.append(i)

    ts = [threading.Thread(target=go) for _ in range(3)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert sorted(ids) == [0, 1, 2]
