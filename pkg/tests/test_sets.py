"""Unit and small concurrency tests for the ordered-set variants."""

import random
import threading

import pytest

from lfmr import (LIST_NODE_LAYOUT, EpochScheme, HazardScheme, PoolExhausted,
                  Runtime, arena_new, make_set, reclamation_phase)
from lfmr.verify import structure_violations

VARIANTS = ("hhs", "hm", "harris")


def _fa(variant, capacity=200, buckets=1, poison=False):
    rt = Runtime(max_threads=8, poison=poison)
    arena = arena_new(capacity, LIST_NODE_LAYOUT)
    lst = make_set("list" if buckets == 1 else "hash", variant, "fa",
                   arena=arena, runtime=rt, buckets=buckets)
    lst.register_thread()
    return lst, rt, arena


def _all_structures():
    for variant in VARIANTS:
        yield f"fa-{variant}", _fa(variant)[0]
    arena = arena_new(200, LIST_NODE_LAYOUT)
    hp = HazardScheme(arena, max_threads=8)
    s = make_set("list", "hm", "hp", arena=arena, scheme_state=hp)
    s.register_thread()
    yield "hp-hm", s
    arena = arena_new(200, LIST_NODE_LAYOUT)
    ebr = EpochScheme(arena, max_threads=8)
    s = make_set("list", "hm", "ebr", arena=arena, scheme_state=ebr)
    s.register_thread()
    yield "ebr-hm", s
    arena = arena_new(200, LIST_NODE_LAYOUT)
    s = make_set("list", "hhs", "nr", arena=arena)
    s.register_thread()
    yield "nr-hhs", s


@pytest.mark.parametrize("name,s", list(_all_structures()))
def test_sequential_set_semantics(name, s):
    assert not s.contains(5)
    assert s.insert(5)
    assert not s.insert(5)
    assert s.insert(3) and s.insert(9) and s.insert(1)
    assert s.contains(1) and s.contains(3) and s.contains(5) and s.contains(9)
    assert not s.contains(4)
    assert s.remove(5)
    assert not s.remove(5)
    assert not s.contains(5)
    assert s.contains(3) and s.contains(9)
    assert not structure_violations(s)


def test_hash_set_routes_by_bucket():
    lst, rt, arena = _fa("hhs", capacity=300, buckets=7)
    keys = list(range(0, 100, 3))
    for k in keys:
        assert lst.insert(k)
    for k in keys:
        assert lst.contains(k)
    assert not lst.contains(2)
    assert lst.live_node_count() == len(keys) + 1 + 7  # tail + heads
    for k in keys:
        assert lst.remove(k)
    assert not structure_violations(lst)


def test_make_set_validation():
    arena = arena_new(8, LIST_NODE_LAYOUT)
    with pytest.raises(ValueError):
        make_set("list", "nope", "fa", arena=arena, runtime=Runtime())
    with pytest.raises(ValueError):
        make_set("list", "hhs", "hp", arena=arena,
                 scheme_state=HazardScheme(arena))  # hp supports hm only
    with pytest.raises(ValueError):
        make_set("tree", "hm", "fa", arena=arena, runtime=Runtime())
    with pytest.raises(ValueError):
        make_set("list", "hm", "zzz", arena=arena)


@pytest.mark.parametrize("variant", VARIANTS)
def test_fa_unlinked_nodes_are_reclaimed(variant):
    lst, rt, arena = _fa(variant, capacity=64)
    for k in range(10):
        lst.insert(k)
    for k in range(10):
        lst.remove(k)
    before = arena.allocated_count()
    reclamation_phase(rt)
    after = arena.allocated_count()
    assert after <= before - 9  # bulk of the removed nodes came back
    assert after >= 2  # head + tail survive
    assert not structure_violations(lst)


def test_fa_pool_smaller_than_churn_survives():
    """A pool far smaller than the op count works because phases run on
    exhaustion; the same churn would kill the leaky baseline."""
    lst, rt, arena = _fa("hhs", capacity=24)
    for i in range(500):
        k = i % 16
        lst.insert(k)
        lst.remove(k)
    assert rt.phase_counter.value > 0
    assert not structure_violations(lst)

    arena2 = arena_new(24, LIST_NODE_LAYOUT)
    nr = make_set("list", "hhs", "nr", arena=arena2)
    nr.register_thread()
    with pytest.raises(PoolExhausted):
        for i in range(500):
            k = i % 16
            nr.insert(k)
            nr.remove(k)


@pytest.mark.parametrize("variant", VARIANTS)
def test_fa_concurrent_churn_is_sound(variant):
    lst, rt, arena = _fa(variant, capacity=150, poison=True)
    for k in range(0, 32, 2):
        lst.insert(k)

    def worker(tid):
        lst.register_thread()
        rng = random.Random(f"{variant}:{tid}")
        for _ in range(1500):
            key = rng.randrange(32)
            p = rng.random()
            if p < 0.5:
                lst.contains(key)
            elif p < 0.75:
                lst.insert(key)
            else:
                lst.remove(key)

    ts = [threading.Thread(target=worker, args=(t,)) for t in range(3)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert not rt.audit.violations
    assert not structure_violations(lst)


@pytest.mark.parametrize("scheme", ("hp", "ebr"))
def test_baseline_concurrent_churn_is_sound(scheme):
    arena = arena_new(600, LIST_NODE_LAYOUT)
    if scheme == "hp":
        state = HazardScheme(arena, max_threads=8, threads_hint=3)
    else:
        state = EpochScheme(arena, max_threads=8)
    s = make_set("list", "hm", scheme, arena=arena, scheme_state=state)
    s.register_thread()
    for k in range(0, 32, 2):
        s.insert(k)

    def worker(tid):
        s.register_thread()
        rng = random.Random(f"{scheme}:{tid}")
        for _ in range(1500):
            key = rng.randrange(32)
            p = rng.random()
            if p < 0.5:
                s.contains(key)
            elif p < 0.75:
                s.insert(key)
            else:
                s.remove(key)

    ts = [threading.Thread(target=worker, args=(t,)) for t in range(3)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert not structure_violations(s)
    assert state.reclaimed.value > 0
