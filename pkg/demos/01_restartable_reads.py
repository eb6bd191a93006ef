"""Restartable read-only sections, step by step.

A reader publishes its references to a hazard frame, runs without taking
locks, and certifies every batch of loads against its per-thread dirty
bit.  A reclaimer that wants the reader out of the way sets that bit;
the reader notices at the next check, rolls back to its last checkpoint,
and re-executes.  This script runs one operation, injects a restart by
hand, and shows that the caller never sees anything but the final,
consistent answer.
"""

import lfmr


def main():
    rt = lfmr.Runtime(max_threads=2)
    arena = lfmr.arena_new(32, lfmr.LIST_NODE_LAYOUT)
    lst = lfmr.make_set("list", "hhs", "fa", arena=arena, runtime=rt)
    rec = lst.register_thread()
    for k in (10, 20, 30):
        lst.insert(k)

    # Count how many times the operation passes its first checkpoint.
    visits = []

    def spy(tid, label):
        visits.append(label)
        # On the very first traversal step, behave like a concurrent
        # reclaimer: flag the reader dirty so it must restart.
        if len(visits) == 1:
            w = rec.dirty_phase
            w.compare_exchange(w.value, w.value | 1)

    rt.hook = spy
    lst.hook = spy
    answer = lst.contains(20)
    rt.hook = None
    lst.hook = None

    print(f"contains(20)      -> {answer}")
    print(f"checkpoint visits -> {len(visits)} (>1 means it restarted)")
    dirty, phase = lfmr.runtime.decode_dirty_phase(rec.dirty_phase.value)
    print(f"dirty bit after   -> {dirty} (cleared by the restart path)")
    assert answer and len(visits) > 1 and not dirty


if __name__ == "__main__":
    main()
