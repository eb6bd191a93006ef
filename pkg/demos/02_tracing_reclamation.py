"""Tracing reclamation over a fixed arena.

Nodes are never freed by the thread that unlinks them.  Instead a
reclamation phase gathers roots (global cells plus every thread's hazard
frames), traces the reachable closure, and sweeps everything else back
onto the free list.  Because the phase is cooperative and lock-free, a
pool far smaller than the operation count is enough: exhaustion simply
triggers a phase.
"""

import lfmr


def main():
    rt = lfmr.Runtime(max_threads=2)
    arena = lfmr.arena_new(24, lfmr.LIST_NODE_LAYOUT)
    lst = lfmr.make_set("list", "hhs", "fa", arena=arena, runtime=rt)
    lst.register_thread()

    ops = 2000
    for i in range(ops):
        k = i % 16
        lst.insert(k)
        lst.remove(k)

    print(f"pool capacity       -> {arena.capacity} nodes")
    print(f"insert/remove pairs -> {ops}")
    print(f"phases run          -> {rt.phase_counter.value}")
    print(f"nodes reclaimed     -> {rt.total_reclaimed.value}")

    # Quiesce and account for every node: free + live == capacity.
    lfmr.reclamation_phase(rt)
    lfmr.reclamation_phase(rt)
    live = lst.live_node_count()
    free = arena.free_count()
    print(f"after quiescence    -> live={live} free={free} "
          f"(capacity={arena.capacity})")
    assert live + free == arena.capacity


if __name__ == "__main__":
    main()
