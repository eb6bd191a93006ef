"""What a stalled reader costs each reclamation scheme.

One thread is parked in the middle of a traversal while three others
churn the set.  Epoch-based reclamation stalls completely: the parked
thread pins its epoch and nothing can be freed.  The restartable-read
scheme just flags the sleeper dirty, reclaims what it was looking at,
and keeps allocating; when the sleeper wakes it restarts and finishes
normally.
"""

import threading
import time

import lfmr
from lfmr.verify import SuspensionScript


def run(scheme):
    arena = lfmr.arena_new(2000, lfmr.LIST_NODE_LAYOUT)
    rt = None
    if scheme == "fa":
        rt = lfmr.Runtime(max_threads=8)
        s = lfmr.make_set("list", "hm", "fa", arena=arena, runtime=rt)
    else:
        state = lfmr.EpochScheme(arena, max_threads=8)
        s = lfmr.make_set("list", "hm", "ebr", arena=arena,
                          scheme_state=state)
    s.register_thread()
    for k in range(0, 64, 2):
        s.insert(k)

    script = SuspensionScript([(1, "search:visit", 20)])
    if rt is not None:
        rt.hook = script.hook
    s.hook = script.hook

    stop = [False]
    exhausted = [0]

    def victim():
        s.register_thread()  # registers as thread 1
        while not stop[0]:
            s.contains(33)

    def churn(tid):
        s.register_thread()
        i = 0
        while not stop[0]:
            try:
                s.insert(i % 64)
                s.remove(i % 64)
            except lfmr.PoolExhausted:
                exhausted[0] += 1
                return
            i += 1

    vt = threading.Thread(target=victim)
    vt.start()
    script.wait_parked(1)
    reclaimed = rt.total_reclaimed if rt is not None else s.ebr.reclaimed
    before = reclaimed.value

    ts = [threading.Thread(target=churn, args=(t,)) for t in range(3)]
    for t in ts:
        t.start()
    time.sleep(2.0)
    stop[0] = True
    for t in ts:
        t.join()
    delta = reclaimed.value - before

    script.release_all()
    vt.join()
    print(f"{scheme:>3}: reclaimed {delta:>6} nodes while one reader "
          f"slept; pool exhaustion events: {exhausted[0]}")


def main():
    run("fa")
    run("ebr")


if __name__ == "__main__":
    main()
