"""Emulated multi-word swaps built from restartable sections.

A swap exchanges a thread's private value with the contents of a shared
cell.  Under restarts the danger is duplication or loss: a thread that
re-executes after being flagged dirty must not swap twice.  The protocol
checkpoints the swap's progress so each logical swap takes effect
exactly once, even with restarts injected at random checkpoints.

The checker threads values through chains of cells and verifies the
multiset of values is conserved: everything put in is either still in a
cell or came back out exactly once.
"""

from lfmr.verify import swap_chain_check


def main():
    for n in (1, 2, 8):
        out = swap_chain_check(n, n_threads=4, ops_per_thread=100,
                               seed=7, inject_rate=0.1)
        status = "ok" if out["ok"] else "FAILED"
        print(f"chain length {n}: {status}; "
              f"{out['injected_restarts']} injected restarts, "
              f"{out['put']} values threaded, "
              f"{len(out['mismatch'])} conservation mismatches")
        assert out["ok"]


if __name__ == "__main__":
    main()
