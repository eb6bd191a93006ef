"""Lock-free memory reclamation via restartable read-only sections.

The package provides:

* :mod:`lfmr.runtime` -- the per-thread read protocol (dirty/phase word,
  dual hazard frames, checkpointed restartable operations);
* :mod:`lfmr.tracer` -- the cooperative lock-free tracing reclaimer;
* :mod:`lfmr.node_pool` -- the fixed arena the structures allocate from;
* :mod:`lfmr.schemes` -- hazard-slot, epoch, and leaky baselines;
* :mod:`lfmr.sets` -- three lock-free ordered-set algorithms and a hash
  set built over them;
* :mod:`lfmr.bench` / :mod:`lfmr.verify` / :mod:`lfmr.cli` -- the
  measurement and verification harness.
"""

from .atomics import AtomicRef, AtomicWord, ConsStack, SharedCell
from .node_pool import (POISON, Arena, LayoutError, MarkTable, NodeLayout,
                        PoolExhausted, alloc, arena_new, mark_node,
                        register_global_root, sweep)
from .runtime import (Done, ExecutionContext, OperationError, OpSpec,
                      RestartSignal, Runtime, ThreadRecord, begin_write_only,
                      emulated_swap, end_write_only, gather_local_roots,
                      guarded_load, guarded_load_pair, init_reclamation,
                      op_begin, op_end, restart, run_operation, validate_read)
from .schemes import EpochScheme, HazardScheme, nr_alloc, nr_free
from .sets import (LIST_NODE_LAYOUT, EbrEagerUnlinkList, FaEagerUnlinkList,
                   FaRunUnlinkList, FaWaitFreeSearchList, HpEagerUnlinkList,
                   NrList, make_set)
from .tracer import PhaseState, clear_tag, help, reclamation_phase, trace

__version__ = "0.1.0"

__all__ = [
    "AtomicRef", "AtomicWord", "ConsStack", "SharedCell",
    "POISON", "Arena", "LayoutError", "MarkTable", "NodeLayout",
    "PoolExhausted", "alloc", "arena_new", "mark_node",
    "register_global_root", "sweep",
    "Done", "ExecutionContext", "OperationError", "OpSpec",
    "RestartSignal", "Runtime", "ThreadRecord", "begin_write_only",
    "emulated_swap", "end_write_only", "gather_local_roots",
    "guarded_load", "guarded_load_pair", "init_reclamation",
    "op_begin", "op_end", "restart", "run_operation", "validate_read",
    "EpochScheme", "HazardScheme", "nr_alloc", "nr_free",
    "LIST_NODE_LAYOUT", "EbrEagerUnlinkList", "FaEagerUnlinkList",
    "FaRunUnlinkList", "FaWaitFreeSearchList", "HpEagerUnlinkList",
    "NrList", "make_set",
    "PhaseState", "clear_tag", "help", "reclamation_phase", "trace",
    "__version__",
]
