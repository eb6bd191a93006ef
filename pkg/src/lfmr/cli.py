"""Command-line harness: ``lfmr bench`` and ``lfmr verify``.

``bench`` measures throughput for one or more schemes over a shared
configuration and reports a table/CSV/JSON row per scheme, including the
ratio against the leak-everything baseline.

``verify`` runs correctness checkers:

* ``alternation`` -- concurrent workload (optionally with injected
  restarts) checked against the event-log oracles;
* ``stuck`` -- parks one thread mid-operation and reports whether
  reclamation still makes progress under the chosen scheme;
* ``poison`` -- reclaimed memory is filled with a poison pattern and any
  certified read of it is reported;
* ``swap`` -- concurrent swap chains checked for exactly-once value
  conservation under injected restarts.
"""

from __future__ import annotations

import argparse
import random
import sys
import threading
import time

from .bench import BenchConfig, BenchResult, build_structure, prepopulate, \
    render, run_benchmark
from .verify import (EventLog, RestartInjector, SuspensionScript,
                     alternation_violations, membership_violations,
                     structure_violations, swap_chain_check)


def _add_workload_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ds", default="list", choices=["list", "hash"])
    p.add_argument("--variant", default="hhs",
                   choices=["hhs", "hm", "harris"])
    p.add_argument("--scheme", default="fa",
                   help="scheme or comma-separated schemes "
                        "(fa, hp, ebr, nr)")
    p.add_argument("--range", type=int, default=10000, dest="key_range")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--duration-secs", type=float, default=1.0)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--mix", default="50:25:25",
                   help="contains:insert:remove percentages")
    p.add_argument("--pool", type=int, default=50000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--buckets", type=int, default=10000)
    p.add_argument("--poison", action="store_true",
                   help="poison reclaimed nodes and audit certified reads")


def _parse_mix(text: str) -> tuple[int, int, int]:
    parts = [int(x) for x in text.split(":")]
    if len(parts) != 3:
        raise SystemExit(f"--mix must be c:i:r, got {text!r}")
    return tuple(parts)


def _config(args, scheme: str) -> BenchConfig:
    return BenchConfig(ds=args.ds, variant=args.variant, scheme=scheme,
                       key_range=args.key_range, threads=args.threads,
                       duration_secs=args.duration_secs,
                       repeats=args.repeats, mix=_parse_mix(args.mix),
                       pool=args.pool, seed=args.seed,
                       buckets=args.buckets, poison=args.poison)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_bench(args) -> int:
    results: list[BenchResult] = []
    for scheme in args.scheme.split(","):
        cfg = _config(args, scheme.strip())
        results.append(run_benchmark(cfg))
    _emit(render(results, args.format), args.out)
    return 0


# ---------------------------------------------------------------------------
# verify subcommands


def _run_logged_workload(args, inject_rate: float = 0.0):
    """Timed concurrent workload recording every operation in an event
    log; returns (log, structure, runtime, initial_keys)."""
    cfg = _config(args, args.scheme)
    structure, rt = build_structure(cfg)
    prepopulate(structure, cfg)
    if inject_rate > 0:
        if rt is None:
            raise SystemExit("--inject-rate requires --scheme fa")
        rt.hook = RestartInjector(rt, inject_rate, cfg.seed)
    initial = range(0, cfg.key_range, 2)
    log = EventLog()
    stop = [False]
    errors: list[str] = []

    def worker(tid: int) -> None:
        try:
            structure.register_thread()
            rng = random.Random(f"{cfg.seed}:0:{tid}")
            c, i, r = cfg.mix
            total = c + i + r
            while not stop[0]:
                key = rng.randrange(cfg.key_range)
                pick = rng.randrange(total)
                if pick < c:
                    log.run_op(tid, "contains", structure.contains, key)
                elif pick < c + i:
                    log.run_op(tid, "insert", structure.insert, key)
                else:
                    log.run_op(tid, "remove", structure.remove, key)
        except Exception as exc:
            errors.append(repr(exc))
            stop[0] = True

    threads = [threading.Thread(target=worker, args=(t,))
               for t in range(cfg.threads)]
    for t in threads:
        t.start()
    time.sleep(cfg.duration_secs)
    stop[0] = True
    for t in threads:
        t.join()
    if errors:
        raise SystemExit(f"workload failed: {errors}")
    return log, structure, rt, initial


def cmd_verify_alternation(args) -> int:
    log, structure, rt, initial = _run_logged_workload(
        args, inject_rate=args.inject_rate)
    violations = alternation_violations(log, initial)
    violations += membership_violations(log, structure.contains, initial)
    violations += structure_violations(structure)
    print(f"events: {len(log.events)}")
    for v in violations:
        print(f"VIOLATION: {v}")
    print(f"alternation: {'pass' if not violations else 'fail'} "
          f"({len(violations)} violations)")
    return 0 if not violations else 1


def cmd_verify_poison(args) -> int:
    args.poison = True
    log, structure, rt, initial = _run_logged_workload(args)
    n = len(rt.audit.violations) if rt is not None and rt.audit else 0
    struct = structure_violations(structure)
    print(f"events: {len(log.events)}")
    print(f"certified poison reads: {n}")
    for v in struct:
        print(f"VIOLATION: {v}")
    ok = n == 0 and not struct
    print(f"poison audit: {'pass' if ok else 'fail'}")
    return 0 if ok else 1


def cmd_verify_stuck(args) -> int:
    cfg = _config(args, args.scheme)
    structure, rt = build_structure(cfg)
    script = (SuspensionScript.parse(args.script) if args.script
              else SuspensionScript([(1, "search:visit", 50)]))
    if rt is not None:
        rt.hook = script.hook
    structure.hook = script.hook
    prepopulate(structure, cfg)

    stop = [False]

    def stuck_worker() -> None:
        structure.register_thread()  # thread index 1 under fa
        rng = random.Random(f"{cfg.seed}:stuck")
        while not stop[0]:
            structure.remove(rng.randrange(cfg.key_range))

    def churn_worker(tid: int) -> None:
        structure.register_thread()
        rng = random.Random(f"{cfg.seed}:1:{tid}")
        while not stop[0]:
            key = rng.randrange(cfg.key_range)
            structure.insert(key)
            structure.remove(key)

    before = _reclaimed_count(structure, rt)
    stuck = threading.Thread(target=stuck_worker)
    stuck.start()
    if not script.wait_parked(1):
        raise SystemExit("the victim thread never reached the scripted "
                         "suspension point")
    workers = [threading.Thread(target=churn_worker, args=(t,))
               for t in range(2, 2 + max(1, cfg.threads - 1))]
    for t in workers:
        t.start()
    time.sleep(cfg.duration_secs)
    stop[0] = True
    for t in workers:
        t.join()
    reclaimed = _reclaimed_count(structure, rt) - before
    script.release_all()
    stuck.join()
    progress = reclaimed > 0
    print(f"scheme: {cfg.scheme}")
    print(f"nodes reclaimed while one thread was parked: {reclaimed}")
    print(f"reclamation progress: {'yes' if progress else 'no'}")
    return 0


def _reclaimed_count(structure, rt) -> int:
    if rt is not None:  # tracing runtime
        return rt.total_reclaimed.value
    hp = getattr(structure, "hp", None)
    if hp is not None:
        return hp.reclaimed.value
    ebr = getattr(structure, "ebr", None)
    if ebr is not None:
        return ebr.reclaimed.value
    return 0


def cmd_verify_swap(args) -> int:
    out = swap_chain_check(args.n, n_threads=args.threads,
                           ops_per_thread=args.ops, seed=args.seed,
                           inject_rate=args.inject_rate)
    print(f"chain length: {args.n}, injected restarts: "
          f"{out['injected_restarts']}")
    for e in out["errors"]:
        print(f"ERROR: {e}")
    if out["mismatch"]:
        print(f"unbalanced tokens: {out['mismatch']}")
    print(f"swap conservation: {'pass' if out['ok'] else 'fail'}")
    return 0 if out["ok"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lfmr", description="benchmark and verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="throughput benchmark")
    _add_workload_args(b)
    b.add_argument("--format", default="table",
                   choices=["table", "csv", "json"])
    b.add_argument("--out", default=None, help="write output to a file")
    b.set_defaults(fn=cmd_bench)

    v = sub.add_parser("verify", help="correctness checkers")
    vsub = v.add_subparsers(dest="checker", required=True)

    va = vsub.add_parser("alternation", help="event-log history oracles")
    _add_workload_args(va)
    va.add_argument("--inject-rate", type=float, default=0.0)
    va.set_defaults(fn=cmd_verify_alternation)

    vs = vsub.add_parser("stuck", help="reclamation progress with a "
                                       "parked thread")
    _add_workload_args(vs)
    vs.add_argument("--script", default=None,
                    help="suspension directives tid:point:occurrence, "
                         "comma separated")
    vs.set_defaults(fn=cmd_verify_stuck)

    vp = vsub.add_parser("poison", help="poison-pattern read audit")
    _add_workload_args(vp)
    vp.set_defaults(fn=cmd_verify_poison)

    vw = vsub.add_parser("swap", help="swap-chain conservation")
    vw.add_argument("--n", type=int, default=2, help="chain length")
    vw.add_argument("--threads", type=int, default=4)
    vw.add_argument("--ops", type=int, default=200)
    vw.add_argument("--seed", type=int, default=1)
    vw.add_argument("--inject-rate", type=float, default=0.05)
    vw.set_defaults(fn=cmd_verify_swap)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
