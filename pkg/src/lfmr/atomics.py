"""Small atomic primitives used by the reclamation runtime.

CPython's global interpreter lock makes single attribute/element loads and
stores indivisible, so plain reads and writes already behave like relaxed
(in practice sequentially consistent) atomics.  Compound read-modify-write
operations (CAS, fetch-and-add) are serialized through a per-object lock.
The locks are internal to single bytecode-sized critical sections and are
never held across any point where the test harness can suspend a thread,
so the behavioural lock-freedom of the protocols built on top is preserved.

Memory fences are provided as explicit no-op markers: they document where
the protocol requires an ordering edge, which the interpreter supplies for
free.
"""

from __future__ import annotations

import threading


def fence_seq_cst() -> None:
    """Full fence. A no-op under the GIL's execution model."""


def fence_acquire() -> None:
    """Acquire fence. A no-op under the GIL's execution model."""


class AtomicWord:
    """A 64-bit-style atomic integer cell.

    ``value`` may be read and written directly for relaxed access; use
    :meth:`compare_exchange` / :meth:`add` for read-modify-write.
    """

    __slots__ = ("value", "_lock")

    def __init__(self, initial: int = 0) -> None:
        self.value = initial
        self._lock = threading.Lock()

    def load(self) -> int:
        return self.value

    def store(self, value: int) -> None:
        self.value = value

    def compare_exchange(self, expected: int, desired: int) -> bool:
        with self._lock:
            if self.value != expected:
                return False
            self.value = desired
            return True

    def add(self, delta: int) -> int:
        """Fetch-and-add; returns the previous value."""
        with self._lock:
            old = self.value
            self.value = old + delta
            return old


class AtomicRef:
    """Atomic reference cell with identity-based CAS."""

    __slots__ = ("value", "_lock")

    def __init__(self, initial=None) -> None:
        self.value = initial
        self._lock = threading.Lock()

    def load(self):
        return self.value

    def store(self, value) -> None:
        self.value = value

    def compare_exchange(self, expected, desired) -> bool:
        with self._lock:
            if self.value is not expected:
                return False
            self.value = desired
            return True


class SharedCell:
    """A shared mutable cell holding an integer value (e.g. a list head).

    Used for registered global roots and for reference-valued locations
    operated on by CAS/SWAP.  ``value`` is 0 for null.
    """

    __slots__ = ("value", "_lock")

    def __init__(self, initial: int = 0) -> None:
        self.value = initial
        self._lock = threading.Lock()

    def load(self) -> int:
        return self.value

    def store(self, value: int) -> None:
        self.value = value

    def compare_exchange(self, expected: int, desired: int) -> bool:
        with self._lock:
            if self.value != expected:
                return False
            self.value = desired
            return True


class ConsStack:
    """Lock-free-style stack of items built from immutable cons pairs.

    Push and pop are single CAS operations on the head reference, so a
    suspended thread can never wedge the stack for other threads.
    """

    __slots__ = ("_head",)

    def __init__(self) -> None:
        self._head = AtomicRef(None)

    def push(self, item) -> None:
        while True:
            h = self._head.value
            if self._head.compare_exchange(h, (item, h)):
                return

    def pop(self):
        """Pop an item, or return None when the stack is empty."""
        while True:
            h = self._head.value
            if h is None:
                return None
            if self._head.compare_exchange(h, h[1]):
                return h[0]

    def empty(self) -> bool:
        return self._head.value is None
