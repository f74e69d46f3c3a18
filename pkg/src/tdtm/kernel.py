"""Deterministic discrete-event kernel.

Time is an integer number of picoseconds. Events are totally ordered by
``(time, seq)`` where ``seq`` is a global insertion counter, so two kernels fed
the same schedule deliver the same trace.

Nets are single-bit signals grouped by a module *scope*; the scope is used for
VCD hierarchy and for transition accounting.
"""

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

RISING = "rising"
FALLING = "falling"
ANY = "any"
_EDGES = (RISING, FALLING, ANY)


class TimeViolation(ValueError):
    """An event was scheduled before the current simulation time."""


class CombinationalLoop(RuntimeError):
    """Too many deliveries at a single timestamp."""


@dataclass(eq=False)
class Event:
    time: int
    seq: int
    signal_id: Optional[str]
    new_value: int = 0
    action: Optional[Callable[[], None]] = None
    cancelled: bool = False


@dataclass(eq=False)
class Signal:
    id: str
    scope: str
    name: str
    value: int = 0
    last_transition: int = 0
    transition_count: int = 0
    init: int = 0
    listeners: list = field(default_factory=list, repr=False)


class Kernel:
    """Single-threaded event scheduler with named one-bit signals.

    :param iteration_cap: maximum deliveries allowed at one timestamp before a
        :class:`CombinationalLoop` is raised.
    :param record: keep a value-change trace (needed for VCD export).
    """

    def __init__(self, iteration_cap: int = 10**6, record: bool = True):
        self.now = 0
        self.iteration_cap = iteration_cap
        self.record = record
        self.signals: dict[str, Signal] = {}
        self.trace: list[tuple[int, str, int]] = []
        self.scheduled = 0
        self.delivered = 0
        self.cancelled = 0
        self._queue: list[tuple[int, int, Event]] = []
        self._seq = itertools.count()
        self._same_time = 0

    # -- nets ---------------------------------------------------------------
    def signal(self, name: str, scope: str = "top", init: int = 0) -> str:
        sid = f"{scope}.{name}"
        if sid in self.signals:
            raise ValueError(f"signal {sid!r} already registered")
        self.signals[sid] = Signal(sid, scope, name, int(init), self.now, init=int(init))
        return sid

    def value(self, signal_id: str) -> int:
        return self.signals[signal_id].value

    def scopes(self) -> list[str]:
        seen = {}
        for sig in self.signals.values():
            seen.setdefault(sig.scope, None)
        return list(seen)

    # -- scheduling ---------------------------------------------------------
    def _push(self, at: int, signal_id, value, action) -> Event:
        at = int(at)
        if at < self.now:
            raise TimeViolation(f"cannot schedule at t={at} ps, now is t={self.now} ps")
        ev = Event(at, next(self._seq), signal_id, value, action)
        heapq.heappush(self._queue, (ev.time, ev.seq, ev))
        self.scheduled += 1
        return ev

    def schedule(self, signal_id: str, new_value: int, at: int) -> Event:
        if signal_id not in self.signals:
            raise KeyError(signal_id)
        return self._push(at, signal_id, 1 if new_value else 0, None)

    def schedule_in(self, signal_id: str, new_value: int, delay: int) -> Event:
        return self.schedule(signal_id, new_value, self.now + delay)

    def call_at(self, at: int, action: Callable[[], None]) -> Event:
        """Schedule a bare callback (a timer) at time ``at``."""
        return self._push(at, None, 0, action)

    def cancel(self, event: Event) -> None:
        if not event.cancelled:
            event.cancelled = True
            self.cancelled += 1

    def cancel_pending(self, signal_ids) -> int:
        """Cancel every queued event driving one of ``signal_ids``."""
        targets = set(signal_ids)
        n = 0
        for _, _, ev in self._queue:
            if not ev.cancelled and ev.signal_id in targets:
                self.cancel(ev)
                n += 1
        return n

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._queue if not ev.cancelled)

    def on_edge(self, signal_id: str, edge: str, callback: Callable[[Signal], None]):
        if edge not in _EDGES:
            raise ValueError(f"edge must be one of {_EDGES}")
        sig = self.signals[signal_id]
        handle = (edge, callback)
        sig.listeners.append(handle)
        return handle

    # -- execution ----------------------------------------------------------
    def _deliver(self, ev: Event) -> None:
        if ev.time != self.now:
            self.now = ev.time
            self._same_time = 0
        self._same_time += 1
        if self._same_time > self.iteration_cap:
            raise CombinationalLoop(
                f"more than {self.iteration_cap} deliveries at t={self.now} ps")
        self.delivered += 1
        if ev.action is not None:
            ev.action()
            return
        sig = self.signals[ev.signal_id]
        old = sig.value
        if old == ev.new_value:
            return
        sig.value = ev.new_value
        sig.last_transition = self.now
        sig.transition_count += 1
        if self.record:
            self.trace.append((self.now, sig.id, sig.value))
        rising = ev.new_value == 1
        for edge, cb in list(sig.listeners):
            if edge == ANY or (edge == RISING) == rising:
                cb(sig)

    def run_until(self, deadline: int) -> int:
        """Deliver all events with ``time <= deadline``; return how many."""
        n = 0
        q = self._queue
        while q and q[0][0] <= deadline:
            _, _, ev = heapq.heappop(q)
            if ev.cancelled:
                continue
            self._deliver(ev)
            n += 1
        while q and q[0][2].cancelled:
            heapq.heappop(q)
        if q and deadline > self.now:
            self.now = deadline
        return n

    def run(self, max_time: Optional[int] = None) -> int:
        """Drain the queue (optionally stopping at ``max_time``)."""
        if max_time is None:
            n = 0
            while self._queue:
                n += self.run_until(self._queue[0][0])
            return n
        return self.run_until(max_time)


class Wire:
    """Transport delay from one net to another."""

    def __init__(self, kernel: Kernel, src: str, dst: str, delay: int = 0):
        self.kernel, self.dst, self.delay = kernel, dst, int(delay)
        kernel.on_edge(src, ANY, self._follow)

    def _follow(self, sig: Signal) -> None:
        self.kernel.schedule(self.dst, sig.value, self.kernel.now + self.delay)


class OrGate:
    def __init__(self, kernel: Kernel, inputs, output: str, delay: int = 0):
        self.kernel, self.inputs, self.output, self.delay = kernel, list(inputs), output, int(delay)
        self._target = kernel.value(output)
        for net in self.inputs:
            kernel.on_edge(net, ANY, self._eval)

    def _eval(self, _sig) -> None:
        v = int(any(self.kernel.value(n) for n in self.inputs))
        if v != self._target:
            self._target = v
            self.kernel.schedule(self.output, v, self.kernel.now + self.delay)
