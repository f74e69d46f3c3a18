"""Winner-takes-all arbitration of class race pulses.

Two layers live here. The pure functions (:func:`mutex_resolve`,
:func:`tba_arbitrate`, :func:`mesh_arbitrate`) compute the outcome of one
arbitration from a list of arrival times. The kernel classes build the same
networks out of :class:`MutexCell` instances driven by real net edges; tests
cross-check the two.

Metastability is behavioural: two requests closer than ``delta_meta`` make
the cell metastable, the winner is chosen by ``policy`` and the grant is
delayed by ``meta_penalty`` past the later request.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .kernel import ANY, FALLING, RISING, Kernel, OrGate, Wire

INF = math.inf
DETERMINISTIC = "deterministic-low-index"
SEEDED_RANDOM = "seeded-random"
TBA = "tba"
MESH = "mesh"


@dataclass(frozen=True)
class MutexModel:
    d_mutex: int = 30
    delta_meta: int = 5
    meta_penalty: int = 0
    policy: str = DETERMINISTIC

    def __post_init__(self):
        if self.d_mutex <= 0:
            raise ValueError("d_mutex must be positive")
        if self.delta_meta < 0 or self.meta_penalty < 0:
            raise ValueError("delta_meta and meta_penalty must be non-negative")
        if self.policy not in (DETERMINISTIC, SEEDED_RANDOM):
            raise ValueError(f"unknown policy {self.policy!r}")


class MutexOutcome(NamedTuple):
    winner: int          # 0 -> input a, 1 -> input b
    grant_time: float
    metastable: bool


@dataclass(frozen=True)
class GrantVector:
    grant: tuple
    grant_time: Optional[float]
    meta_events: int = 0
    cells_exercised: int = 0

    @property
    def winner(self) -> Optional[int]:
        return self.grant.index(1) if 1 in self.grant else None


class ArbiterCost(NamedTuple):
    depth: int
    cells: int
    latency: int


def cell_seed(seed, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *map(int, key)])


def _policy_winner(mutex: MutexModel, seed) -> int:
    if mutex.policy == DETERMINISTIC:
        return 0
    return int(np.random.default_rng(seed).integers(2))


def mutex_resolve(t_a, t_b, mutex: MutexModel, seed=0) -> MutexOutcome:
    """Two-input mutual exclusion; an absent request is ``math.inf``."""
    if t_a == INF and t_b == INF:
        raise ValueError("at least one request must arrive")
    if abs(t_a - t_b) > mutex.delta_meta:
        w = 0 if t_a < t_b else 1
        return MutexOutcome(w, min(t_a, t_b) + mutex.d_mutex, False)
    w = _policy_winner(mutex, seed)
    return MutexOutcome(w, max(t_a, t_b) + mutex.d_mutex + mutex.meta_penalty, True)


def _one_hot(m: int, w: Optional[int]) -> tuple:
    return tuple(int(i == w) for i in range(m))


def tree_layers(m: int) -> int:
    return max(1, math.ceil(math.log2(m))) if m > 1 else 1


def tba_arbitrate(arrivals: Sequence, mutex: MutexModel, seed=0,
                  d_or: int = 15, d_celement: int = 25) -> GrantVector:
    """Binary tournament; missing slots of a non-power-of-two tree are byes.

    A bye is not a Mutex cell: the lone entrant passes through a delay matched
    to one cell, so the tree holds exactly ``m - 1`` cells. A request that
    never arrives on a real input is ``math.inf``.
    """
    m = len(arrivals)
    if m < 1:
        raise ValueError("need at least one class")
    layers = tree_layers(m)
    entrants = [(i, arrivals[i]) for i in range(m)] + [(None, INF)] * ((1 << layers) - m)
    meta = cells = 0
    for layer in range(layers):
        nxt = []
        for p in range(len(entrants) // 2):
            (ia, ta), (ib, tb) = entrants[2 * p], entrants[2 * p + 1]
            if ib is None:
                # bye slot: a matched delay instead of a Mutex keeps the layer latency
                nxt.append((ia, ta + mutex.d_mutex + d_or + d_celement if ia is not None else INF))
                continue
            cells += 1
            out = mutex_resolve(ta, tb, mutex, cell_seed(seed, 0, layer, p))
            meta += out.metastable
            nxt.append((ia if out.winner == 0 else ib, out.grant_time + d_or + d_celement))
        entrants = nxt
    w, t = entrants[0]
    if w is None:
        return GrantVector(_one_hot(m, None), None, 0, 0)
    return GrantVector(_one_hot(m, w), t, meta, cells)


def mesh_arbitrate(arrivals: Sequence, mutex: MutexModel, seed=0) -> GrantVector:
    """All-pairs Mutex network; a class is granted when it wins every pairing.

    Metastable pairings can form a cycle in which nobody wins everything. The
    cycle is broken once every class has lost at least once: the class whose
    first loss came last is granted, with one extra metastable event.
    """
    m = len(arrivals)
    if m < 1:
        raise ValueError("need at least one class")
    if m == 1:
        t = arrivals[0]
        return GrantVector((1,), t, 0, 0) if t != INF else GrantVector((0,), None)
    wins = [0] * m
    first_loss = [INF] * m
    last_grant = [-INF] * m
    meta = cells = 0
    for i in range(m):
        for j in range(i + 1, m):
            if arrivals[i] == INF and arrivals[j] == INF:
                continue
            cells += 1
            out = mutex_resolve(arrivals[i], arrivals[j], mutex, cell_seed(seed, 1, i, j))
            meta += out.metastable
            w, loser = (i, j) if out.winner == 0 else (j, i)
            wins[w] += 1
            first_loss[loser] = min(first_loss[loser], out.grant_time)
            last_grant[w] = max(last_grant[w], out.grant_time)
    if cells == 0:
        return GrantVector(_one_hot(m, None), None)
    chain = (m - 2) * mutex.d_mutex
    for i in range(m):
        if wins[i] == m - 1:
            return GrantVector(_one_hot(m, i), last_grant[i] + chain, meta, cells)
    t_cycle = max(first_loss)
    w = first_loss.index(t_cycle)
    return GrantVector(_one_hot(m, w), t_cycle + chain + mutex.meta_penalty, meta + 1, cells)


def arbiter_cost(topology: str, m: int, mutex: MutexModel = MutexModel(),
                 d_or: int = 15, d_celement: int = 25) -> ArbiterCost:
    if m < 2:
        raise ValueError("cost model needs m >= 2")
    if topology == TBA:
        depth = math.ceil(math.log2(m))
        return ArbiterCost(depth, m - 1, depth * (mutex.d_mutex + d_or + d_celement))
    if topology == MESH:
        return ArbiterCost(m - 1, m * (m - 1) // 2, (m - 1) * mutex.d_mutex)
    raise ValueError(f"unknown topology {topology!r}")


def arbitrate(topology: str, arrivals, mutex: MutexModel, seed=0, d_or=15, d_celement=25) -> GrantVector:
    if topology == TBA:
        return tba_arbitrate(arrivals, mutex, seed, d_or, d_celement)
    if topology == MESH:
        return mesh_arbitrate(arrivals, mutex, seed)
    raise ValueError(f"unknown topology {topology!r}")


# -- kernel components -------------------------------------------------------

class MutexCell:
    """Event-driven Mutex with a behavioural metastability window.

    The cell decides ``delta_meta + 1`` ps after the first request, by which
    time every request that could tie with it has been delivered. Needs
    ``delta_meta < d_mutex`` so the decision precedes the grant.
    """

    def __init__(self, kernel: Kernel, in_a: str, in_b: str, name: str, mutex: MutexModel,
                 key=(), scope: str = "arbiter"):
        if mutex.delta_meta >= mutex.d_mutex:
            raise ValueError("kernel Mutex cells need delta_meta < d_mutex")
        self.kernel, self.mutex, self.key = kernel, mutex, tuple(key)
        self.inputs = (in_a, in_b)
        self.g_a = kernel.signal(f"{name}_ga", scope)
        self.g_b = kernel.signal(f"{name}_gb", scope)
        self.grants = (self.g_a, self.g_b)
        self.t: list = [None, None]
        self.owner: Optional[int] = None
        self.pending = False
        self.seed = cell_seed(0, *self.key)
        self.meta_events = 0
        self.used = False
        kernel.on_edge(in_a, ANY, lambda s: self._on_input(0, s))
        kernel.on_edge(in_b, ANY, lambda s: self._on_input(1, s))

    def reseed(self, seed) -> None:
        self.seed = cell_seed(seed, *self.key)
        self.meta_events = 0
        self.used = False

    def _arm(self) -> None:
        if not self.pending:
            self.pending = True
            self.kernel.call_at(self.kernel.now + self.mutex.delta_meta + 1, self._decide)

    def _on_input(self, side: int, sig) -> None:
        k = self.kernel
        if sig.value:
            self.t[side] = k.now
            if self.owner is None:
                self._arm()
            return
        self.t[side] = None
        if self.owner == side:
            k.schedule(self.grants[side], 0, k.now + self.mutex.d_mutex)
            self.owner = None
            other = 1 - side
            if k.value(self.inputs[other]):
                self.t[other] = k.now
                self._arm()

    def _decide(self) -> None:
        self.pending = False
        k, mx = self.kernel, self.mutex
        high = [k.value(n) == 1 for n in self.inputs]
        if not any(high) or self.owner is not None:
            return
        self.used = True
        ta, tb = self.t
        if all(high) and abs(ta - tb) <= mx.delta_meta:
            w = _policy_winner(mx, self.seed)
            t = max(ta, tb) + mx.d_mutex + mx.meta_penalty
            self.meta_events += 1
        elif all(high):
            w = 0 if ta < tb else 1
            t = min(ta, tb) + mx.d_mutex
        else:
            w = 0 if high[0] else 1
            t = self.t[w] + mx.d_mutex
        self.owner = w
        k.schedule(self.grants[w], 1, max(t, k.now))


class OneHotMonitor:
    def __init__(self, kernel: Kernel, grants: Sequence[str]):
        self.kernel, self.grants = kernel, list(grants)
        self.violations: list[tuple[int, tuple]] = []
        for g in self.grants:
            kernel.on_edge(g, RISING, self._check)

    def _check(self, _sig) -> None:
        vals = tuple(self.kernel.value(g) for g in self.grants)
        if sum(vals) > 1:
            self.violations.append((self.kernel.now, vals))


class _KernelArbiter:
    def __init__(self, kernel: Kernel, races: Sequence[str], scope: str):
        self.kernel = kernel
        self.races = list(races)
        self.m = len(self.races)
        self.grant = [kernel.signal(f"grant_{i}", scope) for i in range(self.m)]
        self.cells: list[MutexCell] = []
        self.results: list[GrantVector] = []
        self.monitor = OneHotMonitor(kernel, self.grant)
        self._extra_meta = 0
        for i, g in enumerate(self.grant):
            kernel.on_edge(g, RISING, self._record(i))

    def begin(self, seed=0) -> None:
        """Reset per-arbitration state; call when a new race is launched."""
        self._extra_meta = 0
        for c in self.cells:
            c.reseed(seed)

    def _record(self, i: int):
        # metastable resolutions counted up to the grant edge; cells between
        # late losers may still resolve afterwards
        def rec(_sig) -> None:
            meta = sum(c.meta_events for c in self.cells) + self._extra_meta
            used = sum(c.used for c in self.cells)
            self.results.append(GrantVector(_one_hot(self.m, i), self.kernel.now, meta, used))
        return rec

    @property
    def meta_events(self) -> int:
        return sum(r.meta_events for r in self.results)


class TreeArbiter(_KernelArbiter):
    def __init__(self, kernel: Kernel, races: Sequence[str], mutex: MutexModel,
                 d_or: int = 15, d_celement: int = 25, scope: str = "arbiter"):
        super().__init__(kernel, races, scope)
        layers = tree_layers(self.m)
        bye = kernel.signal("bye", scope)
        level = self.races + [bye] * ((1 << layers) - self.m)
        self.layout: list[list[Optional[MutexCell]]] = []
        for layer in range(layers):
            row, nxt = [], []
            for p in range(len(level) // 2):
                a, b = level[2 * p], level[2 * p + 1]
                if b == bye:
                    row.append(None)
                    if a == bye:
                        nxt.append(bye)
                    else:
                        up = kernel.signal(f"t{layer}_{p}_up", scope)
                        Wire(kernel, a, up, mutex.d_mutex + d_or + d_celement)
                        nxt.append(up)
                    continue
                cell = MutexCell(kernel, a, b, f"t{layer}_{p}", mutex, (0, layer, p), scope)
                up = kernel.signal(f"t{layer}_{p}_up", scope)
                OrGate(kernel, cell.grants, up, d_or + d_celement)
                self.cells.append(cell)
                row.append(cell)
                nxt.append(up)
            self.layout.append(row)
            level = nxt
        self.root = level[0]
        self._current: Optional[int] = None
        kernel.on_edge(self.root, ANY, self._on_root)

    def _descend(self) -> int:
        p = 0
        for row in reversed(self.layout):
            cell = row[p]
            p = 2 * p + (0 if cell is None or self.kernel.value(cell.g_a) else 1)
        return p

    def _on_root(self, sig) -> None:
        k = self.kernel
        if sig.value:
            self._current = self._descend()
            k.schedule(self.grant[self._current], 1, k.now)
        elif self._current is not None:
            k.schedule(self.grant[self._current], 0, k.now)
            self._current = None


class MeshArbiter(_KernelArbiter):
    def __init__(self, kernel: Kernel, races: Sequence[str], mutex: MutexModel, scope: str = "arbiter"):
        super().__init__(kernel, races, scope)
        self.mutex = mutex
        self.pair: dict = {}
        if self.m == 1:
            Wire(kernel, self.races[0], self.grant[0], 0)
        for i in range(self.m):
            for j in range(i + 1, self.m):
                cell = MutexCell(kernel, self.races[i], self.races[j], f"m{i}_{j}", mutex, (1, i, j), scope)
                self.cells.append(cell)
                self.pair[(i, j)] = cell
                kernel.on_edge(cell.g_a, RISING, self._granted(i, j, i))
                kernel.on_edge(cell.g_b, RISING, self._granted(i, j, j))
        if self.m > 1:
            for i, race in enumerate(self.races):
                kernel.on_edge(race, FALLING, self._released(i))
        self._reset_state()

    def _reset_state(self) -> None:
        self.wins = [0] * self.m
        self.first_loss: list = [None] * self.m
        self.winner: Optional[int] = None

    def begin(self, seed=0) -> None:
        super().begin(seed)
        self._reset_state()

    def _granted(self, i: int, j: int, w: int):
        def on(_sig) -> None:
            k = self.kernel
            loser = j if w == i else i
            self.wins[w] += 1
            if self.first_loss[loser] is None:
                self.first_loss[loser] = k.now
            if self.winner is not None:
                return
            chain = (self.m - 2) * self.mutex.d_mutex
            if self.wins[w] == self.m - 1:
                self.winner = w
                k.schedule(self.grant[w], 1, k.now + chain)
            elif all(t is not None for t in self.first_loss):
                last = max(self.first_loss)
                self.winner = self.first_loss.index(last)
                self._extra_meta += 1
                k.schedule(self.grant[self.winner], 1, k.now + chain + self.mutex.meta_penalty)
        return on

    def _released(self, cls: int):
        def off(_sig) -> None:
            if self.winner == cls:
                k = self.kernel
                k.schedule(self.grant[cls], 0, k.now + self.mutex.d_mutex)
                self.winner = None
        return off


def build_arbiter(kernel: Kernel, topology: str, races: Sequence[str], mutex: MutexModel,
                  d_or: int = 15, d_celement: int = 25, scope: str = "arbiter"):
    if topology == TBA:
        return TreeArbiter(kernel, races, mutex, d_or, d_celement, scope)
    if topology == MESH:
        return MeshArbiter(kernel, races, mutex, scope)
    raise ValueError(f"unknown topology {topology!r}")
