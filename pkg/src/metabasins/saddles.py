"""Minimal paths, essential saddles and activation energies.

The essential saddle z*(r,s) is the unique highest-energy state on an
energy-minimax self-avoiding path between r and s. The convention here is
endpoint inclusive: the maximum runs over *all* path states including r and s,
so for an adjacent pair the saddle is the higher endpoint. This keeps the
table symmetric and makes the saddle energy of a valley bottom to its own
outer boundary equal to the boundary state's energy.

Two independent algorithms are provided (a Kruskal-style union-find sweep and
a minimax Dijkstra) so each can serve as an oracle for the other.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .landscape import Landscape


@dataclass(frozen=True)
class PathRecord:
    """A self-avoiding path with its maximal energy and cumulative climb."""

    states: tuple[int, ...]
    max_energy: float
    activation: float


@dataclass(frozen=True, eq=False)
class SaddleTable:
    """All-pairs essential saddles.

    ``state[a, b]`` is z*(a,b) and ``energy[a, b]`` its energy; both symmetric.
    The diagonal holds the convention z*(a,a) = a with energy E(a), which is
    what the bound evaluators need for the "start equals target" case.
    """

    state: np.ndarray
    energy: np.ndarray


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.members = [[v] for v in range(n)]

    def find(self, v):
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a, b):
        """Merge the two roots, smaller member list into larger."""
        if len(self.members[a]) < len(self.members[b]):
            a, b = b, a
        self.parent[b] = a
        self.members[a].extend(self.members[b])
        self.members[b] = []
        return a


def _energy_order(l: Landscape):
    return np.argsort(l.energy)


def saddle_table(l: Landscape) -> SaddleTable:
    """Single increasing-energy sweep; pairs get their saddle at the merge event."""
    n = l.n
    state = np.full((n, n), -1, dtype=int)
    energy = np.full((n, n), np.nan)
    uf = _UnionFind(n)
    active = np.zeros(n, dtype=bool)
    for z in _energy_order(l):
        z = int(z)
        active[z] = True
        for u in l.neighbors[z]:
            if not active[u]:
                continue
            rz, ru = uf.find(z), uf.find(u)
            if rz == ru:
                continue
            for a in uf.members[rz]:
                for b in uf.members[ru]:
                    state[a, b] = state[b, a] = z
                    energy[a, b] = energy[b, a] = l.energy[z]
            uf.union(rz, ru)
    for a in range(n):
        state[a, a] = a
        energy[a, a] = l.energy[a]
    assert state.min() >= 0, "landscape not connected"
    return SaddleTable(state, energy)


def essential_saddle(l: Landscape, r: int, s: int) -> tuple[int, float]:
    """Saddle of one pair via the sweep, stopping as soon as r and s connect."""
    if r == s:
        raise ValueError("essential saddle of a state with itself is undefined")
    uf = _UnionFind(l.n)
    active = np.zeros(l.n, dtype=bool)
    for z in _energy_order(l):
        z = int(z)
        active[z] = True
        for u in l.neighbors[z]:
            if active[u]:
                ru, rz = uf.find(u), uf.find(z)
                if ru != rz:
                    uf.union(rz, ru)
        if uf.find(r) == uf.find(s):
            return z, float(l.energy[z])
    raise ValueError("states not connected")


def minimax_path(l: Landscape, r: int, s: int) -> PathRecord:
    """Minimax Dijkstra: independent algorithm returning one minimal path.

    Path cost is the maximum energy over all its states (endpoints included);
    among paths achieving the optimum an arbitrary one is returned, but the
    argmax state on it is the unique essential saddle.
    """
    if r == s:
        raise ValueError("r == s")
    best = np.full(l.n, np.inf)
    best[r] = l.energy[r]
    prev = np.full(l.n, -1, dtype=int)
    heap = [(best[r], r)]
    done = np.zeros(l.n, dtype=bool)
    while heap:
        cost, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        if v == s:
            break
        for u in l.neighbors[v]:
            c = max(cost, float(l.energy[u]))
            if c < best[u]:
                best[u] = c
                prev[u] = v
                heapq.heappush(heap, (c, u))
    if not done[s]:
        raise ValueError("states not connected")
    path = [s]
    while path[-1] != r:
        path.append(int(prev[path[-1]]))
    path.reverse()
    act = sum(max(l.energy[b] - l.energy[a], 0.0) for a, b in zip(path, path[1:]))
    return PathRecord(tuple(path), float(best[s]), float(act))


def activation_energy(l: Landscape, s: int, m: int) -> float:
    """Least cumulative uphill climb from s to m.

    Dijkstra with step weight (E(t)-E(u))^+ for a move u -> t. The optimum over
    walks equals the optimum over self-avoiding paths (dropping a loop never
    increases the sum), so a plain shortest path is exact.
    """
    if s == m:
        raise ValueError("s == m")
    dist = np.full(l.n, np.inf)
    dist[s] = 0.0
    heap = [(0.0, s)]
    done = np.zeros(l.n, dtype=bool)
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        if v == m:
            return float(d)
        for u in l.neighbors[v]:
            nd = d + max(float(l.energy[u] - l.energy[v]), 0.0)
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    raise ValueError("states not connected")


def sublevel_connected(l: Landscape, s: int, t: int, barrier: float, avoid=frozenset()) -> bool:
    """Are s and t connected inside {x : E(x) <= barrier} minus ``avoid``?

    A self-avoiding path within the sublevel set at the pair's saddle energy
    is exactly a minimal path, so "every minimal path from s to t hits V" is
    the negation of this predicate with avoid = V. States outside the
    subgraph (too high, or avoided) are never connected to anything.
    """
    avoid = set(avoid)

    def admissible(v):
        return l.energy[v] <= barrier and v not in avoid

    if not admissible(s) or not admissible(t):
        return False
    if s == t:
        return True
    seen = {s}
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for u in l.neighbors[v]:
            if u == t and admissible(u):
                return True
            if u not in seen and admissible(u):
                seen.add(u)
                queue.append(u)
    return False


def _monotone_paths(l, start, goal, avoid, increasing, limit=200_000):
    """All strictly monotone self-avoiding paths start -> goal avoiding a set."""
    sign = 1.0 if increasing else -1.0
    out = []
    budget = [limit]
    path = [start]

    def dfs(v):
        if budget[0] <= 0:
            return
        budget[0] -= 1
        if v == goal:
            out.append(tuple(path))
            return
        for u in l.neighbors[v]:
            if u in avoid or u in path:
                continue
            if sign * (l.energy[u] - l.energy[v]) <= 0:
                continue
            # no point climbing past the goal when ascending (resp. below it)
            if increasing and l.energy[u] > l.energy[goal]:
                continue
            if not increasing and l.energy[u] < l.energy[goal]:
                continue
            path.append(u)
            dfs(u)
            path.pop()

    dfs(start)
    return out


def uphill_downhill_path(l: Landscape, frm: int, to: int, avoid=frozenset()):
    """A minimal path strictly rising to z*(frm, to) and strictly falling to ``to``.

    Returns a PathRecord or None. ``avoid`` excludes intermediate states (the
    endpoints and the saddle must themselves be admissible). The two monotone
    legs are searched separately and joined on vertex disjointness.
    """
    if frm == to:
        raise ValueError("frm == to")
    avoid = frozenset(avoid)
    z, ez = essential_saddle(l, frm, to)
    if (z != frm and z in avoid) or (z != to and z in avoid):
        return None

    def record(states):
        return PathRecord(tuple(states), ez, ez - float(l.energy[frm]))

    if z == frm:
        for down in _monotone_paths(l, z, to, avoid - {to}, increasing=False):
            return record(down)
        return None
    if z == to:
        for up in _monotone_paths(l, frm, z, avoid - {frm}, increasing=True):
            return record(up)
        return None
    ups = _monotone_paths(l, frm, z, avoid - {frm}, increasing=True)
    downs = _monotone_paths(l, z, to, avoid - {to}, increasing=False)
    for up in ups:
        interior = set(up[:-1])
        for down in downs:
            if interior.isdisjoint(down[1:]):
                return record(up + down[1:])
    return None
