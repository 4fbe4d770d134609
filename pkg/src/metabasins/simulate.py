"""Trajectory simulation, Monte-Carlo estimators, path-dependent metabasins.

``run_metropolis`` samples the lazy chain literally. The estimators instead
run the embedded jump chain (self-loops collapsed) and, where real time is
needed, add exact geometric holding times; this is distribution-exact for
hitting races, exit times and for the block structure below, while staying
feasible at large beta where the lazy chain would sit still for e^{50+} steps.

The path-dependent blocks of a trajectory cut it at the indices whose tail
never revisits an earlier state. A cut can never fall inside a run of
repeated states, so the blocks, as sets, are invariant under collapsing
self-loops; the naive reference implementation is kept for testing that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aggregation import MetastateSpace, project_trajectory
from .chain import TransitionModel, off_diagonal_row_sums
from .valleys import ValleyDecomposition


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    beta: float
    seed: int
    start: int
    kind: str = "lazy"   # "lazy" or "jump" (self-loops collapsed)

    def __len__(self):
        return len(self.states)


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent stream per (seed, replica); serial and parallel runs agree."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(replica,)))


def run_metropolis(model: TransitionModel, start: int, steps: int, seed: int) -> Trajectory:
    """Literal sampling from the kernel rows, lazy self-loops included."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    rng = np.random.default_rng(seed)
    cums = np.cumsum(model.P, axis=1)
    out = np.empty(steps + 1, dtype=int)
    out[0] = start
    us = rng.random(steps)
    cur = start
    for k in range(steps):
        cur = int(np.searchsorted(cums[cur], us[k], side="right"))
        out[k + 1] = cur
    return Trajectory(out, model.beta, seed, start, "lazy")


class _ChainTables:
    """Per-model embedded-chain tables, reusable across replica streams."""

    def __init__(self, model: TransitionModel):
        self.neighbors = []
        self.cums = []
        self.stay = []       # p(r, r)
        P = model.P
        for r in range(model.n):
            ns = list(model.landscape.neighbors[r])
            mass = float(off_diagonal_row_sums(P, [r])[0])
            acc, c = [], 0.0
            for s in ns:
                c += float(P[r, s])
                acc.append(c / mass)
            acc[-1] = 1.0
            self.neighbors.append(ns)
            self.cums.append(acc)
            self.stay.append(float(P[r, r]))


class _JumpSampler:
    """Embedded chain walk over shared tables with a buffered uniform stream."""

    def __init__(self, model: TransitionModel, rng: np.random.Generator,
                 tables: _ChainTables | None = None):
        self.rng = rng
        t = tables if tables is not None else _ChainTables(model)
        self.neighbors = t.neighbors
        self.cums = t.cums
        self.stay = t.stay
        self._buf: list[float] = []
        self._pos = 0
        self._chunk = 64   # grows geometrically; short replicas stay cheap

    def refill(self) -> None:
        self._buf = self.rng.random(self._chunk).tolist()
        self._pos = 0
        self._chunk = min(self._chunk * 4, 65536)

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self.refill()
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def step(self, r: int) -> int:
        u = self.uniform()
        for a, s in zip(self.cums[r], self.neighbors[r]):
            if u <= a:
                return s
        return self.neighbors[r][-1]

    def holding(self, r: int) -> float:
        """Lazy steps spent at r before moving, a Geometric(1 - p(r,r)) draw."""
        p = self.stay[r]
        if p <= 0.0:
            return 1.0
        u = self.uniform()
        while u <= 0.0:
            u = self.uniform()
        return 1.0 + math.floor(math.log(u) / math.log(p))


def run_jump_chain(model: TransitionModel, start: int, steps: int, seed: int) -> Trajectory:
    sampler = _JumpSampler(model, np.random.default_rng(seed))
    out = np.empty(steps + 1, dtype=int)
    out[0] = start
    cur = start
    for k in range(steps):
        cur = sampler.step(cur)
        out[k + 1] = cur
    return Trajectory(out, model.beta, seed, start, "jump")


@dataclass(frozen=True)
class PathDependentMB:
    chi: tuple[int, ...]
    blocks: tuple[frozenset[int], ...]
    upsilon: int


def path_dependent_mb(states, T: int) -> PathDependentMB:
    """Blocks of the first T+1 trajectory entries, via occurrence intervals.

    Index k > 0 is a cut exactly when no state occurs both before and at-or-
    after k, i.e. when k is not covered by any (first occurrence, last
    occurrence] interval; that is an O(T + |S|) scan. The final block is
    closed at T + 1.
    """
    states = list(states[: T + 1])
    if len(states) != T + 1:
        raise ValueError("trajectory shorter than the requested horizon")
    first: dict[int, int] = {}
    last: dict[int, int] = {}
    for k, s in enumerate(states):
        first.setdefault(s, k)
        last[s] = k
    cover = [0] * (T + 3)
    for s, f in first.items():
        if last[s] > f:
            cover[f + 1] += 1
            cover[last[s] + 1] -= 1
    chi = [0]
    running = 0
    for k in range(1, T + 1):
        running += cover[k]
        if running == 0:
            chi.append(k)
    edges = chi + [T + 1]
    blocks = tuple(
        frozenset(states[a:b]) for a, b in zip(edges, edges[1:])
    )
    return PathDependentMB(tuple(chi), blocks, len(chi) - 1)


def path_dependent_mb_naive(states, T: int) -> PathDependentMB:
    """Literal recursion over the cut definition; quadratic, for testing only."""
    states = list(states[: T + 1])
    if len(states) != T + 1:
        raise ValueError("trajectory shorter than the requested horizon")
    chi = [0]
    while True:
        nxt = None
        for k in range(chi[-1] + 1, T + 1):
            if set(states[k:]).isdisjoint(states[:k]):
                nxt = k
                break
        if nxt is None:
            break
        chi.append(nxt)
    edges = chi + [T + 1]
    blocks = tuple(frozenset(states[a:b]) for a, b in zip(edges, edges[1:]))
    return PathDependentMB(tuple(chi), blocks, len(chi) - 1)


def estimate_hitting(model: TransitionModel, x: int, targets, competitors,
                     reps: int, seed: int) -> tuple[float, float]:
    """Unbiased frequency estimate of P_x(tau_A < tau_B) with standard error."""
    if reps < 1:
        raise ValueError("reps must be positive")
    A = frozenset(targets)
    B = frozenset(competitors)
    cums_full = np.cumsum(model.P, axis=1)
    tables = _ChainTables(model)
    hits = 0
    for k in range(reps):
        sampler = _JumpSampler(model, replica_rng(seed, k), tables)
        # one literal lazy first step honours the first-return convention
        cur = int(np.searchsorted(cums_full[x], sampler.uniform(), side="right"))
        while cur not in A and cur not in B:
            cur = sampler.step(cur)
        hits += cur in A
    p = hits / reps
    return p, math.sqrt(p * (1 - p) / reps)


def sample_exit_time(sampler: _JumpSampler, start: int, nonassigned: frozenset[int]) -> float:
    time = 0.0
    cur = start
    while cur not in nonassigned:
        time += sampler.holding(cur)
        cur = sampler.step(cur)
    return time


def estimate_exit_time(model: TransitionModel, d, m: int,
                       reps: int, seed: int) -> tuple[float, float]:
    """Mean lazy-time exit from the valley of m (first entry into the
    non-assigned set); ``d`` is anything exposing ``nonassigned``."""
    if reps < 1:
        raise ValueError("reps must be positive")
    nonassigned = frozenset(d.nonassigned)
    samples = np.empty(reps)
    tables = _ChainTables(model)
    for k in range(reps):
        sampler = _JumpSampler(model, replica_rng(seed, k), tables)
        samples[k] = sample_exit_time(sampler, m, nonassigned)
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(reps))


def run_until_sigma(model: TransitionModel, ms: MetastateSpace, start: int,
                    K: int, seed: int, max_steps: int = 50_000_000,
                    sampler: _JumpSampler | None = None) -> np.ndarray:
    """Jump-chain trajectory from ``start`` up to and including its K-th AC change."""
    if sampler is None:
        sampler = _JumpSampler(model, np.random.default_rng(seed))
    # the inner loop runs for ~e^{beta * gap} steps per valley exit; keep it flat
    neighbors = sampler.neighbors
    cums = sampler.cums
    rng = sampler.rng
    rep = ms.rep_of.tolist()
    states = [start]
    append = states.append
    cur = start
    cur_m = rep[start]
    changes = 0
    buf: list[float] = []
    pos = nbuf = 0
    steps = 0
    while changes < K:
        if pos >= nbuf:
            sampler.refill()
            buf = sampler._buf
            nbuf = len(buf)
            pos = 0
        u = buf[pos]
        pos += 1
        row = cums[cur]
        i = 0
        while row[i] < u:
            i += 1
        cur = neighbors[cur][i]
        append(cur)
        m = rep[cur]
        if m != cur_m:
            changes += 1
            cur_m = m
        steps += 1
        if steps > max_steps:
            raise RuntimeError("trajectory budget exhausted before the K-th jump")
    sampler._pos = pos   # keep the shared stream consistent for later use
    return np.asarray(states, dtype=int)


def strict_basins_for(ms: MetastateSpace, decomps: list[ValleyDecomposition]) -> dict[int, frozenset[int]]:
    """Strict basin of each metastate at its own level; singletons for non-assigned."""
    out: dict[int, frozenset[int]] = {}
    for m in ms.metastates:
        if m in ms.nonassigned:
            out[m] = frozenset([m])
        else:
            out[m] = decomps[ms.valley_level[m] - 1].strict[m]
    return out


@dataclass(frozen=True)
class MBComparison:
    inner_in_block: tuple[bool, ...]    # V_<(Y_k) inside the block of Y_k, k < K
    blocks_in_valleys_open: bool        # blocks of Y_j inside V(Y_j) for j < K-1
    blocks_in_valleys_full: bool        # same for j <= K-1
    straddling_blocks: int
    revisit_occurred: bool


def compare_mb(states, ms: MetastateSpace, K: int,
               strict_of: dict[int, frozenset[int]]) -> MBComparison:
    """Path-dependent blocks against valleys over the window T = sigma_K."""
    _, stop, y = project_trajectory(states, ms)
    if len(stop.sigma) < K + 1:
        raise ValueError(f"trajectory has only {len(stop.sigma) - 1} AC jumps, need {K}")
    T = stop.sigma[K]
    pd = path_dependent_mb(states, T)

    def block_of(x: int) -> frozenset[int]:
        for b in pd.blocks:
            if x in b:
                return b
        return frozenset()

    inner = tuple(
        strict_of[y[k]] <= block_of(y[k]) for k in range(K)
    )
    open_ok = all(block_of(y[j]) <= ms.valley_of[y[j]] for j in range(max(K - 1, 0)))
    full_ok = all(block_of(y[j]) <= ms.valley_of[y[j]] for j in range(K))
    valley_sets = [ms.valley_of[m] for m in ms.valley_metastates]
    straddle = sum(
        1 for b in pd.blocks
        if sum(1 for v in valley_sets if b & v) >= 2
    )
    revisit = len(set(y[: K + 1])) < len(y[: K + 1])
    return MBComparison(inner, open_ok, full_ok, straddle, revisit)


def pd_vs_pid_frequencies(model: TransitionModel, ms: MetastateSpace,
                          strict_of: dict[int, frozenset[int]], start: int,
                          K: int, reps: int, seed: int):
    """Replica frequencies of the three comparison events, plus MC side data.

    Returns (freq_a per k, freq_b, freq_c, y1_counts, first_valley_counts).
    """
    count_a = np.zeros(K)
    count_b = 0
    count_c = 0
    y1_counts: dict[int, int] = {}
    entry_counts: dict[int, int] = {}
    tables = _ChainTables(model)
    for k in range(reps):
        sampler = _JumpSampler(model, replica_rng(seed, k), tables)
        states = run_until_sigma(model, ms, start, K, seed, sampler=sampler)
        cmp = compare_mb(states, ms, K, strict_of)
        count_a += np.asarray(cmp.inner_in_block, dtype=float)
        count_b += cmp.blocks_in_valleys_open
        count_c += cmp.blocks_in_valleys_full
        _, _, y = project_trajectory(states, ms)
        y1_counts[y[1]] = y1_counts.get(y[1], 0) + 1
        first_valley = next((m for m in y[1:] if m not in ms.nonassigned), None)
        if first_valley is not None:
            entry_counts[first_valley] = entry_counts.get(first_valley, 0) + 1
    return count_a / reps, count_b / reps, count_c / reps, y1_counts, entry_counts


def aac_return_frequency(model: TransitionModel, ms: MetastateSpace, start: int,
                         n_jumps: int, seed: int) -> float:
    """Frequency of immediate AAC returns Y_{k+2} = Y_k along one long run."""
    sampler = _JumpSampler(model, np.random.default_rng(seed))
    rep = ms.rep_of.tolist()
    y = [rep[start]]
    cur = start
    while len(y) < n_jumps + 1:
        cur = sampler.step(cur)
        m = rep[cur]
        if m != y[-1]:
            y.append(m)
    returns = sum(1 for k in range(len(y) - 2) if y[k + 2] == y[k])
    return returns / (len(y) - 2)
