"""Metropolis transition model and exact hitting/exit solvers.

The kernel is the lazy Metropolis chain

    p(r,s) = exp(-beta (E(s)-E(r))^+) / C(r)   for s ~ r,
    p(r,r) = 1 - sum of the above,

with C(r) = |N(r)| + 1 so that p(r,r) > 0 on every graph. Hitting quantities
use the first-return convention tau_A = inf{n >= 1 : X_n in A}; when the start
state lies in A or B one explicit first step is taken before reading the
absorption values.

Linear systems are assembled with diagonals built as sums of positive
off-diagonal mass, never as 1 - p(r,r); at large beta the latter is swallowed
by rounding while the former stays exact, which is what keeps exit times with
barriers like e^{70} solvable in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .landscape import Landscape


@dataclass(frozen=True)
class HittingQuery:
    start: int
    target: frozenset[int]
    competitor: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "target", frozenset(self.target))
        object.__setattr__(self, "competitor", frozenset(self.competitor))
        if not self.target:
            raise ValueError("target set is empty")
        if self.target & self.competitor:
            raise ValueError("target and competitor sets overlap")


@dataclass(frozen=True, eq=False)
class TransitionModel:
    landscape: Landscape
    beta: float
    degree_plus: np.ndarray          # C(r) = |N(r)| + 1
    P: np.ndarray                    # row-stochastic kernel
    gamma_beta: float
    pi: np.ndarray                   # stationary distribution
    P_star: np.ndarray               # entrywise beta -> infinity limit

    @property
    def n(self) -> int:
        return self.landscape.n


def gamma_beta(l: Landscape, beta: float) -> float:
    """|S| * max_r ln C(r) / sqrt(beta + 1), the slack constant of the kernel bounds."""
    cmax = max(len(nb) + 1 for nb in l.neighbors)
    return l.n * math.log(cmax) / math.sqrt(beta + 1.0)


def build_metropolis(l: Landscape, beta: float) -> TransitionModel:
    if beta <= 0:
        raise ValueError("beta must be positive")
    n = l.n
    energy = l.energy
    C = np.array([len(nb) + 1 for nb in l.neighbors], dtype=float)
    P = np.zeros((n, n))
    Pstar = np.zeros((n, n))
    for r in range(n):
        for s in l.neighbors[r]:
            P[r, s] = math.exp(-beta * max(energy[s] - energy[r], 0.0)) / C[r]
            if energy[r] >= energy[s]:
                Pstar[r, s] = 1.0 / C[r]
        P[r, r] = 1.0 - P[r].sum()
        Pstar[r, r] = 1.0 - Pstar[r].sum()
    # pi(r) proportional to C(r) exp(-beta E(r)); shift by the minimum for stability
    w = C * np.exp(-beta * (energy - energy.min()))
    pi = w / w.sum()
    return TransitionModel(l, float(beta), C, P, gamma_beta(l, beta), pi, Pstar)


def stationary(model: TransitionModel) -> np.ndarray:
    return model.pi


def off_diagonal_row_sums(P: np.ndarray, rows) -> np.ndarray:
    """1 - p(r,r) for each listed row, computed without cancellation."""
    rows = np.asarray(rows, dtype=int)
    block = P[rows].copy()
    block[np.arange(len(rows)), rows] = 0.0
    return block.sum(axis=1)


def _absorption_system(P: np.ndarray, absorbing: frozenset[int]):
    """Transient index list and the matrix (I - Q) with exact diagonals."""
    n = P.shape[0]
    transient = [s for s in range(n) if s not in absorbing]
    if not transient:
        return transient, np.zeros((0, 0))
    A = -P[np.ix_(transient, transient)]
    np.fill_diagonal(A, off_diagonal_row_sums(P, transient))
    return transient, A


def absorption_probabilities(P: np.ndarray, targets, others=frozenset()) -> np.ndarray:
    """P(hit ``targets`` before ``others``) from every state, both sets absorbing.

    Entries for states inside the sets are their indicator values.
    """
    targets = frozenset(targets)
    others = frozenset(others)
    transient, A = _absorption_system(P, targets | others)
    h = np.zeros(P.shape[0])
    for t in targets:
        h[t] = 1.0
    if transient:
        b = P[np.ix_(transient, sorted(targets))].sum(axis=1)
        h[transient] = np.linalg.solve(A, b)
    return h


def expected_absorption_times(P: np.ndarray, absorbing) -> np.ndarray:
    """E(steps until the absorbing set) from every state (0 inside the set)."""
    absorbing = frozenset(absorbing)
    transient, A = _absorption_system(P, absorbing)
    t = np.zeros(P.shape[0])
    if transient:
        t[transient] = np.linalg.solve(A, np.ones(len(transient)))
    return t


def hitting_probability(model: TransitionModel, query: HittingQuery) -> float:
    """Exact P_start(tau_A < tau_B) honoring the n >= 1 convention."""
    P = model.P
    h = absorption_probabilities(P, query.target, query.competitor)
    x = query.start
    if x in query.target or x in query.competitor:
        # one explicit first step, then read the absorption values
        return float(P[x] @ h)
    return float(h[x])


def expected_hitting_time(model: TransitionModel, start: int, targets) -> float:
    """Exact E_start(tau_A), again with the n >= 1 convention."""
    targets = frozenset(targets)
    t = expected_absorption_times(model.P, targets)
    if start in targets:
        return float(1.0 + model.P[start] @ t)
    return float(t[start])


def occupation_distribution(model: TransitionModel, mu0, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be nonnegative")
    mu = np.asarray(mu0, dtype=float).copy()
    for _ in range(n):
        mu = mu @ model.P
    return mu


def restricted_transition_matrix(model: TransitionModel, states) -> tuple[np.ndarray, list[int]]:
    """Kernel of the chain restricted to a subgraph.

    Off-diagonal entries are copied from the full chain; the removed mass is
    folded into the diagonal, so the restriction is again row stochastic.
    """
    states = sorted(states)
    sub = model.P[np.ix_(states, states)].copy()
    np.fill_diagonal(sub, 0.0)
    np.fill_diagonal(sub, 1.0 - sub.sum(axis=1))
    return sub, states


def restricted_hitting_probability(model: TransitionModel, states, start: int,
                                   target: int, competitor: int) -> float:
    """P(tau_target < tau_competitor) for the chain restricted to ``states``."""
    sub, order = restricted_transition_matrix(model, states)
    idx = {s: k for k, s in enumerate(order)}
    h = absorption_probabilities(sub, {idx[target]}, {idx[competitor]})
    x = idx[start]
    if start in (target, competitor):
        return float(sub[x] @ h)
    return float(h[x])


def kernel_sandwich_holds(model: TransitionModel) -> bool:
    """Do all neighbor pairs satisfy the two-sided kernel bounds?

    The lower bound needs beta / sqrt(beta+1) >= 1, i.e. beta at least the
    golden ratio; below that the stated slack is too small for the
    largest-degree state.
    """
    l = model.landscape
    g = model.gamma_beta / l.n
    beta = model.beta
    for r in range(l.n):
        for s in l.neighbors[r]:
            de = max(l.energy[s] - l.energy[r], 0.0)
            lo = math.exp(-beta * (de + g))
            hi = math.exp(-beta * (de - g))
            if not (lo <= model.P[r, s] <= hi):
                return False
    return True
