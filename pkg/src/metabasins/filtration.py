"""Successive deletion of the least stable local minimum.

Starting from the full set of local minima, each step removes the minimum
whose cheapest activation energy to any other remaining minimum is smallest,
until a single state survives. Ties (possible because activation energies are
sums even though energies are distinct) delete the higher-energy minimum.
"""

from __future__ import annotations

from dataclasses import dataclass

from .landscape import Landscape
from .saddles import activation_energy


def local_minima(l: Landscape) -> frozenset[int]:
    """States with strictly lower energy than all neighbors."""
    return frozenset(
        s for s in range(l.n)
        if all(l.energy[s] < l.energy[r] for r in l.neighbors[s])
    )


@dataclass(frozen=True)
class Filtration:
    """Deletion order m^(1), ..., m^(nlevels); the last entry never gets deleted."""

    deletion_order: tuple[int, ...]
    deletion_costs: tuple[float, ...]

    @property
    def levels(self) -> int:
        return len(self.deletion_order)

    def M(self, i: int) -> frozenset[int]:
        """Metastable set at level i: the minima not yet deleted."""
        if not 1 <= i <= self.levels:
            raise ValueError(f"level {i} out of range 1..{self.levels}")
        return frozenset(self.deletion_order[i - 1:])

    @property
    def terminal(self) -> int:
        return self.deletion_order[-1]


def scoppola_filtration(l: Landscape) -> Filtration:
    minima = local_minima(l)
    if not minima:
        raise ValueError("landscape has no local minimum")
    current = set(minima)
    order: list[int] = []
    costs: list[float] = []
    while len(current) > 1:
        best = None
        for m in current:
            cost = min(activation_energy(l, m, n) for n in current if n != m)
            # tie break: prefer smaller cost, then higher energy
            key = (cost, -l.energy[m])
            if best is None or key < best[0]:
                best = (key, m, cost)
        _, m, cost = best
        current.remove(m)
        order.append(m)
        costs.append(float(cost))
    order.append(next(iter(current)))
    return Filtration(tuple(order), tuple(costs))
