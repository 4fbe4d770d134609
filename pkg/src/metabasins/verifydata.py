"""Prebuilt fixture bundles shared by the acceptance criteria."""

from __future__ import annotations

from dataclasses import dataclass

from .filtration import Filtration, scoppola_filtration
from .landscape import Landscape, canonical
from .saddles import SaddleTable, saddle_table
from .valleys import ValleyDecomposition, decompose_all


@dataclass(frozen=True, eq=False)
class FixtureBundle:
    name: str
    l: Landscape
    f: Filtration
    table: SaddleTable
    decomps: list[ValleyDecomposition]

    @classmethod
    def of(cls, name: str) -> "FixtureBundle":
        l = canonical(name)
        f = scoppola_filtration(l)
        table = saddle_table(l)
        return cls(name, l, f, table, decompose_all(l, f, table))


@dataclass(frozen=True, eq=False)
class FixtureSet:
    l6: FixtureBundle
    l14: FixtureBundle
    l14x: FixtureBundle

    @classmethod
    def build(cls) -> "FixtureSet":
        return cls(FixtureBundle.of("L6"), FixtureBundle.of("L14"), FixtureBundle.of("L14X"))
