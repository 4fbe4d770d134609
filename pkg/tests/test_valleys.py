import math

import pytest

from metabasins import reference
from metabasins.filtration import scoppola_filtration
from metabasins.landscape import gen_random_landscape
from metabasins.saddles import saddle_table
from metabasins.valleys import (
    attracted,
    build_tree,
    connectivity_params,
    decompose,
    decompose_all,
    outer_boundary,
    strict_basin,
    tree_to_dot,
)
from metabasins.aggregation import metastate_space


def test_strict_basins_l6(L6):
    l, t = L6.l, L6.table
    assert strict_basin(l, t, {0, 2, 4}, 4) == {4, 5}
    # state 1 ties at barrier 5 between 0 and 2
    assert strict_basin(l, t, {0, 2, 4}, 0) == {0}
    assert strict_basin(l, t, {0, 4}, 0) == {0, 1, 2}


def test_attracted_l6(L6):
    l, t = L6.l, L6.table
    level1 = {0, 2, 4}
    assert not attracted(l, t, level1, 1, 0)
    assert not attracted(l, t, level1, 1, 2)
    level2 = {0, 4}
    assert attracted(l, t, level2, 1, 0)
    assert not attracted(l, t, level2, 3, 0)
    assert not attracted(l, t, level2, 3, 4)


def test_decompose_l6_levels(L6):
    d1, d2, d3 = L6.decomps
    assert d1.valley == {0: frozenset({0}), 2: frozenset({2}), 4: frozenset({4, 5})}
    assert d1.nonassigned == {1, 3}
    assert d2.valley == {0: frozenset({0, 1, 2}), 4: frozenset({4, 5})}
    assert d2.nonassigned == {3}
    assert d2.merge_level[1] == 2        # minimum deleted first merges at level 2
    assert d3.valley == {4: frozenset(range(6))}
    assert d3.nonassigned == frozenset()
    assert d3.merge_level[2] == 3
    assert math.isinf(d3.merge_level[3])


def test_exit_gates_l6(L6):
    d1, d2, d3 = L6.decomps
    assert d1.exit_gate == {0: 1, 2: 1, 4: 3}
    assert d2.exit_gate == {0: 3, 4: 3}
    # the full-space valley has no outer boundary
    assert d3.exit_gate == {4: None}


def test_decompose_level_range(L6):
    with pytest.raises(ValueError):
        decompose(L6.l, L6.f, 0)
    with pytest.raises(ValueError):
        decompose(L6.l, L6.f, 4)


def test_l14_reconstruction_nonassigned_sets(L14):
    labels = L14.l.labels
    expected = [
        {3, 5, 7, 9, 11, 13}, {3, 5, 7, 11, 13}, {3, 5, 7, 11},
        {3, 7, 11}, {7, 11}, {11}, set(),
    ]
    for d, want in zip(L14.decomps, expected):
        assert {labels[s] for s in d.nonassigned} == want


def test_l14_reconstruction_tree_structure(L14):
    tree = build_tree(L14.l, L14.f, L14.decomps, L14.table)
    labels = L14.l.labels
    by_level = {level: parent for (level, _), parent in zip(tree.generations, tree.parent)}
    # generation layers hold M(level) plus the non-assigned states of the level
    assert {labels[s] for s in dict(tree.generations)[6]} == {4, 14, 11}
    # attraction links of the reconstruction
    def parent(level, label):
        link = by_level[level]
        s = L14.l.index_of_label(label)
        p = link[s]
        return None if p is None else labels[p]
    assert parent(6, 14) is None and parent(6, 11) is None and parent(6, 4) is None
    assert parent(5, 10) == 4 and parent(5, 7) == 4
    assert parent(2, 12) == 14 and parent(2, 13) == 14
    assert parent(1, 8) == 10 and parent(1, 9) == 10
    assert parent(0, 1) == 2


def test_l6_tree(L6):
    tree = build_tree(L6.l, L6.f, L6.decomps, L6.table)
    gens = dict(tree.generations)
    assert set(gens[2]) == {0, 4, 3}
    assert set(gens[1]) == {0, 2, 4, 1, 3}
    assert set(gens[0]) == set(range(6))
    links = {level: parent for (level, _), parent in zip(tree.generations, tree.parent)}
    assert links[1][2] == 0 and links[1][1] == 0
    assert links[0][5] == 4
    dot = tree_to_dot(tree, labels=L6.l.labels)
    assert dot.startswith("digraph") and "-> root" in dot


def test_star_tree_single_minimum():
    l = gen_random_landscape(6, 3, 0.2, seed=11)
    # force a monotone landscape: single minimum at the lowest state
    import numpy as np
    from metabasins.landscape import Landscape
    energies = np.sort(l.energy)
    path = Landscape(energies, tuple(
        tuple(sorted({i - 1, i + 1} & set(range(6)))) for i in range(6)))
    f = scoppola_filtration(path)
    assert f.levels == 1
    decomps = decompose_all(path, f)
    tree = build_tree(path, f, decomps)
    assert len(tree.generations) == 1
    assert all(p is None for p in tree.parent[0].values())


@pytest.mark.parametrize("seed", range(25))
def test_definitional_oracle_small(seed):
    l = gen_random_landscape(4 + seed % 6, 3, 0.05, seed=7000 + seed)
    f = scoppola_filtration(l)
    table = saddle_table(l)
    decomps = decompose_all(l, f, table)
    for d, (valleys, nonassigned, merge_level) in zip(
            decomps, reference.decompose_oracle(l, f)):
        assert d.valley == valleys
        assert d.nonassigned == nonassigned
        assert d.merge_level == merge_level


@pytest.mark.parametrize("seed", range(12))
def test_valley_shape_invariants(seed):
    l = gen_random_landscape(5 + seed % 6, 3, 0.05, seed=8000 + seed)
    f = scoppola_filtration(l)
    table = saddle_table(l)
    decomps = decompose_all(l, f, table)
    for d in decomps:
        assigned = d.assigned_valleys()
        seen = set()
        for m, members in assigned.items():
            assert m in members
            assert not (seen & members)
            seen |= members
        for m, members in d.valley.items():
            assert d.strict[m] <= members
            for s in outer_boundary(l, members):
                assert s in d.nonassigned
                assert table.energy[s, m] == l.energy[s]
        # saddle comparisons: strict basin states sit strictly closer to their
        # bottom, and cross-valley saddles dominate the bottom pair's saddle
        for m1, v1 in d.valley.items():
            for m2, v2 in d.valley.items():
                if m1 == m2:
                    continue
                for x1 in d.strict[m1]:
                    for x2 in v2:
                        assert table.state[x1, x2] != x1
                        assert table.energy[x1, x2] >= table.energy[m1, m2]


def test_attraction_dichotomy_small(L6):
    # for attracted x and outside y: either every minimal path hits the strict
    # basin, or the saddle to y is strictly above the saddle to the bottom
    l, t = L6.l, L6.table
    cache = reference.PathCache(l)
    for d in L6.decomps:
        for m, members in d.valley.items():
            for x in members:
                for y in range(l.n):
                    if y in members:
                        continue
                    all_hit = all(
                        not d.strict[m].isdisjoint(p)
                        for p in cache.minimal_paths(x, y)
                    )
                    assert all_hit or t.energy[x, y] > t.energy[x, m]


def test_connectivity_params_l6(L6):
    ms = metastate_space(L6.decomps[1], L6.f)
    assert connectivity_params(L6.l, ms, 0.5) == (1, 1, 2)
    # large cutoff: eta2 counts the whole outer boundary
    eta1, eta2, eta3 = connectivity_params(L6.l, ms, 1e9)
    assert eta2 == min(len(outer_boundary(L6.l, ms.valley_of[m]))
                       for m in ms.valley_metastates)


def test_connectivity_params_l14x(L14X):
    rep_level = 5
    ms = metastate_space(L14X.decomps[rep_level - 1], L14X.f)
    eta1, eta2, eta3 = connectivity_params(L14X.l, ms, 2.5)
    assert eta2 >= 2
    assert (eta1, eta2, eta3) == (2, 2, 3)
