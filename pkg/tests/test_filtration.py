import pytest

from metabasins import reference
from metabasins.filtration import local_minima, scoppola_filtration
from metabasins.landscape import gen_random_landscape


def test_local_minima_l6(L6):
    assert local_minima(L6.l) == {0, 2, 4}


def test_local_minima_l14(L14):
    labels = L14.l.labels
    assert {labels[s] for s in local_minima(L14.l)} == {2, 4, 6, 8, 10, 12, 14}


def test_l6_filtration(L6):
    assert L6.f.deletion_order == (2, 0, 4)
    assert L6.f.deletion_costs == (3.0, 8.0)
    assert L6.f.M(1) == {0, 2, 4}
    assert L6.f.M(2) == {0, 4}
    assert L6.f.M(3) == {4}
    assert L6.f.terminal == 4


def test_l14_reconstruction_deletion_order(L14):
    labels = L14.l.labels
    assert tuple(labels[s] for s in L14.f.deletion_order) == (8, 12, 6, 2, 10, 14, 4)


def test_l14x_same_deletion_order(L14X):
    labels = L14X.l.labels
    assert tuple(labels[s] for s in L14X.f.deletion_order) == (8, 12, 6, 2, 10, 14, 4)


def test_nesting_and_determinism(L6):
    f = L6.f
    for i in range(1, f.levels):
        assert f.M(i + 1) < f.M(i)
    again = scoppola_filtration(L6.l)
    assert again == f


def test_single_minimum():
    import numpy as np
    from metabasins.landscape import Landscape

    l = Landscape(np.array([0.0, 1.0, 2.0, 3.0]),
                  ((1,), (0, 2), (1, 3), (2,)))
    f = scoppola_filtration(l)
    assert f.levels == 1
    assert f.deletion_costs == ()
    assert f.deletion_order == (0,)


@pytest.mark.parametrize("seed", range(15))
def test_deletion_minimizes_activation_oracle(seed):
    l = gen_random_landscape(5 + seed % 5, 3, 0.05, seed=600 + seed)
    f = scoppola_filtration(l)
    current = set(local_minima(l))
    for step, m in enumerate(f.deletion_order[:-1]):
        cost = min(reference.activation_oracle(l, m, n) for n in current if n != m)
        best = min(
            min(reference.activation_oracle(l, c, n) for n in current if n != c)
            for c in current
        )
        assert cost == pytest.approx(best, abs=1e-12)
        assert cost == pytest.approx(f.deletion_costs[step], abs=1e-12)
        current.remove(m)
