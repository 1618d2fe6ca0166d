from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from msle import combinatorics as cb
from msle import partition_functions as pf
from msle import probabilities as pr
from msle.analysis import random_configuration, random_mobius
from msle.errors import InvalidPatternError

from strategies import configurations


def exact_marginal(x, a, b):
    """The product formula in exact rational arithmetic."""
    v = Fraction(1)
    for j in range(1, len(x) + 1):
        if j in (a, b):
            continue
        r = Fraction(abs(x[j - 1] - x[a - 1]), abs(x[j - 1] - x[b - 1]))
        v *= r if j % 2 == 0 else 1 / r
    return v


def test_n2_distribution_at_unit_spacing():
    d = pr.connection_distribution([0.0, 1.0, 2.0, 3.0])
    assert d.probs[cb.unnested(2)] == pytest.approx(0.75, rel=1e-15)
    assert d.probs[cb.rainbow(2)] == pytest.approx(0.25, rel=1e-15)
    assert [str(p) for p, _ in d.sorted_by_probability()] == ["1-2,3-4", "1-4,2-3"]


def test_n1_distribution():
    assert pr.connection_distribution([0.0, 2.0]).probs == {cb.rainbow(1): 1.0}
    assert pr.marginal_probability([0.0, 2.0], 1, 2) == 1.0
    assert pr.marginal_weighting_function([1.0, 5.0], 1, 2) == pytest.approx(0.5)


def test_symmetric_configuration():
    assert pr.connection_distribution([-3.0, -1.0, 1.0, 3.0]).probs[cb.rainbow(2)] == pytest.approx(0.25)


def test_near_collision():
    x = [0.0, 1e-3, 1.0, 1.0 + 1e-3]
    # rainbow probability x43 x21 / (x42 x31)
    assert pr.connection_distribution(x).probs[cb.rainbow(2)] == pytest.approx(1e-6 / (1.0 * 1.0), rel=1e-9)


def test_n3_marginals_exact():
    x = [0, 1, 2, 3, 4, 5]
    assert [exact_marginal(x, 1, b) for b in (2, 4, 6)] == [Fraction(45, 64), Fraction(5, 32),
                                                            Fraction(9, 64)]
    for b in (2, 4, 6):
        assert pr.marginal_probability(x, 1, b) == pytest.approx(float(exact_marginal(x, 1, b)), rel=1e-14)


def test_hand_evaluated_n2_marginal():
    assert pr.marginal_probability([0, 1, 2, 3], 1, 2) == pytest.approx(0.5 * 1.5)


@pytest.mark.parametrize("n", range(1, 6))
def test_distribution_sums_to_one(n, rng):
    for _ in range(5):
        d = pr.connection_distribution(random_configuration(rng, n))
        assert all(v > 0 for v in d.probs.values())
        assert sum(d.probs.values()) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("n", range(1, 5))
def test_marginal_is_sum_over_patterns(n, rng):
    ps = cb.enumerate_link_patterns(n)
    for _ in range(3):
        x = random_configuration(rng, n)
        d = pr.connection_distribution(x)
        zs = pf.all_pure_partitions_k4(x)
        for a in range(1, 2 * n + 1, 2):
            for b in range(2, 2 * n + 1, 2):
                want = sum(d.probs[p] for p in ps if (a, b) in p)
                assert pr.marginal_probability(x, a, b) == pytest.approx(want, rel=1e-9, abs=1e-15)
                fz = sum(zs[p] for p in ps if (a, b) in p)
                assert pr.marginal_weighting_function(x, a, b) == pytest.approx(fz, rel=1e-9)


@given(configurations(3))
def test_marginals_from_x1_sum_to_one(x):
    assert sum(pr.marginal_probability(x, 1, b) for b in (2, 4, 6)) == pytest.approx(1.0, rel=1e-12)


def test_leftward_level_line():
    x = [0.0, 1.0, 2.5, 3.0]
    assert pr.marginal_probability(x, 3, 2) == pytest.approx(
        pr.connection_distribution(x).probs[cb.rainbow(2)], rel=1e-12)


@given(configurations(2), st.floats(0.1, 10.0), st.floats(-10.0, 10.0))
def test_affine_invariance(x, s, c):
    d1 = pr.connection_distribution(x).probs
    d2 = pr.connection_distribution(s * x + c).probs
    for p in d1:
        assert d2[p] == pytest.approx(d1[p], rel=1e-10)


@pytest.mark.parametrize("n", range(2, 5))
def test_mobius_invariance(n, rng):
    for _ in range(10):
        x = random_configuration(rng, n)
        m = random_mobius(rng, x)
        d1 = pr.connection_distribution(x).probs
        d2 = pr.connection_distribution(m(x)).probs
        for p in d1:
            assert d2[p] == pytest.approx(d1[p], rel=1e-9)


@given(configurations(2))
def test_n2_rainbow_is_cross_ratio(x):
    z = pf.cross_ratio(x)
    assert pr.connection_distribution(x).probs[cb.rainbow(2)] == pytest.approx(z, rel=1e-12)


@given(configurations(3))
def test_balanced_subset_probability_range(x):
    for p in cb.enumerate_link_patterns(3):
        v = pr.balanced_subset_probability(p, x)
        assert 0 < v <= 1 + 1e-12
    assert pr.balanced_subset_probability(cb.unnested(3), x) == pytest.approx(1.0)


def test_balanced_subset_rainbow_at_unit_spacing():
    assert pr.balanced_subset_probability(cb.rainbow(2), [0, 1, 2, 3]) == pytest.approx(0.25)


def test_index_validation():
    with pytest.raises(InvalidPatternError):
        pr.marginal_probability([0, 1, 2, 3], 2, 3)
    with pytest.raises(IndexError):
        pr.marginal_probability([0, 1, 2, 3], 1, 6)


def test_boundary_data():
    lam = np.pi / 2
    un = pr.conformal_block_boundary(cb.unnested(3))
    assert un.heights == (0.0,) * 6
    assert un.values == pytest.approx([(-1) ** (k + 1) * lam for k in range(7)])
    rb = pr.conformal_block_boundary(cb.rainbow(3))
    assert rb.heights == pytest.approx([2 * lam * (k - 1) if k <= 3 else 2 * lam * (6 - k)
                                        for k in range(1, 7)])
    for n in range(1, 6):
        for p in cb.enumerate_link_patterns(n):
            h = pr.conformal_block_boundary(p).heights
            assert h[0] == h[-1] == 0
