"""Hypothesis strategies shared by the test modules."""
import numpy as np
from hypothesis import strategies as st

from msle import combinatorics as cb


@st.composite
def link_patterns(draw, min_n=0, max_n=5):
    n = draw(st.integers(min_n, max_n))
    ps = cb.enumerate_link_patterns(n)
    return ps[draw(st.integers(0, len(ps) - 1))]


@st.composite
def configurations(draw, n, low=0.3, high=3.0):
    gaps = draw(st.lists(st.floats(low, high), min_size=2 * n, max_size=2 * n))
    start = draw(st.floats(-5.0, 5.0))
    return start + np.cumsum(gaps) - gaps[0]
