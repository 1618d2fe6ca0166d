import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from msle import combinatorics as cb
from msle import loewner_mc as mc
from msle import _mc_kernel_py
from msle.errors import InvalidPatternError

X2 = [0.0, 1.0, 2.0, 3.0]
FAST = dict(dt_base=1e-2, delta_stop=1e-2)
BACKENDS = sorted(mc.KERNELS)


def test_config_validation():
    with pytest.raises(ValueError):
        mc.McConfig(dt_base=0.0)
    with pytest.raises(ValueError):
        mc.McConfig(samples=-1)
    with pytest.raises(ValueError):
        mc.McConfig(workers=0)
    with pytest.raises(ValueError):
        mc.McConfig(stop_rule="nearest")
    with pytest.raises(ValueError):
        mc.McConfig(backend="fortran")


def test_level_line_must_start_at_odd_index():
    with pytest.raises(InvalidPatternError):
        mc.level_line_terminal(X2, mc.McConfig(samples=1), start=2)


@pytest.mark.parametrize("backend", BACKENDS)
def test_deterministic_for_fixed_seed(backend):
    cfg = mc.McConfig(samples=40, seed=3, backend=backend, **FAST)
    assert mc.level_line_terminal(X2, cfg) == mc.level_line_terminal(X2, cfg)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
def test_backends_agree():
    x = [0.0, 0.7, 1.5, 3.0, 3.4, 5.0]
    hists = [mc.level_line_terminal(x, mc.McConfig(samples=30, seed=11, backend=b, **FAST))
             for b in BACKENDS]
    assert hists[0] == hists[1]
    traces = [mc.trace_path(X2, mc.McConfig(seed=5, backend=b, **FAST)) for b in BACKENDS]
    assert traces[0].terminal == traces[1].terminal
    assert traces[0].steps == traces[1].steps
    assert np.allclose(traces[0].dts, traces[1].dts, rtol=1e-9)


def test_n1_always_reaches_the_other_point():
    hist = mc.level_line_terminal([0.0, 1.0], mc.McConfig(samples=50, seed=1, **FAST))
    assert hist.counts == {2: 50}
    res = mc.zalpha_driven_curve(cb.rainbow(1), 1, [0.0, 1.0], mc.McConfig(samples=50, **FAST))
    assert res.hit_fraction == 1.0


def test_capacity_is_sum_of_steps():
    tr = mc.trace_path(X2, mc.McConfig(seed=2, **FAST))
    assert tr.terminal in (2, 4)
    assert tr.steps == tr.dts.size
    assert math.fsum(tr.dts) == pytest.approx(tr.state.t, rel=1e-12)
    assert np.all(tr.dts > 0)


def test_trace_state_is_ordered():
    tr = mc.trace_path([0.0, 1.0, 2.5, 3.0, 4.0, 6.0], mc.McConfig(seed=9, **FAST))
    v = np.array([p for p in tr.state.V if not math.isnan(p)])
    assert np.all(np.diff(v) > 0)
    assert len(tr.state.swallowed) == 5
    assert sum(tr.state.swallowed) == tr.terminal - 1


def test_zalpha_start_validation():
    with pytest.raises(Exception):
        mc.zalpha_driven_curve(cb.rainbow(2), 5, X2, mc.McConfig(samples=1))


@pytest.mark.parametrize("backend", BACKENDS)
def test_spacings_stay_positive(backend):
    kern = mc.KERNELS[backend]
    drive = mc._level_line_drive(4, 0)
    rng = np.random.default_rng(0)
    n = 20
    D = np.tile(np.diff(X2), (n, 1))
    W, scale, t = np.zeros(n), np.ones(n), np.zeros(n)
    steps, status = np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int32)
    kern.advance(np.arange(n), rng.standard_normal((n, 50)), W, D, scale, t, steps, status,
                 drive.a, drive.kappa, drive.mode, drive.rho, drive.theta_half, drive.theta_a,
                 drive.coef, 1e-2, 2.0, 1e-2, mc.STOP_RULES["cross_ratio"], 10**6, 1e-250)
    running = status == _mc_kernel_py.RUNNING
    assert np.all(D[running] > 0)
    assert np.all(t > 0)


def test_max_steps_is_reported():
    hist = mc.level_line_terminal(X2, mc.McConfig(samples=5, max_steps=3, **FAST))
    assert hist.discarded == {"max_steps": 5}
    assert hist.discard_fraction == 1.0


def test_n2_marginal_z_test():
    hist = mc.level_line_terminal(X2, mc.McConfig(samples=2000, seed=4))
    z = hist.z_scores(mc.level_line_targets(X2))
    assert max(abs(v) for v in z.values()) < 4.0
    assert hist.discard_fraction < 0.01
    assert 0.0 <= hist.chi2_pvalue(mc.level_line_targets(X2)) <= 1.0


@pytest.mark.parametrize("x", [[-3.0, -1.0, 1.0, 3.0], [0.0, 1e-3, 1.0, 1.0 + 1e-3]])
def test_full_pattern_n2(x):
    res = mc.full_pattern_n2(x, mc.McConfig(samples=1500, seed=8))
    assert sum(res.exact.values()) == pytest.approx(1.0)
    assert max(abs(v) for v in res.z_scores().values()) < 4.0


def test_reduced_samples_keep_original_labels():
    # two tight pairs far apart: the far pair is dropped and labels must survive
    x = [0.0, 1.0, 2.0, 3.0, 1e16, 2e16]
    hist = mc.level_line_terminal(x, mc.McConfig(samples=200, seed=6, **FAST))
    assert set(hist.counts) <= {2, 4, 6}
    assert hist.total == 200
    assert 6 not in hist.counts


def test_far_range():
    d = np.array([[1.0, 1.0, 1e20, 1.0]])
    lo, hi = _mc_kernel_py.far_range(d, 0, np.array([1e15]))
    assert (lo[0], hi[0]) == (0, 3)


def test_wilson_interval():
    w = mc.wilson_interval(50, 100)
    assert w.low < 0.5 < w.high
    assert w.low == pytest.approx(0.4038, abs=1e-4)
    assert mc.wilson_interval(0, 0) == mc.WilsonInterval(0.0, 1.0)
    assert mc.wilson_interval(0, 10).low == 0.0


hists = st.builds(mc.TerminalHistogram,
                  st.dictionaries(st.integers(1, 8), st.integers(0, 100), max_size=4),
                  st.dictionaries(st.sampled_from(["crossing", "max_steps"]),
                                  st.integers(0, 5), max_size=2))


@given(hists, hists, hists)
def test_histogram_merge_is_associative(a, b, c):
    assert a.merge(b).merge(c) == a.merge(b.merge(c))
    assert a.merge(b).total == a.total + b.total
