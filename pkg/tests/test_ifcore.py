import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from offsetspike.errors import NonFiniteError, ShapeError
from offsetspike.ifcore import (
    InputCurrents,
    LayerParams,
    LayerTrace,
    average_psp,
    averaged_current,
    conservation_check,
    conservation_tolerance,
    if_step,
    mean_spike_current,
    run_layer,
    run_spikes,
    simulate,
    spike_currents,
)
from offsetspike.oracle import oracle_simulate

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
thetas = st.sampled_from([0.5, 1.0, 2.0])


@st.composite
def windows(draw, max_T=16, max_n=8):
    T = draw(st.integers(1, max_T))
    n = draw(st.integers(1, max_n))
    theta = draw(thetas)
    I = draw(arrays(np.float64, (T, n), elements=finite))
    v0 = draw(arrays(np.float64, (n,), elements=finite))
    return v0, I, theta


def _params(v0, theta=1.0):
    v0 = np.asarray(v0, dtype=np.float64)
    return LayerParams(np.eye(len(v0)), theta, v0)


# -- if_step


def test_if_step_fires_and_subtracts():
    s, v, m = if_step([0.5], [0.6], 1.0)
    assert s.tolist() == [True]
    assert m[0] == pytest.approx(1.1)
    assert v[0] == pytest.approx(0.1)


def test_if_step_zero_input_stays_silent():
    s, v, _ = if_step([0.0], [0.0], 1.0)
    assert s.tolist() == [False] and v.tolist() == [0.0]


def test_if_step_potential_can_go_negative():
    s, v, _ = if_step([0.7], [-1.0], 1.0)
    assert s.tolist() == [False]
    assert v[0] == pytest.approx(-0.3)


def test_if_step_tie_at_threshold_fires():
    s, v, _ = if_step([0.25], [0.75], 1.0)
    assert s.tolist() == [True] and v.tolist() == [0.0]


def test_if_step_width_mismatch_names_layer():
    with pytest.raises(ShapeError, match="layer 3"):
        if_step([0.0, 0.0], [1.0], 1.0, layer=3)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_if_step_rejects_non_finite(bad):
    with pytest.raises(NonFiniteError):
        if_step([0.0], [bad], 1.0)


def test_if_step_rejects_bad_theta():
    with pytest.raises(ValueError):
        if_step([0.0], [0.0], 0.0)


# -- run_layer


def test_run_layer_three_step_example():
    tr = run_layer(_params([0.5]), InputCurrents([[0.6], [0.2], [0.7]]), 3)
    assert tr.s.astype(int).tolist() == [[1], [0], [1]]
    np.testing.assert_allclose(tr.v, [[0.1], [0.3], [0.0]], atol=1e-12)
    # the third step lands exactly on threshold in binary64 as well
    assert tr.v[2, 0] == 0.0


def test_run_layer_two_step_example():
    tr = run_layer(_params([0.5]), InputCurrents([[1.2], [-1.0]]), 2)
    assert tr.s.astype(int).tolist() == [[1], [0]]
    np.testing.assert_allclose(tr.v, [[0.7], [-0.3]], atol=1e-12)


def test_run_layer_zero_input_rests():
    v0 = np.array([0.1, -0.4, 0.99])
    tr = run_layer(_params(v0), InputCurrents(np.zeros((5, 3))), 5)
    assert not tr.s.any()
    assert (tr.v == v0).all()


def test_run_layer_row_count_must_equal_T():
    with pytest.raises(ShapeError):
        run_layer(_params([0.5]), InputCurrents([[0.1], [0.2]]), 3)


def test_input_currents_reject_non_finite():
    with pytest.raises(NonFiniteError):
        InputCurrents([[0.1], [np.nan]])


def test_layer_params_invariants():
    with pytest.raises(ValueError):
        LayerParams(np.eye(2), -1.0, np.zeros(2))
    with pytest.raises(ShapeError):
        LayerParams(np.eye(2), 1.0, np.zeros(3))
    with pytest.raises(NonFiniteError):
        LayerParams(np.array([[np.inf]]), 1.0, np.zeros(1))


def test_layer_params_are_immutable():
    p = _params([0.5, 0.5])
    with pytest.raises(ValueError):
        p.v0[0] = 3.0
    q = p.with_v0([0.0, 1.0])
    assert p.v0.tolist() == [0.5, 0.5] and q.v0.tolist() == [0.0, 1.0]


# -- average_psp / conservation


def _trace_from_spikes(s, theta):
    s = np.asarray(s, dtype=bool)
    z = np.zeros(s.shape)
    return LayerTrace(z, z, s, theta, np.zeros(s.shape[1]))


def test_average_psp_examples():
    assert average_psp(_trace_from_spikes([[1], [0], [1]], 1.0))[0] == pytest.approx(2 / 3)
    assert average_psp(_trace_from_spikes(np.zeros((4, 2)), 1.0)).tolist() == [0.0, 0.0]
    assert average_psp(_trace_from_spikes(np.ones((4, 1)), 0.5)).tolist() == [0.5]


def test_conservation_example_is_zero():
    inputs = InputCurrents([[0.6], [0.2], [0.7]])
    tr = run_layer(_params([0.5]), inputs, 3)
    assert abs(conservation_check(tr, inputs)[0]) <= conservation_tolerance(3)


def test_conservation_zero_input():
    inputs = InputCurrents(np.zeros((4, 2)))
    tr = run_layer(_params([0.3, -0.2]), inputs, 4)
    assert conservation_check(tr, inputs).tolist() == [0.0, 0.0]


# -- properties


@settings(max_examples=200, deadline=None)
@given(windows())
def test_threshold_and_reset_laws(w):
    v0, I, theta = w
    tr = simulate(v0, I, theta)
    assert np.array_equal(tr.s, tr.m >= theta)
    assert np.array_equal(tr.v, tr.m - tr.s * theta)
    assert np.array_equal(tr.m[0], v0 + I[0])
    assert np.array_equal(tr.m[1:], tr.v[:-1] + I[1:])


@settings(max_examples=200, deadline=None)
@given(windows())
def test_conservation_within_tolerance(w):
    v0, I, theta = w
    inputs = InputCurrents(I)
    tr = simulate(v0, inputs, theta)
    assert np.all(np.abs(conservation_check(tr, inputs)) <= conservation_tolerance(len(I)))


@settings(max_examples=100, deadline=None)
@given(windows())
def test_simulation_is_deterministic(w):
    v0, I, theta = w
    a, b = simulate(v0, I, theta), simulate(v0, I, theta)
    assert np.array_equal(a.v, b.v) and np.array_equal(a.s, b.s) and np.array_equal(a.m, b.m)


@settings(max_examples=200, deadline=None)
@given(windows(), st.floats(0.0, 3.0))
def test_count_monotone_in_v0(w, bump):
    v0, I, theta = w
    low = simulate(v0, I, theta).counts
    high = simulate(v0 + bump, I, theta).counts
    assert np.all(high >= low)


@settings(max_examples=200, deadline=None)
@given(windows())
def test_engine_matches_scalar_oracle(w):
    v0, I, theta = w
    tr = simulate(v0, I, theta)
    m, v, s = oracle_simulate(v0.tolist(), I.tolist(), theta)
    assert tr.s.astype(int).tolist() == s
    assert tr.v.tolist() == v
    assert tr.m.tolist() == m


@settings(max_examples=100, deadline=None)
@given(windows())
def test_streaming_matches_full_trace(w):
    v0, I, theta = w
    tr = simulate(v0, I, theta)
    spikes, v_final = run_spikes(v0, I, theta)
    assert np.array_equal(spikes, tr.s) and np.array_equal(v_final, tr.v_final)


def test_batched_shapes_match_per_sample_runs():
    rng = np.random.default_rng(0)
    I = rng.uniform(-2, 2, (6, 3, 5))
    v0 = rng.uniform(-1, 1, (3, 5))
    tr = simulate(v0, I, 1.0)
    for b in range(3):
        one = simulate(v0[b], I[:, b], 1.0)
        assert np.array_equal(one.s, tr.s[:, b]) and np.array_equal(one.v, tr.v[:, b])


def test_current_paths_agree_up_to_rounding():
    rng = np.random.default_rng(1)
    W = rng.normal(size=(7, 9))
    s = rng.random((5, 9)) < 0.4
    per_step = spike_currents(W, s, 0.5)
    assert per_step.shape == (5, 7)
    np.testing.assert_allclose(per_step.sum(axis=0) / 5, mean_spike_current(W, s, 0.5), rtol=0, atol=1e-12)
    np.testing.assert_allclose(averaged_current(W, s, 0.5), mean_spike_current(W, s, 0.5), rtol=0, atol=1e-12)
