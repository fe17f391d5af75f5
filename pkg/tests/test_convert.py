import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offsetspike.convert import SnnNetwork, convert, encode_input
from offsetspike.ifcore import InputCurrents, average_psp, run_layer
from offsetspike.modelio import load_qcfs, load_snn, save_qcfs, save_snn
from offsetspike.qcfs import QcfsLayer, QcfsNetwork, init_network, qcfs_activation


def _two_layer(lams=(1.0, 0.5)):
    rng = np.random.default_rng(0)
    return QcfsNetwork(
        (QcfsLayer(rng.normal(size=(3, 2)), lams[0], 4), QcfsLayer(rng.normal(size=(2, 3)), lams[1], 4)),
        linear_head=False,
    )


def test_convert_copies_lambda_and_halves_it_for_v0():
    snn = convert(_two_layer())
    assert [l.theta for l in snn.layers] == [1.0, 0.5]
    assert snn.layers[0].v0.tolist() == [0.5] * 3
    assert snn.layers[1].v0.tolist() == [0.25] * 2


def test_convert_preserves_weight_bits_and_shapes():
    net = init_network([4, 6, 5, 3], L=4, seed=2)
    snn = convert(net)
    assert len(snn.layers) == len(net.layers) and snn.L == net.L and snn.linear_head
    for a, s in zip(net.layers, snn.layers):
        assert a.weights.shape == s.weights.shape
        assert a.weights.tobytes() == s.weights.tobytes()
        assert s.theta == a.lam and np.all(s.v0 == s.theta / 2)


def test_convert_after_reload_is_identical(tmp_path):
    net = init_network([3, 5, 2], L=4, seed=4)
    save_qcfs(net, tmp_path / "a.json")
    assert convert(load_qcfs(tmp_path / "a.json")) == convert(net)


def test_snn_file_round_trip(tmp_path):
    snn = convert(init_network([3, 5, 2], L=4, seed=4))
    snn = snn.with_v0([np.linspace(-1, 1, 5)])
    save_snn(snn, tmp_path / "s.json")
    back = load_snn(tmp_path / "s.json")
    assert back == snn and isinstance(back, SnnNetwork)


def test_encode_input_examples():
    enc = encode_input([0.3], 3)
    assert enc.I.tolist() == [[0.3], [0.3], [0.3]]
    assert encode_input([0.3, -1.0], 1).I.shape == (1, 2)
    x = np.array([0.1, 0.7, -0.2])
    enc = encode_input(x, 5)
    # every row is x bit for bit; the float sum may differ from 5*x by rounding
    assert all(np.array_equal(row, x) for row in enc.I)
    np.testing.assert_allclose(enc.I.sum(axis=0), 5 * x, rtol=0, atol=8 * np.finfo(float).eps)


def test_encode_input_rejects_zero_steps():
    with pytest.raises(ValueError):
        encode_input([0.3], 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 3), st.floats(0.1, 0.9), st.sampled_from([2, 4, 8]), st.sampled_from([0.5, 1.0, 2.0]))
def test_rate_approaches_activation_for_long_windows(level, frac, L, lam):
    # pre-activation strictly inside one grid cell, nonnegative
    z = lam / L * (min(level, L - 1) + frac)
    layer = QcfsLayer(np.eye(1), lam, L)
    snn = convert(QcfsNetwork((layer,), linear_head=False))
    T = 64 * L
    tr = run_layer(snn.layers[0], InputCurrents(encode_input([z], T).I @ layer.weights.T), T)
    a = qcfs_activation(z, lam, L)
    assert abs(average_psp(tr)[0] - a) <= lam / L
