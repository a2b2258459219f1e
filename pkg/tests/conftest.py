import numpy as np
import pytest

from netsym.netcore import Architecture, Dataset, NetworkParams, build_network, forward_batch


@pytest.fixture
def small_net():
    return build_network(Architecture((2, 3, 1)), 0.5, seed=7)


def mse_loss(params: NetworkParams, data: Dataset) -> float:
    out = forward_batch(params, data.inputs)
    return float(((out - data.targets) ** 2).mean())


def numeric_gradient(params: NetworkParams, data: Dataset, step: float = 1e-5):
    """Central finite differences of the full-batch MSE w.r.t. every weight."""
    grads = []
    for k, W in enumerate(params.weights):
        g = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            ws_plus = [w.copy() for w in params.weights]
            ws_minus = [w.copy() for w in params.weights]
            ws_plus[k][idx] += step
            ws_minus[k][idx] -= step
            p_plus = NetworkParams(params.architecture, ws_plus, params.activation)
            p_minus = NetworkParams(params.architecture, ws_minus, params.activation)
            g[idx] = (mse_loss(p_plus, data) - mse_loss(p_minus, data)) / (2 * step)
        grads.append(g)
    return grads


def assert_params_equal(p1: NetworkParams, p2: NetworkParams):
    assert p1.architecture == p2.architecture
    assert p1.activation == p2.activation
    for a, b in zip(p1.weights, p2.weights):
        np.testing.assert_array_equal(a, b)
