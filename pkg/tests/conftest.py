import numpy as np
import pytest

from relu_approx.network import Layer, Network


def random_net(rng, widths, density=0.7, scale=1.0):
    """Random sparse network with the given widths (input first)."""
    layers = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        mat = rng.normal(0, scale, (n_out, n_in)) * (rng.random((n_out, n_in)) < density)
        bias = rng.normal(0, scale, n_out) * (rng.random(n_out) < density)
        layers.append(Layer.from_dense(mat, bias))
    return Network(widths[0], tuple(layers))


def naive_forward(net, x):
    """Loop-based forward pass over the stored triplets."""
    h = [float(v) for v in x]
    for li, layer in enumerate(net.layers):
        out = [float(b) for b in layer.bias]
        for r, c, v in zip(layer.rows, layer.cols, layer.values):
            out[r] += v * h[c]
        if li < net.depth - 1:
            out = [max(0.0, v) for v in out]
        h = out
    return np.array(h)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
