import numpy as np
import pytest

from ffdlink.graph import DirectedGraph


def random_digraph(rng: np.random.Generator, n: int, m: int) -> DirectedGraph:
    """Uniform simple directed graph with ``n`` nodes and at most ``m`` edges."""
    u = rng.integers(0, n, size=3 * m)
    v = rng.integers(0, n, size=3 * m)
    keep = u != v
    pairs = np.unique(np.stack([u[keep], v[keep]], axis=1), axis=0)
    pairs = pairs[rng.permutation(len(pairs))[:m]]
    return DirectedGraph(n, pairs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_line_graph(rng: np.random.Generator, n: int = 6, m: int = 10, width: int = 3):
    """Random line graph of about ``m`` line nodes with Gaussian node features."""
    from ffdlink.linegraph import EnclosingSubgraph, to_line_graph

    g = random_digraph(rng, n, m)
    edges = g.edges
    if not g.has_edge(0, 1):
        edges = np.vstack([edges, [[0, 1]]])
    g = DirectedGraph(n, edges)
    sub = EnclosingSubgraph(np.arange(n), g, 1, False)
    return to_line_graph(sub, rng.standard_normal((n, width)))


def gradient_errors(params, samples, step=1e-5):
    """Entry-wise relative error of analytic vs central-difference gradients, per tensor."""
    from ffdlink.model import loss_and_grads

    _, grads = loss_and_grads(params, samples)
    out = {}
    for (name, p), (_, g) in zip(params.tensors(), grads.tensors()):
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up, _ = loss_and_grads(params, samples)
            p[idx] = old - step
            down, _ = loss_and_grads(params, samples)
            p[idx] = old
            num[idx] = (up - down) / (2 * step)
        denom = np.maximum(np.maximum(np.abs(g), np.abs(num)), 1e-6)
        out[name] = float(np.max(np.abs(g - num) / denom))
    return out
