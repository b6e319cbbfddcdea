import numpy as np
import pytest

from igcl.graph import generate_sbm


def central_difference(f, arrays, step=1e-5):
    """Central finite differences of scalar f() w.r.t. each array (perturbed in place)."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat, gflat = arr.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = f()
            flat[i] = orig - step
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric, floor=1e-6):
    num = np.abs(analytic - numeric)
    den = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((num / den).max())


# Desk-scale benchmark graph shared by trainer and acceptance tests:
# 4 well-separated communities with moderately informative features.
SBM_BENCH = dict(blocks=4, nodes_per_block=100, p_in=0.05, p_out=0.005,
                 feat_dim=32, feat_shift=1.0)


@pytest.fixture(scope="session")
def bench_graph():
    return generate_sbm(seed=7, **SBM_BENCH)


@pytest.fixture(scope="session")
def bench_embeddings(bench_graph):
    from igcl.train import TrainConfig, embed, train

    cfg = TrainConfig(L=1, D=64, D_q=128, K=2, lam=0.001, epochs=500, seed=0)
    params, _, _ = train(cfg, bench_graph)
    return embed(params, bench_graph)
