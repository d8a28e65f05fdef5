import numpy as np
import pytest

from p2d2 import (
    Problem,
    RegularizerSpec,
    consensus_matrix,
    metropolis_weights,
    random_connected_graph,
    synthesize_logistic,
    synthesize_quadratic,
)


def make_problem(K=5, M=4, kind="logistic", reg="l1", seed=0, l2_reg=0.05, p=0.5, rho=0.01):
    graph = random_connected_graph(K, p, seed)
    A = metropolis_weights(graph)
    if kind == "logistic":
        costs, _ = synthesize_logistic(K, 15, M, sparsity=0.5, noise=0.1, seed=seed + 1, l2_reg=l2_reg)
    else:
        costs = synthesize_quadratic(K, M, seed=seed + 1, condition=5.0, rank=max(1, M - 1))
    spec = RegularizerSpec("l1", rho) if reg == "l1" else RegularizerSpec(reg)
    return Problem(costs, spec, A, consensus_matrix(A))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem():
    return make_problem()
