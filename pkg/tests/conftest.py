import numpy as np
import pytest

import lasso_barrier as lb


def random_normalized_design(n, p, seed, kind="mixed"):
    """Deterministic design with max column energy exactly 1."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if kind == "mixed" and p >= 2:
        # induce some correlation so designs are not near-orthogonal
        X[:, 1] = 0.6 * X[:, 0] + 0.8 * X[:, 1]
    return lb.gen_design(n, p, ("matrix", X, True), seed=seed)


@pytest.fixture(scope="session")
def orthogonal_design():
    return lb.gen_design(24, 6, "orthogonal", seed=11)
