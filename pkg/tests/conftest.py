import numpy as np
import pytest

from sairsnet.model import ModelParams
from sairsnet.reproduction import r0


def random_pattern(rng, n, extra=0.3):
    """Strongly connected 0/1 pattern with a full diagonal: a directed cycle
    plus random extra arcs."""
    p = np.eye(n)
    perm = rng.permutation(n)
    for a, b in zip(perm, np.roll(perm, -1)):
        p[a, b] = 1.0
    p[rng.random((n, n)) < extra] = 1.0
    return p


def random_params(rng, n=None, r0_target=None, **fixed) -> ModelParams:
    """Random valid parameters. ``r0_target`` rescales both transmission
    matrices so that r0 hits the target exactly."""
    if n is None:
        n = int(rng.integers(1, 9))
    pattern = random_pattern(rng, n)
    doc = dict(
        beta_A=pattern * rng.uniform(0.05, 1.0, (n, n)),
        beta_I=pattern * rng.uniform(0.05, 1.0, (n, n)),
        mu=rng.uniform(0.01, 0.1, n),
        nu=rng.uniform(0.0, 0.1, n),
        alpha=rng.uniform(0.1, 1.0),
        gamma=rng.uniform(0.0, 0.2),
        delta_A=rng.uniform(0.05, 0.5),
        delta_I=rng.uniform(0.05, 0.8),
    )
    doc.update(fixed)
    params = ModelParams(**doc)
    if r0_target is not None:
        params = params.scaled(r0_target / r0(params))
    return params


def random_interior_state(rng, n):
    """Reduced-layout state with strictly positive S, A, I and R."""
    w = rng.dirichlet(np.ones(4), size=n)
    w = 0.02 + 0.9 * w
    w /= w.sum(axis=1, keepdims=True)
    return w[:, :3].ravel()


def ring_beta(n, intra, inter):
    b = np.eye(n) * intra
    for i in range(n):
        b[i, (i + 1) % n] = b[(i + 1) % n, i] = inter if n > 1 else intra
    return b


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
