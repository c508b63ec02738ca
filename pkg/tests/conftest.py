import itertools

import numpy as np
import pytest

from doptfact.model import ModelSpec, build_design_matrix, main_effects, weights
from doptfact.seeding import derive_seed, make_rng


@pytest.fixture(scope="session")
def x22():
    return build_design_matrix(ModelSpec(k=2))


@pytest.fixture(scope="session")
def x23():
    return build_design_matrix(ModelSpec(k=3))


@pytest.fixture(scope="session")
def x24():
    return build_design_matrix(ModelSpec(k=4))


def random_model(rng, k_max=4, allow_interaction=True):
    """Main-effects model on a random k, optionally with one interaction."""
    k = int(rng.integers(2, k_max + 1))
    effects = list(main_effects(k))
    if allow_interaction and rng.random() < 0.5:
        pool = [c for c in itertools.combinations(range(1, k + 1), 2)]
        effects.append(pool[int(rng.integers(len(pool)))])
    return ModelSpec(k=k, effects=tuple(effects))


def random_instance(seed, k_max=4, allow_zero_w=True):
    """(spec, X, w, p) with positive-determinant-friendly draws."""
    rng = make_rng(derive_seed(seed, "instance"))
    spec = random_model(rng, k_max=k_max)
    X = build_design_matrix(spec)
    n = spec.n_points
    w = rng.uniform(0.0 if allow_zero_w else 0.01, 1.0, n)
    if allow_zero_w and rng.random() < 0.3:
        w[rng.integers(0, n, size=max(1, n // 4))] = 0.0
    p = rng.dirichlet(np.ones(n))
    if rng.random() < 0.3:
        p[rng.integers(0, n, size=max(1, n // 4))] = 0.0
        p = p / p.sum()
    return spec, X, w, p


def logit_weights(spec, X, rng, lo=-3.0, hi=3.0):
    return weights(spec, X, rng.uniform(lo, hi, spec.n_params))
