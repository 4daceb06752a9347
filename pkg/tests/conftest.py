import numpy as np
import pytest

import hvisolve as hv

L = np.pi
MU = 1.5
SLOPE = 0.5


@pytest.fixture(scope="session")
def interval_domain():
    return hv.DomainSpec.interval(L)


@pytest.fixture(scope="session")
def basis68(interval_domain):
    return hv.build_basis(interval_domain, 68)


@pytest.fixture(scope="session")
def example_j():
    return hv.example_potential(MU, SLOPE, SLOPE)


@pytest.fixture(scope="session")
def default_ctx(interval_domain, basis68, example_j):
    quad = hv.build_quadrature(interval_domain, basis68)
    dec = hv.decompose(basis68, 2, 2, 66)
    return hv.EnergyContext.create(basis68, dec, example_j, quad)


@pytest.fixture(scope="session")
def default_config(interval_domain):
    return hv.SolverConfig(
        domain=interval_domain, k=2, m=2,
        potential_family="example",
        potential_params={"mu": MU, "slope_neg": SLOPE, "slope_pos": SLOPE},
        n_trunc=64, seed=0)


@pytest.fixture(scope="session")
def solved(default_config):
    """One full pipeline run shared by the acceptance tests."""
    try:
        return hv.solve_hvi(default_config)
    except hv.CertificationError as exc:
        return exc.payload


def config_text(**overrides) -> str:
    kv = {
        "domain.kind": "interval",
        "domain.length": repr(L),
        "solver.k": 2,
        "solver.m": 2,
        "potential.family": "example",
        "potential.mu": MU,
        "potential.slope_neg": SLOPE,
        "potential.slope_pos": SLOPE,
        "run.seed": 0,
    }
    kv.update(overrides)
    return "\n".join(f"{k} = {v}" for k, v in kv.items() if v is not None) + "\n"
