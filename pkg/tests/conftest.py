"""Shared fixtures: a small LSV map, its partition and a coarse Ulam operator."""

import numpy as np
import pytest

from renewlab.maps import build_return_partition, default_skew, lsv
from renewlab.transfer import Grid, build_induced_operator, leading_eigen, split_by_return_time

ALPHA = 4.0 / 3.0
BETA = 0.75


@pytest.fixture(scope="session")
def lsv_map():
    return lsv(ALPHA)


@pytest.fixture(scope="session")
def skew(lsv_map):
    return default_skew(lsv_map)


@pytest.fixture(scope="session")
def partition(lsv_map):
    return build_return_partition(lsv_map, 2000)


@pytest.fixture(scope="session")
def operator(lsv_map, partition):
    op = build_induced_operator(lsv_map, partition, Grid(64))
    return split_by_return_time(op, partition)


@pytest.fixture(scope="session")
def stationary(operator):
    return np.real(leading_eigen(operator.matrix).right)


def synthetic_masses(beta: float, horizon: int) -> np.ndarray:
    """p_n = n^-beta - (n+1)^-beta, so that mu(phi > n) = (n+1)^-beta."""
    n = np.arange(horizon + 2, dtype=float)
    p = np.zeros(horizon + 1)
    p[1:] = n[1 : horizon + 1] ** -beta - n[2 : horizon + 2] ** -beta
    return p
