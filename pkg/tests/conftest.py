"""Shared fixtures and independent oracle helpers.

The oracle helpers rebuild quantities from the closed-form definitions with
plain ``math`` calls, deliberately not reusing the package's vector or channel
code, so tests compare two independent computation routes.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from ncycle import build_scenario, handle_state


def oracle_a_vectors(n: int) -> np.ndarray:
    """Closed-form realization vectors, built independently of the package."""
    k = 1.0 / math.sqrt(1.0 + math.cos(math.pi / n))
    out = np.empty((n, 3))
    for i in range(n):
        theta = i * math.pi * (n - 1) / n
        out[i] = (
            k * math.cos(theta),
            k * math.sin(theta),
            k * math.sqrt(math.cos(math.pi / n)),
        )
    return out


def oracle_handle_overlap_sq(n: int) -> float:
    """<a_i, handle>^2 from the closed form."""
    return math.cos(math.pi / n) / (1.0 + math.cos(math.pi / n))


def random_mixed_matrix(seed: int) -> np.ndarray:
    """Random full-rank state via a normalized Wishart matrix."""
    g = np.random.default_rng(seed).normal(size=(3, 3))
    w = g @ g.T
    return w / np.trace(w)


@pytest.fixture(scope="session")
def sc5():
    return build_scenario(5)


@pytest.fixture(scope="session")
def sc7():
    return build_scenario(7)


@pytest.fixture(scope="session")
def sc9():
    return build_scenario(9)


@pytest.fixture(scope="session")
def handle():
    return handle_state()
