"""Shared fixtures and the acceptance summary printed after the run."""

from __future__ import annotations

import numpy as np
import pytest

from osculator.ambient import AmbientSpace, JetPoint
from osculator.connections import InducedConnections
from osculator.scenario import bundled, bundled_names
from osculator.submanifold import Embedding

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def sub_point(emb: Embedding, u, v1=None, v2=None, gauge=None):
    m = emb.m
    q = JetPoint(u, v1 if v1 is not None else [0.0] * m, v2 if v2 is not None else [0.0] * m, "sub")
    return InducedConnections(emb.geometry(q, gauge)).at(q)


def scenario_points(name):
    sc = bundled(name)
    emb = sc.embedding_obj()
    return sc, emb, [InducedConnections(emb.geometry(q)).at(q) for q in sc.jet_points()]


@pytest.fixture(scope="session")
def euclid3():
    return AmbientSpace([["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])


@pytest.fixture(scope="session")
def polar3():
    """Euclidean space in cylindrical coordinates (r, theta, z)."""
    return AmbientSpace([["1", "0", "0"], ["0", "x1^2", "0"], ["0", "0", "1"]])


@pytest.fixture(scope="session")
def cylinder(euclid3):
    return Embedding(euclid3, ["cos(u1)", "sin(u1)", "u2"])


@pytest.fixture(scope="session")
def ydep3():
    """A metric that depends on the first jet block."""
    return AmbientSpace([["1 + y1_1^2", "0", "0"], ["0", "1 + x1^2", "0"], ["0", "0", "1 + y1_2^2"]])


@pytest.fixture(scope="session", params=bundled_names())
def bundled_scenario(request):
    return scenario_points(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
