import math

import numpy as np
import pytest

from resforge.model import NormalFormData
from resforge.series import FormalSeries, hamiltonian_flow_map, random_series, symplectic_flow


# verdict lines of the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def residual_fixture(r: int = 3) -> NormalFormData:
    """n = 1, d = pi, mu = 1, H = 0.3 i^2 + 0.05 i^3, F1 = 0.2 + 0.1 i, F2 = 0.07."""
    F = [{(2,): 0.3, (3,): 0.05}, {(0,): 0.2, (1,): 0.1}, {(0,): 0.07}]
    return NormalFormData.from_terms(math.pi, [1.0], F, 3).weight_filter(r) if r < 3 else \
        NormalFormData.from_terms(math.pi, [1.0], F, r)


def case_b(c2: float = 1.0, c3: float = 0.0, d: float = math.pi, r: int = 3) -> NormalFormData:
    """Only the classical part is nonlinear: F0 = mu i + c2 i^2 + c3 i^3, F_j = 0."""
    return NormalFormData.from_terms(d, [1.0], [{(2,): c2, (3,): c3}] + [{}] * r, r)


def separation_fixture() -> NormalFormData:
    mu = [math.log(2), math.log(3)]
    F = [{(2, 0): 0.1, (1, 1): 0.05, (0, 2): 0.08}, {(0, 0): 0.2, (1, 0): 0.1}, {(0, 0): 0.05}]
    return NormalFormData.from_terms(2.0, mu, F, 2)


def normal_form_germ(mu, H_terms, order):
    """Flow germ of ``N(x xi) = mu . iota + H(iota)`` in phase variables."""
    n = len(mu)
    terms = {}
    for i, m in enumerate(mu):
        e = [0] * (2 * n)
        e[i] = e[n + i] = 1
        terms[tuple(e)] = m
    for a, c in H_terms.items():
        terms[tuple(a) + tuple(a)] = c
    p = FormalSeries.from_terms(2 * n, terms, order + 1)
    return hamiltonian_flow_map(p, order)


def random_symplectomorphism(rng, n, order, scale=0.3):
    """Time-one flow of a random polynomial generator of degrees 3..order+1 (no linear part)."""
    gen = random_series(rng, 2 * n, range(3, order + 2), order + 1, density=0.6, scale=scale)
    return symplectic_flow(gen, order)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
