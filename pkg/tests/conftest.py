import math

import numpy as np
import pytest
from hypothesis import settings
from scipy import integrate

from bscluster.netgen import Network, Scenario

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def e1_quad(x: float) -> float:
    """E1(x) by adaptive quadrature of exp(-x e^u) over u >= 0 (t = x e^u).

    The integrand is below 1e-19 beyond t = x + 45, which fixes the upper limit.
    """
    upper = math.log((x + 45.0) / x)
    value, _ = integrate.quad(lambda u: math.exp(-x * math.exp(u)), 0.0, upper, epsabs=1e-14, epsrel=1e-13,
                              limit=200)
    return value


def bell_numbers(n: int) -> list[int]:
    """Bell numbers B_0..B_n from the Bell triangle."""
    row = [1]
    out = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
        out.append(row[0])
    return out


def count_partitions_capped(n: int, cap: int) -> int:
    """Set partitions of n labelled items with blocks of size <= cap (recurrence on the block of item n)."""
    memo = {0: 1}

    def f(m):
        if m not in memo:
            memo[m] = sum(math.comb(m - 1, s - 1) * f(m - s) for s in range(1, min(cap, m) + 1))
        return memo[m]

    return f(n)


def make_network(gains, scenario: Scenario, coherence_symbols: int) -> Network:
    """Network with hand-set large-scale gains; positions are placeholders."""
    gains = np.asarray(gains, dtype=float)
    I, K = gains.shape[0], gains.shape[1]
    return Network(bs_positions=np.zeros((I, 2)), ms_positions=np.zeros((I, K, 2)), gains=gains,
                   powers=np.full(I, scenario.tx_power), coherence_symbols=coherence_symbols)


@pytest.fixture
def desk8():
    return Scenario.paper(num_cells=8)


# Acceptance lines collected during the run and repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(number: int, passed: bool, detail: str) -> str:
    line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
