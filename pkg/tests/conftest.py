from __future__ import annotations

import numpy as np
import pytest

from qfg.factor_graph import FactorGraph, FunctionNode, VariableNode
from qfg.statevector import DiagonalOperator


def random_graph(rng: np.random.Generator, max_vars: int = 8, max_fns: int = 4) -> FactorGraph:
    """Random complex priors and diagonals with entries of magnitude at most 1."""
    n = int(rng.integers(2, max_vars + 1))
    ids = [f"v{i}" for i in range(n)]
    variables = []
    for vid in ids:
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        norm = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
        variables.append(VariableNode(vid, (complex(a / norm), complex(b / norm))))
    functions = []
    for j in range(int(rng.integers(1, max_fns + 1))):
        arity = int(rng.integers(1, min(3, n) + 1))
        scope = tuple(rng.choice(ids, size=arity, replace=False))
        mag = rng.uniform(0.05, 1.0, size=1 << arity)
        phase = np.exp(2j * np.pi * rng.random(1 << arity))
        functions.append(FunctionNode(f"f{j}", scope, DiagonalOperator(mag * phase)))
    return FactorGraph(tuple(variables), tuple(functions))


@pytest.fixture(scope="session")
def random_graphs() -> list[FactorGraph]:
    rng = np.random.default_rng(20240611)
    return [random_graph(rng) for _ in range(20)]


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary
_CRITERIA: dict[int, list[tuple[str, bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    n, title = marker.args
    callspec = getattr(item, "callspec", None)
    if callspec is not None:
        title = f"{title} [{callspec.id}]"
    _CRITERIA.setdefault(n, []).append((title, report.passed))
    print(f"\ncriterion {n:>2} {'PASS' if report.passed else 'FAIL'}  {title}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        for title, ok in _CRITERIA[n]:
            terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}")
