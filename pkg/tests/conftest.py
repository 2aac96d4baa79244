import numpy as np
import pytest


def random_spd(gen: np.random.Generator, dim: int = 7, floor: float = 0.1) -> np.ndarray:
    a = gen.standard_normal((dim, dim))
    return a @ a.T + floor * np.eye(dim)


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}".rstrip(": ")
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
