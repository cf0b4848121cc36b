import sys
from functools import lru_cache

import numpy as np
import pytest

from flagqec.codes import build_hex_color_code, code_from_supports
from flagqec.gf2core import BitMatrix
from flagqec.sim import ProtocolSetup

# Steane check matrix and right inverse as written out in the worked example
STEANE_H = np.array(
    [
        [0, 0, 0, 1, 1, 1, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [1, 0, 1, 0, 1, 0, 1],
    ],
    dtype=np.uint8,
)
STEANE_H_INV = np.array(
    [
        [0, 0, 1],
        [0, 1, 0],
        [0, 0, 0],
        [1, 0, 0],
        [0, 0, 0],
        [0, 0, 0],
        [0, 0, 0],
    ],
    dtype=np.uint8,
)


@lru_cache(maxsize=None)
def hex_code(d):
    return build_hex_color_code(d)[0]


@lru_cache(maxsize=None)
def setup_for(d):
    return ProtocolSetup(d)


@pytest.fixture(scope="session")
def steane():
    supports = [np.flatnonzero(row).tolist() for row in STEANE_H]
    return code_from_supports(7, supports, 3)


@pytest.fixture(scope="session")
def setup3():
    return setup_for(3)


@pytest.fixture(scope="session")
def setup5():
    return setup_for(5)


def bits(s):
    return BitMatrix(np.array([[int(c) for c in row] for row in s.split()], dtype=np.uint8))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
