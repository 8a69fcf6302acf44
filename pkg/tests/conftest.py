from __future__ import annotations

import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


@pytest.fixture
def configs_dir() -> str:
    return CONFIGS


def pytest_configure(config):
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 5000))
