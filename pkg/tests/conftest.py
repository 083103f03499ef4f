from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from dsagg import close_downward, derive, load_instance

INSTANCE_DIR = Path(__file__).resolve().parents[1] / "instances"


@pytest.fixture(scope="session")
def k5_instance_path() -> Path:
    return INSTANCE_DIR / "k5_integral.json"


@pytest.fixture(scope="session")
def k6_instance_path() -> Path:
    return INSTANCE_DIR / "k6_fractional.json"


@pytest.fixture(scope="session")
def k5_instance(k5_instance_path):
    return load_instance(k5_instance_path)


@pytest.fixture(scope="session")
def k6_instance(k6_instance_path):
    return load_instance(k6_instance_path)


@pytest.fixture(scope="session")
def k5_analysis(k5_instance):
    closed = close_downward(k5_instance)
    return closed, derive(closed, k5_instance.num_users)


@pytest.fixture(scope="session")
def k6_analysis(k6_instance):
    closed = close_downward(k6_instance)
    return closed, derive(closed, k6_instance.num_users)
