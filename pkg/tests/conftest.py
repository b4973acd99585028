from pathlib import Path

import pytest

from farecfn.timetable import load_dataset
from farecfn.tickets import CheckMode

DATA = Path(__file__).resolve().parents[1] / "src" / "farecfn" / "data"
MDV_TRIALS = 100_000


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def mdv():
    return load_dataset(DATA / "mdv")


@pytest.fixture(scope="session")
def mdv_partition(mdv):
    return mdv.fares.partition(CheckMode("sampled", MDV_TRIALS, 0))


@pytest.fixture(scope="session")
def fig4b():
    return load_dataset(DATA / "fig4b")


@pytest.fixture(scope="session")
def fig4c():
    return load_dataset(DATA / "fig4c")


@pytest.fixture(scope="session")
def fig5():
    return load_dataset(DATA / "fig5")


@pytest.fixture(scope="session")
def city():
    from farecfn.synthetic import synthetic_city
    return synthetic_city()
