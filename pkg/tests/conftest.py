import numpy as np
import pytest

from relpov import dists
from relpov.ingest import AU_INCOME_YEARS, fixture_path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lognormal():
    return dists.Lognormal(0.0, 1.0)


@pytest.fixture(scope="session")
def ln_sample_1000(lognormal):
    return dists.sample(lognormal, 1000, 2024)


@pytest.fixture(scope="session")
def au_income_paths():
    return {year: fixture_path(f"au_income_{year}.csv") for year in AU_INCOME_YEARS}


@pytest.fixture
def write_lines(tmp_path):
    """Write ``lines`` to a temporary file and return its path."""

    def _write(lines, name="data.csv"):
        path = tmp_path / name
        path.write_text("\n".join(str(v) for v in lines) + "\n")
        return path

    return _write
