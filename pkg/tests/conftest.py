"""
Shared fixtures: isolated settings, small tables and zero-ordinate files.
"""

import mpmath
import pytest

from app.config import settings
from app.services.arith_tables import sieve_tables
from app.services.zeros import load_zeros


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Point the cache at a temporary directory and disable the log file."""
    monkeypatch.setattr(settings, "cache_dir", str(tmp_path / "cache"))
    monkeypatch.setattr(settings, "log_file", "")
    monkeypatch.setattr(settings, "threads", 2)
    yield settings


@pytest.fixture(scope="session")
def small_tables():
    """(Lambda, mu) up to 10^4."""
    return sieve_tables(10_000)


@pytest.fixture(scope="session")
def zero_ordinates() -> list[float]:
    """The first 200 zeta-zero ordinates from mpmath."""
    with mpmath.workdps(25):
        return [float(mpmath.zetazero(n).imag) for n in range(1, 201)]


def _write_zero_file(path, ordinates) -> None:
    lines = ["# ordinates of nontrivial zeta zeros"]
    lines += [f"{g:.15f}" for g in ordinates]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture(scope="session")
def zero_file_100(tmp_path_factory, zero_ordinates):
    path = tmp_path_factory.mktemp("zeros") / "zeros100.txt"
    _write_zero_file(path, zero_ordinates[:100])
    return path


@pytest.fixture(scope="session")
def zero_file_200(tmp_path_factory, zero_ordinates):
    path = tmp_path_factory.mktemp("zeros") / "zeros200.txt"
    _write_zero_file(path, zero_ordinates)
    return path


@pytest.fixture(scope="session")
def zeros_100(zero_file_100):
    return load_zeros(zero_file_100)


@pytest.fixture(scope="session")
def zeros_200(zero_file_200):
    return load_zeros(zero_file_200)
