import pytest

from composite_forge.modroots import build_root_table
from composite_forge.poly import IntPolynomial


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("root-cache"))


@pytest.fixture(scope="session")
def f_x():
    return IntPolynomial.from_monomial([0, 1])


@pytest.fixture(scope="session")
def f_x2p1():
    return IntPolynomial.from_monomial([1, 0, 1])


@pytest.fixture(scope="session")
def table_x_100(f_x):
    return build_root_table(f_x, 100)


@pytest.fixture(scope="session")
def table_x2p1_100(f_x2p1):
    return build_root_table(f_x2p1, 100)


@pytest.fixture(scope="session")
def table_x2p1_2000(f_x2p1, cache_dir):
    return build_root_table(f_x2p1, 2000, cache_dir=cache_dir)


@pytest.fixture(scope="session")
def table_x2p1_1e6(f_x2p1, cache_dir):
    return build_root_table(f_x2p1, 10**6, cache_dir=cache_dir)
