import pytest

from rmdo import build_game


@pytest.fixture(scope="session")
def kuhn():
    return build_game("kuhn")


@pytest.fixture(scope="session")
def leduc():
    return build_game("leduc")


@pytest.fixture(scope="session")
def large_kuhn():
    return build_game("large_kuhn")


@pytest.fixture(scope="session")
def small_leduc():
    return build_game("leduc", ranks=2, max_raises=1)
