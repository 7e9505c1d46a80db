import pytest

from tdea_mitm.cipher import PROFILES, CipherSpec


@pytest.fixture(scope="session")
def toy():
    return PROFILES["toy"]


@pytest.fixture(scope="session")
def tiny():
    return PROFILES["tiny"]


@pytest.fixture(scope="session")
def des():
    return CipherSpec.des()
