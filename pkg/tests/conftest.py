import pytest

from qcapim.synth import synthesize_primitive_layout, synthesize_xor_layout


@pytest.fixture(scope="session")
def xor_layout():
    return synthesize_xor_layout()


@pytest.fixture(scope="session")
def primitive_layout():
    return synthesize_primitive_layout()
