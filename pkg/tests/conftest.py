"""Shared fixtures: meshes and assembled systems reused across test modules.

Session scope keeps the expensive pieces (assembly on the finer meshes, numba
warmup) to a single build.
"""
import numpy as np
import pytest

from wgstokes import assembly, meshes, regularization
from wgstokes.experiments import manufactured_case


def zero_field(x):
    return np.zeros_like(x)


@pytest.fixture(scope="session")
def mesh2_n2():
    return meshes.generate_structured(2, 2)


@pytest.fixture(scope="session")
def mesh2_n4():
    return meshes.generate_structured(2, 4)


@pytest.fixture(scope="session")
def mesh2_n8():
    return meshes.generate_structured(2, 8)


@pytest.fixture(scope="session")
def mesh3_n1():
    return meshes.generate_structured(3, 1)


@pytest.fixture(scope="session")
def mesh3_n2():
    return meshes.generate_structured(3, 2)


@pytest.fixture(scope="session")
def case2d():
    return manufactured_case(2, 1.0)


@pytest.fixture(scope="session")
def case3d():
    return manufactured_case(3, 1.0)


@pytest.fixture(scope="session")
def system2_n4(mesh2_n4, case2d):
    return assembly.assemble(mesh2_n4, case2d.mu, case2d.body_force, case2d.boundary)


@pytest.fixture(scope="session")
def system2_n8(mesh2_n8, case2d):
    return assembly.assemble(mesh2_n8, case2d.mu, case2d.body_force, case2d.boundary)


@pytest.fixture(scope="session")
def system3_n1(mesh3_n1, case3d):
    return assembly.assemble(mesh3_n1, case3d.mu, case3d.body_force, case3d.boundary)


@pytest.fixture(scope="session")
def zero_system2_n2(mesh2_n2):
    return assembly.assemble(mesh2_n2, 1.0, zero_field, zero_field)


@pytest.fixture(scope="session")
def reg_ones_n4(mesh2_n4):
    return regularization.build_regularization("ones", mesh2_n4, rho=1.0)


@pytest.fixture(scope="session")
def reg_pin_n4(mesh2_n4):
    return regularization.build_regularization("pin", mesh2_n4)
