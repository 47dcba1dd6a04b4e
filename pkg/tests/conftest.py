import numpy as np
import pytest

from lowrank_phases import kernels, make_ground_truth, make_instance, sensing


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT compilation happens once here so timed tests measure the math only
    kernels.warmup()


@pytest.fixture(scope="session")
def small_instance():
    # n=8, m heavily oversampled so concentration-dependent checks are stable
    op = sensing.gen_gaussian_operator(8, 640, seed=501)
    truth = make_ground_truth(8, 2, seed=502)
    return make_instance(truth, op)


@pytest.fixture(scope="session")
def desk_instance():
    op = sensing.gen_gaussian_operator(60, 1800, seed=11)
    truth = make_ground_truth(60, 3, seed=12)
    return make_instance(truth, op)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
