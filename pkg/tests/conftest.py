import numpy as np
import pytest

from costeer.steering import SteeringParams
from costeer.vehicle import VehicleParams, params_array


@pytest.fixture
def vehicle_params():
    return VehicleParams()


@pytest.fixture
def steering_params():
    return SteeringParams()


@pytest.fixture
def kernel_params(vehicle_params, steering_params):
    return params_array(vehicle_params, steering_params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
