import os

import numpy as np
import pytest

from skylight_compass.models import CameraRig, EncodingSpec, NetworkConfig, Scheme, TrainConfig
from skylight_compass.skysim import generate_dataset, uniform_headings, uniform_sun


@pytest.fixture(scope="session", autouse=True)
def settings(tmp_path_factory):
    """Configure settings for tests.

    - Shrink the camera and network so command line runs take well under a second
    - Keep sun azimuth pinned so headings are learnable
    """
    config_dir = tmp_path_factory.mktemp("config")

    dotenv_file = config_dir / ".env"

    dotenv_file.write_text(
        """SKYC_LOG_LEVEL=warning

SKYC_SKY__WIDTH=16
SKYC_SKY__HEIGHT=16
SKYC_SKY__NOISE_SIGMA=0.0

SKYC_POLARIMETRY__POOL_SIZE=2

SKYC_ENCODING__J=10.0
SKYC_ENCODING__M=0.7

SKYC_NETWORK__BRANCH_HIDDEN=[6, 4]
SKYC_NETWORK__FUSION_HIDDEN=8

SKYC_TRAIN__EPOCHS=3
SKYC_TRAIN__BATCH_SIZE=4
"""
    )

    os.environ["SKYC_DOTENV_FILE"] = str(dotenv_file)

    from skylight_compass.settings import configure

    return configure()


@pytest.fixture(scope="session")
def small_rig():
    return CameraRig(width=16, height=16, fov=90.0, dop_max=0.8)


@pytest.fixture(scope="session")
def small_spec():
    return EncodingSpec(scheme=Scheme.EXP, j=10.0, m=0.7)


@pytest.fixture(scope="session")
def small_network(small_spec):
    return NetworkConfig.for_spec(
        small_spec, grid_h=4, grid_w=4, pool_size=2, branch_hidden=(6, 4), fusion_hidden=8
    )


@pytest.fixture(scope="session")
def small_train(small_spec):
    return TrainConfig(epochs=3, batch_size=4, learning_rate=1e-2, seed=0, spec=small_spec)


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory, small_rig):
    """Twelve noisy 16x16 samples on a 10 degree heading grid."""
    root = tmp_path_factory.mktemp("dataset")
    generate_dataset(
        12,
        root,
        seed=3,
        heading_sampler=uniform_headings(10.0),
        sun_sampler=uniform_sun(5.0, 60.0),
        noise_sigma=0.005,
        rig=small_rig,
    )
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
