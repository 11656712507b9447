import numpy as np
import pytest

from styleswap.features import ExtractorSpec, load_extractor
from styleswap.geometry import default_reference
from styleswap.synth import make_aligned_face, make_face_corpus


@pytest.fixture(scope="session")
def reference64():
    return default_reference(64)


@pytest.fixture(scope="session")
def reference128():
    return default_reference(128)


@pytest.fixture(scope="session")
def small_extractor():
    # 3 stages keeps relu3_1 reachable on 16px inputs
    return load_extractor(ExtractorSpec(stage_widths=(4, 8, 16),
                                        convs_per_stage=(2, 2, 2),
                                        source="random", seed=11))


@pytest.fixture(scope="session")
def face_corpus64():
    return make_face_corpus(seed=21, n=6, resolution=64)


@pytest.fixture()
def one_face64():
    img, lm = make_aligned_face(np.random.default_rng(33), 64)
    return img, lm
