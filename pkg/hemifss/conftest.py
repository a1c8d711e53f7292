import pytest

from hemifss.goldberg_tess import GoldbergSpec, build_goldberg, hemisphere_with_skirt, layer_tessellations
from hemifss.tmm_circuit import reference_stack


@pytest.fixture(scope="session")
def lossless_stack():
    return reference_stack(tan_delta=0.0)


@pytest.fixture(scope="session")
def sphere_m4():
    return build_goldberg(GoldbergSpec(m=4, radius=73.75))


@pytest.fixture(scope="session")
def dome_m4(sphere_m4):
    return hemisphere_with_skirt(sphere_m4, 25.0)


@pytest.fixture(scope="session")
def spheres_m20():
    """Full GP(20, 0) spheres at the three layer radii."""
    return layer_tessellations(m=20)


@pytest.fixture(scope="session")
def dome_m20():
    return hemisphere_with_skirt(build_goldberg(GoldbergSpec(m=20, radius=73.75)), 25.0)
