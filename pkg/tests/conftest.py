from __future__ import annotations

import pytest

from diffuse_domain.geometry import make_geometry


@pytest.fixture
def circle():
    return make_geometry("circle", radius=1.0)


@pytest.fixture
def ellipse():
    return make_geometry("ellipse", radii=(2.0, 1.0), box=(-3.0, 3.0, -2.0, 2.0))
