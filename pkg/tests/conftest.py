import os

import pytest

from meshmem.cat7 import FieldName, make_observation

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


def texts(prefix: str, mood: str = "steady") -> dict[FieldName, str]:
    return {
        name: (mood if name is FieldName.MOOD else f"{prefix}-{name.value}")
        for name in FieldName
    }


def observation(node_id="node-a", prefix="demo", mood="steady",
                coords=(0.2, 0.3), body=None, now=1_000_000):
    return make_observation(node_id, texts(prefix, mood), coords, body, now)


@pytest.fixture
def fixtures_dir():
    return FIXTURES
