import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from syncmesh.model import SensorReading


def make_reading(rng: random.Random, node_id="node-00", sensor_id=None,
                 timestamp=None) -> SensorReading:
    return SensorReading(
        node_id=node_id,
        sensor_id=sensor_id or f"sensor-{rng.randrange(40):03d}",
        timestamp=timestamp if timestamp is not None else rng.randrange(1, 10**12),
        lat=round(rng.uniform(-90, 90), 5),
        lon=round(rng.uniform(-180, 180), 5),
        p1=round(rng.lognormvariate(2.5, 0.8), 2),
        p2=round(rng.lognormvariate(2.0, 0.8), 2),
        temperature=round(rng.uniform(-10, 40), 2),
        humidity=round(rng.uniform(0, 100), 2),
        pressure=None if rng.random() < 0.2 else round(rng.gauss(101325, 300), 1),
    )


@pytest.fixture
def rng():
    return random.Random(20240817)
