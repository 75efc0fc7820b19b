import numpy as np
import pytest

from levipick.acoustics import PhysicalConstants
from levipick.geometry import CylinderSpec, build_cylinder
from levipick.gorkov import Particle
from levipick.images import Reflector


@pytest.fixture(scope="session")
def constants():
    return PhysicalConstants()


@pytest.fixture(scope="session")
def particle():
    return Particle()


@pytest.fixture(scope="session")
def cylinder_spec():
    return CylinderSpec()


@pytest.fixture(scope="session")
def cylinder_sources(cylinder_spec):
    return build_cylinder(cylinder_spec)


@pytest.fixture(scope="session")
def table():
    return Reflector(z=0.0, reflection_coefficient=1.0, id="table")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture(scope="session")
def planner_run(cylinder_sources, particle, constants):
    """Plan once per session; expose the schedule and its wall-clock cost."""
    import time

    from levipick.device import plan_picking

    t0 = time.perf_counter()
    schedule = plan_picking(cylinder_sources, particle, constants)
    return schedule, time.perf_counter() - t0


@pytest.fixture(scope="session")
def picking_schedule(planner_run):
    return planner_run[0]
