"""Liouville and Langevin descriptions of particles with random forcing."""

from .errors import *  # noqa: F401,F403
from .models import FhhsModel, PositionModel, RandomForcingModel, VelocityModel
from .rand_inputs import XiDistribution

__all__ = ["FhhsModel", "PositionModel", "RandomForcingModel", "VelocityModel", "XiDistribution"]
