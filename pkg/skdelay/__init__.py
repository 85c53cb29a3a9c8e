import catalogue
from confection import Config, registry

registry.drifts = catalogue.create("confection", "drifts", entry_points=False)
registry.samplers = catalogue.create(
    "confection", "samplers", entry_points=False
)
registry.checks = catalogue.create("confection", "checks", entry_points=False)

__version__ = "0.1.0"

from skdelay import checks, drifts, noise
