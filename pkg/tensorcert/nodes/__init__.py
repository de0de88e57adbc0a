from .certifier import Certifier
from .extractor import Extractor
from .refiner import Refiner
from .solver import SolverNode

__all__ = ["Certifier", "Extractor", "Refiner", "SolverNode"]
