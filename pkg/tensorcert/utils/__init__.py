from .lowrank import kyfan_norm, membership_test, project_rank, soft_threshold
from .moments import extract_atoms, flatness, moment_operators, moments_from_atoms
from .tensor_core import flatten, hs_norm, spectral_radius, unflatten
