from .report_service import RunReport, build_report, load_solution
from .tensor_io import load_tensor, save_tensor

__all__ = ["RunReport", "build_report", "load_solution", "load_tensor", "save_tensor"]
