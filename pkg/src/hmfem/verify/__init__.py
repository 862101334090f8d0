from .checks import Report, check_bounds, check_pattern, check_R, check_skew, monitor, write_report
from .oracle import OracleGrid, dense_fixedpoint_step, dense_semilinear_step, oracle_assemble
from .suite import run_suite

__all__ = [
    "Report", "check_bounds", "check_pattern", "check_R", "check_skew", "monitor",
    "write_report", "OracleGrid", "dense_fixedpoint_step", "dense_semilinear_step",
    "oracle_assemble", "run_suite",
]
