from enum import Enum


class Task(str, Enum):
    CHECK = "check"
    WITNESS = "witness"
    OPTIMIZE = "optimize"
    TAYLOR = "taylor"
    SLP_EVIDENCE = "slp-evidence"


class CostFamily(str, Enum):
    LINEAR = "linear"
    CONVEX_QUADRATIC = "convex_quadratic"
    QUADRATIC_QUARTIC = "quadratic_quartic"


SIGNIFICANT_DIGITS = 12
TAYLOR_COLUMNS = ("t", "residual1", "residual2")
TRACE_COLUMNS = ("iter", "gradnorm", "mineig")
ORACLE_VALUE_TOL = 1e-5
SUITE_TRIALS = 3
