from enum import Enum


class CostKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    QUADRATIC_QUARTIC = "quadratic_quartic"
    QUADRATIC_SHIFT = "quadratic_shift"
    CONSTANT = "constant"
    CUSTOM = "custom"


class HessianSource(str, Enum):
    CLOSED_FORM = "closed_form"
    FINITE_DIFFERENCE = "finite_difference"


class StopReason(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"


FD_STEPS = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5)
FD_GRAD_SLOPE = 1.9
FD_HESS_SLOPE = 0.9
HESS_FD_STEP = 1e-4

ARMIJO_C = 1e-4
BACKTRACK_FACTOR = 0.5
MAX_BACKTRACKS = 60
BB_MIN_STEP = 1e-10
BB_MAX_STEP = 1e10

PGD_MAX_ITERS = 20000
PGD_TOL = 1e-12
