from enum import Enum


class Property(str, Enum):
    ONE_TO_ONE = "1=>1"
    TWO_TO_ONE = "2=>1"
    LOCAL_TO_LOCAL = "local=>local"


class ChainLink(str, Enum):
    A_SUFFICIENT = "A_sufficient"
    B_DUAL_SUFFICIENT = "B_dual_sufficient"
    W_CONDITION = "W_condition"
    NECESSARY = "necessary_condition"


class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


class WitnessKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


SUBSPACE_MATCH_TOL = 1e-7
STATIONARY_GAP_TOL = 1e-6
RANGE_INCLUSION_TOL = 1e-7
WITNESS_GRAD_TOL = 1e-9
WITNESS_HESS_TOL = 1e-8
A_SET_RESTARTS = 20
A_SET_ITERS = 50
A_SET_RESIDUAL_TOL = 1e-9
B_RATE_INDICES = (1, 2, 4, 8, 16, 32, 64)
B_RATE_BOUNDS = (0.45, 0.55)
B_TARGET_TOL = 1e-9
SLP_INDICES = (4, 8, 16, 32, 64)
SLP_MARGIN = 0.1
DECOMPOSITION_CHECK_TOL = 1e-8
