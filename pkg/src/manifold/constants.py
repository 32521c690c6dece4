from enum import Enum


class ManifoldKind(str, Enum):
    CHART = "chart"
    EMBEDDED = "embedded"
    PRODUCT = "product"
    SPHERE = "sphere"
    STIEFEL = "stiefel"


GAUSS_NEWTON_MAX_ITERS = 50
GAUSS_NEWTON_TARGET = 1e-15
GAUSS_NEWTON_ACCEPT = 1e-12

ON_MANIFOLD_TOL = 1e-10
TANGENT_TOL = 1e-8
SECOND_ORDER_TOL = 1e-8

RANK_CHECK_POINTS = 4
RANK_CHECK_STEP = 1e-3
