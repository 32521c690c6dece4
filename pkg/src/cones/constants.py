from enum import Enum


class ConeKind(str, Enum):
    SUBSPACE = "subspace"
    POLYHEDRAL = "polyhedral"
    BOUNDED_RANK = "bounded_rank"
    PSD_RANK = "psd_rank"
    LINE_UNION = "line_union"
    RANK_ONE_TENSOR = "rank_one_tensor"
    PRODUCT = "product"
    INTERSECT_SLICE = "intersect_slice"


class SetKind(str, Enum):
    SIMPLEX = "simplex"
    STOCHASTIC_MATRICES = "stochastic_matrices"
    ORTHANT = "orthant"
    BALL = "ball"
    DISK = "disk"
    ANNULUS = "annulus"
    BOUNDED_RANK = "bounded_rank"
    PSD_BOUNDED_RANK = "psd_bounded_rank"
    SMOOTH_SDP_SLICE = "smooth_sdp_slice"
    NODAL_CUBIC = "nodal_cubic"
    RANK_ONE_TENSORS = "rank_one_tensors"
    PRODUCT = "product"
    PREIMAGE = "preimage"


FEASIBILITY_TOL = 1e-9
MEMBER_TOL = 1e-9
SAMPLE_MEMBER_TOL = 1e-10
EMPIRICAL_ATTEMPTS_FACTOR = 50
HOPM_RESTARTS = 8
HOPM_ITERS = 200
HOPM_TOL = 1e-13
SLICE_NEWTON_ITERS = 50
