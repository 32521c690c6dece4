from enum import Enum


class EntryId(str, Enum):
    HADAMARD = "hadamard"
    HADPROD = "hadprod"
    EIGEN_SIMPLEX = "eigen_simplex"
    SQUARING = "squaring"
    BALL = "ball"
    ANNULUS = "annulus"
    PSD_LOWRANK = "psd_lowrank"
    BURER_MONTEIRO = "burer_monteiro"
    LR = "lr"
    DESING_CHART = "desing_chart"
    SVD = "svd"
    MSVD = "msvd"
    CP_RANK1 = "cp_rank1"
    NODAL_CUBIC = "nodal_cubic"
    DISK_QUARTIC = "disk_quartic"


DEFAULT_PARAMS = {
    EntryId.HADAMARD: {"n": 3},
    EntryId.HADPROD: {"n": 3, "m": 2},
    EntryId.EIGEN_SIMPLEX: {"n": 3, "seed": 0},
    EntryId.SQUARING: {"n": 3},
    EntryId.BALL: {"n": 2},
    EntryId.ANNULUS: {"n": 2, "r1": 1.0, "r2": 2.0},
    EntryId.PSD_LOWRANK: {"n": 4, "r": 2},
    EntryId.BURER_MONTEIRO: {"n": 4, "r": 2, "m": 2, "seed": 0},
    EntryId.LR: {"m": 4, "n": 3, "r": 2},
    EntryId.DESING_CHART: {"m": 3, "n": 4, "r": 2, "perm": None},
    EntryId.SVD: {"m": 4, "n": 3, "r": 2},
    EntryId.MSVD: {"m": 4, "n": 3, "r": 2},
    EntryId.CP_RANK1: {"dims": (2, 2, 2)},
    EntryId.NODAL_CUBIC: {},
    EntryId.DISK_QUARTIC: {},
}

REGIME_TOL = 1e-8
DECOMPOSITION_TOL = 1e-9
MIN_SEPARATION = 0.1
