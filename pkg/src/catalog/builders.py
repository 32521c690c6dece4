from dataclasses import replace
from functools import partial
from itertools import combinations

import numpy as np

from . import pathology
from .constants import DECOMPOSITION_TOL, EntryId, MIN_SEPARATION, REGIME_TOL
from .models import CatalogEntry
from ..checker.constants import Property
from ..common.exceptions import InvalidInputException
from ..common.logger import get_logger
from ..cones.models import outer
from ..cones.sets import (
    Annulus,
    Ball,
    BoundedRank,
    Disk,
    NodalCubic,
    Orthant,
    Preimage,
    PsdBoundedRank,
    RankOneTensors,
    Simplex,
    SmoothSdpSlice,
    StochasticMatrices,
)
from ..lift.combinators import compose_submersion, fiber_product, product
from ..lift.models import ADecomposition, DegenerateDirection, Lift, SmoothMap, Submersion
from ..manifold.models import ChartDomain, Embedded, Product, Sphere, Stiefel
from ..manifold.service import desing_total_space
from ..numerics.service import (
    as_generator,
    kernel_basis,
    numerical_rank,
    orthogonal_complement,
    random_stiefel,
    range_basis,
)

logger = get_logger(__name__)


def _flat(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


def _require(condition: bool, message: str) -> None:
    if not condition:
        logger.warning(message)
        raise InvalidInputException(message)


def _signs(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=size)


def _spread(rng: np.random.Generator, size: int, low: float = 0.5, high: float = 2.0) -> np.ndarray:
    """size magnitudes in [low, high] pairwise at least MIN_SEPARATION apart."""
    grid = np.arange(low, high + 1e-12, MIN_SEPARATION)
    return rng.choice(grid, size=size, replace=False)


def _always(value):
    return lambda y: value


# Hadamard family


def _zero_mask(y: np.ndarray) -> np.ndarray:
    return np.abs(y) <= REGIME_TOL


def _squares_decomposer(y, d, on_sphere: bool) -> ADecomposition:
    """d = Q(v) + L(u) with v supported on the zero coordinates of y, v_Z = sqrt(d_Z / 2)."""
    y, d = _flat(y), _flat(d)
    zero = _zero_mask(y)
    tol = DECOMPOSITION_TOL * max(1.0, float(np.linalg.norm(d)))
    if on_sphere and abs(float(d.sum())) > tol:
        return ADecomposition(contains=False)
    if np.any(d[zero] < -tol):
        return ADecomposition(contains=False)
    v = np.zeros_like(y)
    v[zero] = np.sqrt(np.maximum(d[zero], 0.0) / 2.0)
    return ADecomposition(contains=True, v=v)


def _squares_lift(name: str, manifold, on_sphere: bool) -> Lift:
    return Lift(
        name=name,
        manifold=manifold,
        ambient_shape=(manifold.ambient_dim,),
        phi=lambda y: y * y,
        dphi=lambda y, v: 2.0 * y * v,
        d2phi=lambda y, v: 2.0 * v * v,
        a_set_decomposer=partial(_squares_decomposer, on_sphere=on_sphere),
    )


def _sphere_interior(n: int, rng: np.random.Generator) -> np.ndarray:
    weights = 0.5 / n + 0.5 * rng.dirichlet(np.ones(n))
    return _signs(rng, n) * np.sqrt(weights)


def _sphere_boundary(n: int, rng: np.random.Generator) -> np.ndarray:
    zeros = rng.choice(n, size=int(rng.integers(1, n)), replace=False)
    y = np.zeros(n)
    keep = np.setdiff1d(np.arange(n), zeros)
    y[keep] = _sphere_interior(keep.size, rng)
    return y


def _no_zero_coordinates(y) -> bool:
    return not np.any(_zero_mask(_flat(y)))


def hadamard(n: int = 3) -> CatalogEntry:
    _require(n >= 2, f"hadamard needs n >= 2, got {n}")
    return CatalogEntry(
        id=EntryId.HADAMARD,
        params={"n": n},
        lift=_squares_lift(f"hadamard({n})", Sphere(n - 1), on_sphere=True),
        set_desc=Simplex(n),
        regimes={
            "interior": partial(_sphere_interior, n),
            "boundary": partial(_sphere_boundary, n),
        },
        expected={
            Property.ONE_TO_ONE: _no_zero_coordinates,
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: _always(True),
        },
    )


def hadprod(n: int = 3, m: int = 2) -> CatalogEntry:
    _require(n >= 2 and m >= 1, f"hadprod needs n >= 2 and m >= 1, got n={n}, m={m}")
    column = hadamard(n).lift
    lift = product([column] * m, name=f"hadprod({n},{m})")

    def boundary(rng):
        hit = int(rng.integers(m))
        return np.concatenate([
            _sphere_boundary(n, rng) if j == hit or rng.random() < 0.5 else _sphere_interior(n, rng)
            for j in range(m)
        ])

    return CatalogEntry(
        id=EntryId.HADPROD,
        params={"n": n, "m": m},
        lift=lift,
        set_desc=StochasticMatrices(n, m),
        regimes={
            "interior": lambda rng: np.concatenate([_sphere_interior(n, rng) for _ in range(m)]),
            "boundary": boundary,
        },
        expected={
            Property.ONE_TO_ONE: _no_zero_coordinates,
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: _always(True),
        },
    )


def eigen_simplex(n: int = 3, seed: int = 0, u: np.ndarray | None = None) -> CatalogEntry:
    """hadamard composed with z -> U^T z on the sphere, U orthogonal."""
    _require(n >= 2, f"eigen_simplex needs n >= 2, got {n}")
    rot = random_stiefel(n, n, seed) if u is None else np.asarray(u, dtype=float)
    _require(rot.shape == (n, n) and np.allclose(rot.T @ rot, np.eye(n), atol=1e-10),
             "eigen_simplex needs an orthogonal n-by-n matrix")
    base = hadamard(n)
    psi = Submersion(
        domain=Sphere(n - 1),
        map=SmoothMap(
            in_dim=n,
            out_dim=n,
            value=lambda z: rot.T @ z,
            jvp=lambda z, v: rot.T @ v,
            hvp=lambda z, v: np.zeros(n),
            name="U^T",
        ),
    )

    def decompose(z, d):
        found = base.lift.a_set_decomposer(rot.T @ _flat(z), d)
        if found.v is None:
            return found
        return ADecomposition(contains=found.contains, v=rot @ found.v)

    lift = replace(compose_submersion(base.lift, psi, name=f"eigen_simplex({n})"), a_set_decomposer=decompose)
    return CatalogEntry(
        id=EntryId.EIGEN_SIMPLEX,
        params={"n": n, "seed": seed},
        lift=lift,
        set_desc=Simplex(n),
        regimes={name: (lambda rng, s=s: rot @ s(rng)) for name, s in base.regimes.items()},
        expected={prop: (lambda z, p=p: p(rot.T @ _flat(z))) for prop, p in base.expected.items()},
    )


def squaring(n: int = 3) -> CatalogEntry:
    _require(n >= 1, f"squaring needs n >= 1, got {n}")

    def boundary(rng):
        y = _signs(rng, n) * rng.uniform(0.2, 1.5, size=n)
        y[rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)] = 0.0
        return y

    return CatalogEntry(
        id=EntryId.SQUARING,
        params={"n": n},
        lift=_squares_lift(f"squaring({n})", ChartDomain(n), on_sphere=False),
        set_desc=Orthant(n),
        regimes={
            "interior": lambda rng: _signs(rng, n) * rng.uniform(0.2, 1.5, size=n),
            "boundary": boundary,
        },
        expected={
            Property.ONE_TO_ONE: _no_zero_coordinates,
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: _always(True),
        },
    )


# fiber products over the squaring lift


def _unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal(n)
    return g / np.linalg.norm(g)


def ball_map(n: int) -> SmoothMap:
    """x -> 1 - |x|^2; the unit ball is its preimage of the orthant."""
    return SmoothMap(
        in_dim=n,
        out_dim=1,
        value=lambda x: np.array([1.0 - x @ x]),
        jvp=lambda x, v: np.array([-2.0 * (x @ v)]),
        hvp=lambda x, v: np.array([-2.0 * (v @ v)]),
        name="1-|x|^2",
    )


def annulus_map(n: int, r1: float, r2: float) -> SmoothMap:
    """x -> (|x|^2 - r1^2, r2^2 - |x|^2); the annulus is its preimage of the orthant."""
    return SmoothMap(
        in_dim=n,
        out_dim=2,
        value=lambda x: np.array([x @ x - r1 ** 2, r2 ** 2 - x @ x]),
        jvp=lambda x, v: np.array([2.0 * (x @ v), -2.0 * (x @ v)]),
        hvp=lambda x, v: np.array([2.0 * (v @ v), -2.0 * (v @ v)]),
        name="annulus bands",
    )


def as_preimage(entry: CatalogEntry) -> Preimage:
    """The ball or annulus of a catalog entry written as F^{-1}(orthant), F being its radius map."""
    params = entry.params
    if entry.id == EntryId.BALL:
        F = ball_map(params["n"])
    elif entry.id == EntryId.ANNULUS:
        F = annulus_map(params["n"], params["r1"], params["r2"])
    else:
        raise InvalidInputException(f"{entry.id.value} is not a fiber product over the squaring lift")
    direct = entry.set_desc
    return Preimage(F=F, base=Orthant(F.out_dim), sampler=direct.sample, near_sampler=direct.sample_near)


def ball(n: int = 2) -> CatalogEntry:
    """{(x, y) : 1 - |x|^2 = y^2} -> x onto the closed unit ball."""
    _require(n >= 1, f"ball needs n >= 1, got {n}")
    lift = fiber_product(ball_map(n), squaring(1).lift, name=f"ball({n})",
                         sampler=lambda rng: _unit_vector(rng, n + 1))

    def interior(rng):
        radius = 0.9 * rng.uniform() ** (1.0 / n)
        x = radius * _unit_vector(rng, n)
        return np.concatenate([x, [_signs(rng, 1)[0] * np.sqrt(1.0 - radius ** 2)]])

    return CatalogEntry(
        id=EntryId.BALL,
        params={"n": n},
        lift=lift,
        set_desc=Ball(n),
        regimes={
            "interior": interior,
            "boundary": lambda rng: np.concatenate([_unit_vector(rng, n), [0.0]]),
        },
        expected={
            Property.ONE_TO_ONE: lambda z: abs(_flat(z)[n]) > REGIME_TOL,
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: _always(True),
        },
    )


def annulus(n: int = 2, r1: float = 1.0, r2: float = 2.0) -> CatalogEntry:
    """{(x, y) : |x|^2 - r1^2 = y_1^2, r2^2 - |x|^2 = y_2^2} -> x."""
    _require(n >= 1, f"annulus needs n >= 1, got {n}")
    set_desc = Annulus(n, r1, r2)

    def at_radius(rho, rng):
        x = rho * _unit_vector(rng, n)
        y = np.sqrt(np.maximum([rho ** 2 - r1 ** 2, r2 ** 2 - rho ** 2], 0.0)) * _signs(rng, 2)
        return np.concatenate([x, y])

    margin = 0.1 * (r2 - r1)
    lift = fiber_product(annulus_map(n, r1, r2), squaring(2).lift, name=f"annulus({n},{r1},{r2})",
                         sampler=lambda rng: at_radius(rng.uniform(r1, r2), rng))
    return CatalogEntry(
        id=EntryId.ANNULUS,
        params={"n": n, "r1": r1, "r2": r2},
        lift=lift,
        set_desc=set_desc,
        regimes={
            "interior": lambda rng: at_radius(rng.uniform(r1 + margin, r2 - margin), rng),
            "inner_boundary": lambda rng: at_radius(r1, rng),
            "outer_boundary": lambda rng: at_radius(r2, rng),
        },
        expected={
            Property.ONE_TO_ONE: lambda z: bool(np.all(np.abs(_flat(z)[n:]) > REGIME_TOL)),
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: _always(True),
        },
    )


# PSD factorizations


def _psd_decomposer(y, d, n: int, r: int) -> ADecomposition:
    """Closed form on ker L: R' = U_perp C P^T / sqrt(2) with C C^T the U_perp block of d, P spanning ker R."""
    factor = _flat(y).reshape(n, r)
    d = _flat(d).reshape(n, n)
    tol = DECOMPOSITION_TOL * max(1.0, float(np.linalg.norm(d)))
    if np.linalg.norm(d - d.T) > tol:
        return ADecomposition(contains=False)
    col = range_basis(factor)
    s = col.shape[1]
    perp = orthogonal_complement(col, n)
    block = perp.T @ d @ perp
    eig, vec = np.linalg.eigh(0.5 * (block + block.T))
    if eig.size and eig[0] < -tol:
        return ADecomposition(contains=False)
    if int(np.sum(eig > tol)) > r - s:
        return ADecomposition(contains=False)
    if r == s:
        return ADecomposition(contains=True, v=np.zeros(n * r))
    top = slice(eig.size - (r - s), eig.size)
    c = vec[:, top] * np.sqrt(np.maximum(eig[top], 0.0))
    kernel = kernel_basis(factor)
    velocity = perp @ c @ kernel.T / np.sqrt(2.0)
    return ADecomposition(contains=True, v=velocity.reshape(-1))


def _psd_lift(n: int, r: int) -> Lift:
    def unpack(y):
        return _flat(y).reshape(n, r)

    def dphi(y, v):
        f, dv = unpack(y), unpack(v)
        return (dv @ f.T + f @ dv.T).reshape(-1)

    return Lift(
        name=f"psd_lowrank({n},{r})",
        manifold=ChartDomain(n * r),
        ambient_shape=(n, n),
        phi=lambda y: (unpack(y) @ unpack(y).T).reshape(-1),
        dphi=dphi,
        d2phi=lambda y, v: (2.0 * unpack(v) @ unpack(v).T).reshape(-1),
        a_set_decomposer=partial(_psd_decomposer, n=n, r=r),
    )


def _low_rank(rng: np.random.Generator, rows: int, cols: int, rank: int) -> np.ndarray:
    return rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))


def psd_lowrank(n: int = 4, r: int = 2) -> CatalogEntry:
    _require(1 <= r <= n, f"psd_lowrank needs 1 <= r <= n, got n={n}, r={r}")
    return CatalogEntry(
        id=EntryId.PSD_LOWRANK,
        params={"n": n, "r": r},
        lift=_psd_lift(n, r),
        set_desc=PsdBoundedRank(n, r),
        regimes={
            "full_rank": lambda rng: rng.standard_normal(n * r),
            "rank_deficient": lambda rng: _low_rank(rng, n, r, int(rng.integers(0, r))).reshape(-1),
        },
        expected={
            Property.ONE_TO_ONE: lambda y: numerical_rank(_flat(y).reshape(n, r)) == r,
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: _always(True),
        },
    )


def _origin_lift(m: int) -> Lift:
    return Lift(
        name="origin",
        manifold=ChartDomain(0),
        ambient_shape=(m,),
        phi=lambda y: np.zeros(m),
        dphi=lambda y, v: np.zeros(m),
        d2phi=lambda y, v: np.zeros(m),
    )


def burer_monteiro(n: int = 4, r: int = 2, m: int = 2, seed: int = 0) -> CatalogEntry:
    """{(X, R) : X = R R^T, <A_i, X> = b_i} -> X with generated symmetric A_i and a rank-one feasible anchor."""
    _require(2 <= r <= n and m >= 1, f"burer_monteiro needs 2 <= r <= n and m >= 1, got n={n}, r={r}, m={m}")
    rng = as_generator(seed)
    a_list = []
    for _ in range(m):
        g = rng.standard_normal((n, n))
        sym = 0.5 * (g + g.T)
        a_list.append(sym / np.linalg.norm(sym))
    a_list = np.array(a_list)
    anchor = np.zeros((n, r))
    anchor[:, 0] = rng.standard_normal(n)
    b = np.array([np.sum(a * (anchor @ anchor.T)) for a in a_list])
    set_desc = SmoothSdpSlice(a_list=a_list, b=b, n=n, r=r, anchor=anchor)
    constraints = set_desc.constraints
    size = n * n

    F = SmoothMap(
        in_dim=size,
        out_dim=size + m,
        value=lambda x: np.concatenate([x, constraints @ x - b]),
        jvp=lambda x, v: np.concatenate([v, constraints @ v]),
        hvp=lambda x, v: np.zeros(size + m),
        name="(X, A(X) - b)",
    )
    psi = product([_psd_lift(n, r), _origin_lift(m)])

    def point(factor):
        return np.concatenate([(factor @ factor.T).reshape(-1), factor.reshape(-1)])

    def restored(start_of, gen):
        for _ in range(50):
            factor = set_desc.restore(start_of(gen))
            if factor is not None:
                return factor
        raise InvalidInputException("Could not restore a feasible factor for the SDP slice")

    def full_rank(gen):
        for _ in range(20):
            factor = restored(lambda g: anchor + 0.3 * g.standard_normal((n, r)), gen)
            if numerical_rank(factor) == r:
                return point(factor)
        raise InvalidInputException("Could not sample a full-rank feasible factor")

    def rank_deficient(gen):
        column = restored(lambda g: anchor[:, :1] + 0.3 * g.standard_normal((n, 1)), gen)
        factor = np.hstack([column, np.zeros((n, r - 1))]) @ random_stiefel(r, r, gen).T
        return point(factor)

    lift = fiber_product(
        F, psi,
        name=f"burer_monteiro({n},{r},{m})",
        ambient_shape=(n, n),
        sampler=lambda gen: point(restored(lambda g: anchor + 0.5 * g.standard_normal((n, r)), gen)),
    )
    return CatalogEntry(
        id=EntryId.BURER_MONTEIRO,
        params={"n": n, "r": r, "m": m, "seed": seed},
        lift=lift,
        set_desc=set_desc,
        regimes={"full_rank": full_rank, "rank_deficient": rank_deficient},
        expected={
            Property.ONE_TO_ONE: lambda z: numerical_rank(_flat(z)[size:].reshape(n, r)) == r,
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: _always(True),
        },
    )


# matrix factorizations


def _unit_pairs(rows: int, cols: int):
    """(u, v) over u in {+-e_a}, v = e_b; their products span all rows-by-cols matrices."""
    for a in range(rows):
        for b in range(cols):
            for sign in (1.0, -1.0):
                yield a, b, sign * np.eye(rows)[a], np.eye(cols)[b]


def _lr_family(y, m: int, n: int, r: int) -> list[DegenerateDirection]:
    left, right = pathology._lr_split(_flat(y), m, n, r)
    ker_left, ker_right = kernel_basis(left), kernel_basis(right)
    if ker_left.shape[1]:
        w, left_scale, right_scale = ker_left[:, 0], (lambda i: 1.0 / i), (lambda i: i / 2.0)
    elif ker_right.shape[1]:
        w, left_scale, right_scale = ker_right[:, 0], (lambda i: i / 2.0), (lambda i: 1.0 / i)
    else:
        return []
    family = []
    for a, b, u, v in _unit_pairs(m, n):
        def direction(i, u=u, v=v):
            return np.concatenate([
                (left_scale(i) * np.outer(u, w)).reshape(-1),
                (right_scale(i) * np.outer(v, w)).reshape(-1),
            ])
        family.append(DegenerateDirection(direction=direction, target=np.outer(u, v).reshape(-1),
                                          label=f"u v^T at ({a},{b})"))
    return family


def lr(m: int = 4, n: int = 3, r: int = 2) -> CatalogEntry:
    """(L, R) -> L R^T onto m-by-n matrices of rank at most r."""
    _require(1 <= r < min(m, n), f"lr needs 1 <= r < min(m, n), got m={m}, n={n}, r={r}")

    def unpack(y):
        return pathology._lr_split(_flat(y), m, n, r)

    def phi(y):
        left, right = unpack(y)
        return (left @ right.T).reshape(-1)

    def dphi(y, v):
        left, right = unpack(y)
        dl, dr = unpack(v)
        return (dl @ right.T + left @ dr.T).reshape(-1)

    def d2phi(y, v):
        dl, dr = unpack(v)
        return (2.0 * dl @ dr.T).reshape(-1)

    lift = Lift(
        name=f"lr({m},{n},{r})",
        manifold=ChartDomain(m * r + n * r),
        ambient_shape=(m, n),
        phi=phi,
        dphi=dphi,
        d2phi=d2phi,
        degenerate_family=partial(_lr_family, m=m, n=n, r=r),
    )

    def balanced(rng):
        s = int(rng.integers(0, r))
        mixing = rng.standard_normal((s, r))
        return np.concatenate([
            (rng.standard_normal((m, s)) @ mixing).reshape(-1),
            (rng.standard_normal((n, s)) @ mixing).reshape(-1),
        ])

    def unbalanced(rng):
        s = int(rng.integers(0, r))
        left = rng.standard_normal((m, r))
        right = _low_rank(rng, n, r, s)
        if rng.random() < 0.5 or n < r + 1:
            return np.concatenate([left.reshape(-1), right.reshape(-1)])
        return np.concatenate([_low_rank(rng, m, r, s).reshape(-1), rng.standard_normal((n, r)).reshape(-1)])

    def ranks(y):
        left, right = unpack(y)
        return numerical_rank(left), numerical_rank(right), numerical_rank(left @ right.T)

    return CatalogEntry(
        id=EntryId.LR,
        params={"m": m, "n": n, "r": r},
        lift=lift,
        set_desc=BoundedRank(m, n, r),
        regimes={
            "full_rank": lambda rng: rng.standard_normal(m * r + n * r),
            "balanced": balanced,
            "unbalanced": unbalanced,
        },
        expected={
            Property.ONE_TO_ONE: lambda y: ranks(y)[:2] == (r, r),
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: lambda y: len(set(ranks(y))) == 1,
        },
        pathology=partial(pathology.lr_sequence, m=m, n=n, r=r),
        fiber_distance=partial(pathology.lr_fiber_distance, m=m, n=n, r=r),
    )


def _permutation(n: int, perm) -> np.ndarray:
    order = list(range(n)) if perm is None else [int(p) for p in perm]
    _require(sorted(order) == list(range(n)), f"perm must be a permutation of range({n}), got {perm}")
    return np.eye(n)[order]


def _desing_family(y, m: int, n: int, r: int, pi: np.ndarray) -> list[DegenerateDirection]:
    z, _ = pathology.desing_split(_flat(y), m, n, r)
    ker = kernel_basis(z)
    if ker.shape[1] == 0:
        return []
    w = ker[:, 0]
    family = []
    for a, b, u, v in _unit_pairs(m, n - r):
        def direction(i, u=u, v=v):
            return np.concatenate([(np.outer(u, w) / i).reshape(-1), (i * np.outer(w, v)).reshape(-1)])
        target = np.hstack([-2.0 * np.outer(u, v), np.zeros((m, r))]) @ pi
        family.append(DegenerateDirection(direction=direction, target=target.reshape(-1),
                                          label=f"[-2 u v^T, 0] Pi at ({a},{b})"))
    return family


def desing_chart(m: int = 3, n: int = 4, r: int = 2, perm=None) -> CatalogEntry:
    """(Z, W) -> [-Z W, Z] Pi, the standard chart of the desingularization of rank <= r matrices."""
    _require(1 <= r <= m and r < n, f"desing_chart needs 1 <= r <= m and r < n, got m={m}, n={n}, r={r}")
    pi = _permutation(n, perm)

    def unpack(y):
        return pathology.desing_split(_flat(y), m, n, r)

    def phi(y):
        z, w = unpack(y)
        return (np.hstack([-z @ w, z]) @ pi).reshape(-1)

    def dphi(y, v):
        z, w = unpack(y)
        dz, dw = unpack(v)
        return (np.hstack([-dz @ w - z @ dw, dz]) @ pi).reshape(-1)

    def d2phi(y, v):
        dz, dw = unpack(v)
        return (np.hstack([-2.0 * dz @ dw, np.zeros((m, r))]) @ pi).reshape(-1)

    lift = Lift(
        name=f"desing_chart({m},{n},{r})",
        manifold=ChartDomain(m * r + r * (n - r)),
        ambient_shape=(m, n),
        phi=phi,
        dphi=dphi,
        d2phi=d2phi,
        degenerate_family=partial(_desing_family, m=m, n=n, r=r, pi=pi),
    )

    def rank_deficient(rng):
        z = _low_rank(rng, m, r, int(rng.integers(0, r)))
        return np.concatenate([z.reshape(-1), rng.standard_normal(r * (n - r))])

    def full_rank(y):
        return numerical_rank(unpack(y)[0]) == r

    return CatalogEntry(
        id=EntryId.DESING_CHART,
        params={"m": m, "n": n, "r": r, "perm": None if perm is None else list(perm)},
        lift=lift,
        set_desc=BoundedRank(m, n, r),
        regimes={
            "full_rank": lambda rng: rng.standard_normal(m * r + r * (n - r)),
            "rank_deficient": rank_deficient,
        },
        expected={
            Property.ONE_TO_ONE: full_rank,
            Property.TWO_TO_ONE: _always(True),
            Property.LOCAL_TO_LOCAL: full_rank,
        },
        pathology=partial(pathology.desing_sequence, m=m, n=n, r=r, pi=pi),
        fiber_distance=partial(pathology.desing_fiber_distance, m=m, n=n, r=r, pi=pi),
    )


def desing_total_lift(m: int, n: int, r: int) -> Lift:
    """(X, Y) -> X on {(X, Y) : X Y = 0, Y^T Y = I}; cross-checks the chart."""
    manifold = desing_total_space(m, n, r)
    size = m * n
    return Lift(
        name=f"desing_total({m},{n},{r})",
        manifold=manifold,
        ambient_shape=(m, n),
        phi=lambda z: _flat(z)[:size].copy(),
        dphi=lambda z, v: _flat(v)[:size].copy(),
        d2phi=lambda z, v: np.zeros(size),
    )


# SVD-type lifts


def _all_zero(values: np.ndarray) -> bool:
    return bool(np.all(np.abs(values) <= REGIME_TOL))


def _no_cancelling_pairs(eig: np.ndarray) -> bool:
    """lambda_i + lambda_j != 0 for all i, j (i = j included)."""
    scale = max(1.0, float(np.abs(eig).max(initial=0.0)))
    sums = eig[:, None] + eig[None, :]
    return bool(np.all(np.abs(sums) > REGIME_TOL * scale))


def _three_way(good: bool, zero: bool) -> bool | None:
    if good:
        return True
    if zero:
        return False
    return None


def svd(m: int = 4, n: int = 3, r: int = 2) -> CatalogEntry:
    """(U, sigma, V) -> U diag(sigma) V^T on St(m, r) x R^r x St(n, r)."""
    _require(1 <= r < min(m, n), f"svd needs 1 <= r < min(m, n), got m={m}, n={n}, r={r}")

    def unpack(y):
        return pathology.svd_split(_flat(y), m, n, r)

    def phi(y):
        u, s, w = unpack(y)
        return ((u * s) @ w.T).reshape(-1)

    def dphi(y, v):
        u, s, w = unpack(y)
        du, ds, dw = unpack(v)
        return ((du * s) @ w.T + (u * ds) @ w.T + (u * s) @ dw.T).reshape(-1)

    def d2phi(y, v):
        u, s, w = unpack(y)
        du, ds, dw = unpack(v)
        return (2.0 * ((du * ds) @ w.T + (du * s) @ dw.T + (u * ds) @ dw.T)).reshape(-1)

    lift = Lift(
        name=f"svd({m},{n},{r})",
        manifold=Product((Stiefel(m, r), ChartDomain(r), Stiefel(n, r))),
        ambient_shape=(m, n),
        phi=phi,
        dphi=dphi,
        d2phi=d2phi,
    )

    def sampler(sigma_of):
        def sample(rng):
            sigma = sigma_of(rng)
            return np.concatenate([random_stiefel(m, r, rng).reshape(-1), sigma,
                                   random_stiefel(n, r, rng).reshape(-1)])
        return sample

    def distinct(rng):
        return _signs(rng, r) * _spread(rng, r)

    def repeated(rng):
        sigma = distinct(rng)
        k, l = rng.choice(r, size=2, replace=False)
        sigma[l] = _signs(rng, 1)[0] * sigma[k]
        return sigma

    def zero_sigma(rng):
        sigma = distinct(rng)
        sigma[rng.integers(r)] = 0.0
        return sigma

    def flags(y):
        sigma = unpack(y)[1]
        return pathology._distinct_spectrum(sigma), _all_zero(sigma)

    regimes = {"distinct": sampler(distinct), "zero_sigma": sampler(zero_sigma),
               "zero": sampler(lambda rng: np.zeros(r))}
    if r >= 2:
        regimes["repeated"] = sampler(repeated)
    return CatalogEntry(
        id=EntryId.SVD,
        params={"m": m, "n": n, "r": r},
        lift=lift,
        set_desc=BoundedRank(m, n, r),
        regimes=regimes,
        expected={
            Property.ONE_TO_ONE: lambda y: flags(y)[0],
            Property.TWO_TO_ONE: lambda y: _three_way(*flags(y)),
            Property.LOCAL_TO_LOCAL: lambda y: flags(y)[0],
        },
        pathology=partial(pathology.svd_sequence, m=m, n=n, r=r),
        fiber_distance=partial(pathology.svd_fiber_distance, m=m, n=n, r=r),
    )


def msvd(m: int = 4, n: int = 3, r: int = 2) -> CatalogEntry:
    """(U, M, V) -> U M V^T with M symmetric, on St(m, r) x Sym(r) x St(n, r)."""
    _require(1 <= r < min(m, n), f"msvd needs 1 <= r < min(m, n), got m={m}, n={n}, r={r}")
    p = r * (r + 1) // 2

    def unpack(y):
        return pathology.msvd_split(_flat(y), m, n, r)

    def phi(y):
        u, mid, w = unpack(y)
        return (u @ mid @ w.T).reshape(-1)

    def dphi(y, v):
        u, mid, w = unpack(y)
        du, dmid, dw = unpack(v)
        return (du @ mid @ w.T + u @ dmid @ w.T + u @ mid @ dw.T).reshape(-1)

    def d2phi(y, v):
        u, mid, w = unpack(y)
        du, dmid, dw = unpack(v)
        return (2.0 * (du @ dmid @ w.T + du @ mid @ dw.T + u @ dmid @ dw.T)).reshape(-1)

    lift = Lift(
        name=f"msvd({m},{n},{r})",
        manifold=Product((Stiefel(m, r), ChartDomain(p), Stiefel(n, r))),
        ambient_shape=(m, n),
        phi=phi,
        dphi=dphi,
        d2phi=d2phi,
    )

    def sampler(eig_of):
        def sample(rng):
            basis = random_stiefel(r, r, rng)
            mid = basis @ np.diag(eig_of(rng)) @ basis.T
            return np.concatenate([random_stiefel(m, r, rng).reshape(-1), pathology.coords_from_sym(mid),
                                   random_stiefel(n, r, rng).reshape(-1)])
        return sample

    def generic(rng):
        for _ in range(100):
            eig = _signs(rng, r) * _spread(rng, r)
            if all(abs(a + b) >= MIN_SEPARATION for a in eig for b in eig):
                return eig
        return _spread(rng, r)

    def cancelling(rng):
        eig = generic(rng)
        k, l = rng.choice(r, size=2, replace=False)
        eig[l] = -eig[k]
        return eig

    def singular(rng):
        eig = generic(rng)
        eig[rng.integers(r)] = 0.0
        return eig

    def flags(y):
        eig = np.linalg.eigvalsh(unpack(y)[1])
        return _no_cancelling_pairs(eig), _all_zero(eig)

    regimes = {"generic": sampler(generic), "singular": sampler(singular),
               "zero": sampler(lambda rng: np.zeros(r))}
    if r >= 2:
        regimes["cancelling"] = sampler(cancelling)
    return CatalogEntry(
        id=EntryId.MSVD,
        params={"m": m, "n": n, "r": r},
        lift=lift,
        set_desc=BoundedRank(m, n, r),
        regimes=regimes,
        expected={
            Property.ONE_TO_ONE: lambda y: flags(y)[0],
            Property.TWO_TO_ONE: lambda y: _three_way(*flags(y)),
            Property.LOCAL_TO_LOCAL: lambda y: flags(y)[0],
        },
        pathology=partial(pathology.msvd_sequence, m=m, n=n, r=r),
        fiber_distance=partial(pathology.msvd_fiber_distance, m=m, n=n, r=r),
    )


# multilinear


def cp_rank1(dims=(2, 2, 2)) -> CatalogEntry:
    """(a_1, ..., a_k) -> a_1 o ... o a_k onto rank-one tensors."""
    dims = tuple(int(d) for d in dims)
    _require(len(dims) >= 2 and min(dims) >= 1, f"cp_rank1 needs at least two positive dimensions, got {dims}")
    offsets = np.cumsum((0,) + dims)

    def split(y):
        y = _flat(y)
        return [y[a:b] for a, b in zip(offsets[:-1], offsets[1:])]

    def dphi(y, v):
        factors, moves = split(y), split(v)
        total = np.zeros(dims)
        for k in range(len(dims)):
            parts = list(factors)
            parts[k] = moves[k]
            total += outer(parts)
        return total.reshape(-1)

    def d2phi(y, v):
        factors, moves = split(y), split(v)
        total = np.zeros(dims)
        for j, k in combinations(range(len(dims)), 2):
            parts = list(factors)
            parts[j], parts[k] = moves[j], moves[k]
            total += outer(parts)
        return (2.0 * total).reshape(-1)

    def generic(rng):
        return np.concatenate([rng.uniform(0.5, 2.0) * _unit_vector(rng, d) for d in dims])

    def nonzero_factors(y):
        return sum(np.linalg.norm(f) > REGIME_TOL for f in split(y))

    def two_to_one(y):
        # order two is lr with r = 1; from order three on the origin has L = Q = 0
        count = nonzero_factors(y)
        if count == len(dims) or len(dims) == 2:
            return True
        return False if count == 0 else None

    def local_to_local(y):
        if len(dims) > 2:
            return None
        return nonzero_factors(y) in (0, 2)

    return CatalogEntry(
        id=EntryId.CP_RANK1,
        params={"dims": list(dims)},
        lift=Lift(
            name=f"cp_rank1{dims}",
            manifold=ChartDomain(int(offsets[-1])),
            ambient_shape=dims,
            phi=lambda y: outer(split(y)).reshape(-1),
            dphi=dphi,
            d2phi=d2phi,
        ),
        set_desc=RankOneTensors(dims),
        regimes={"origin": lambda rng: np.zeros(int(offsets[-1])), "generic": generic},
        expected={
            Property.ONE_TO_ONE: lambda y: nonzero_factors(y) == len(dims),
            Property.TWO_TO_ONE: two_to_one,
            Property.LOCAL_TO_LOCAL: local_to_local,
        },
    )


# planar counterexamples


def _on_curve(t: float) -> np.ndarray:
    return np.array([t * t - 1.0, t ** 3 - t, t])


def nodal_cubic() -> CatalogEntry:
    """y -> (y_1, y_2) on {y_1 = y_3^2 - 1, y_2 = y_3^3 - y_3}, onto the nodal cubic."""
    manifold = Embedded(
        ambient=3,
        h=lambda y: np.array([y[0] - y[2] ** 2 + 1.0, y[1] - y[2] ** 3 + y[2]]),
        dh=lambda y: np.array([[1.0, 0.0, -2.0 * y[2]], [0.0, 1.0, 1.0 - 3.0 * y[2] ** 2]]),
        d2h=lambda y, v: np.array([-2.0 * v[2] ** 2, -6.0 * y[2] * v[2] ** 2]),
        rank=2,
        sampler=lambda rng: _on_curve(rng.uniform(-1.5, 1.5)),
        label="node blow-up",
    )

    def generic(rng):
        while True:
            t = rng.uniform(-1.5, 1.5)
            if min(abs(t - 1.0), abs(t + 1.0)) >= MIN_SEPARATION:
                return _on_curve(t)

    def away(y):
        return bool(np.linalg.norm(_flat(y)[:2]) > REGIME_TOL)

    return CatalogEntry(
        id=EntryId.NODAL_CUBIC,
        params={},
        lift=Lift(
            name="nodal_cubic",
            manifold=manifold,
            ambient_shape=(2,),
            phi=lambda y: _flat(y)[:2].copy(),
            dphi=lambda y, v: _flat(v)[:2].copy(),
            d2phi=lambda y, v: np.zeros(2),
        ),
        set_desc=NodalCubic(),
        regimes={"node": lambda rng: _on_curve(_signs(rng, 1)[0]), "generic": generic},
        expected={prop: away for prop in Property},
        pathology=pathology.nodal_sequence,
        fiber_distance=pathology.nodal_fiber_distance,
    )


def disk_quartic() -> CatalogEntry:
    """y -> (y_1, y_2) on {y_1^2 + y_2^2 + y_3^4 = 1}, onto the unit disk."""

    def at_height(height, rng):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        radius = np.sqrt(1.0 - height ** 4)
        return np.array([radius * np.cos(theta), radius * np.sin(theta), height])

    manifold = Embedded(
        ambient=3,
        h=lambda y: np.array([y[0] ** 2 + y[1] ** 2 + y[2] ** 4 - 1.0]),
        dh=lambda y: np.array([[2.0 * y[0], 2.0 * y[1], 4.0 * y[2] ** 3]]),
        d2h=lambda y, v: np.array([2.0 * v[0] ** 2 + 2.0 * v[1] ** 2 + 12.0 * y[2] ** 2 * v[2] ** 2]),
        rank=1,
        sampler=lambda rng: at_height(rng.uniform(-1.0, 1.0), rng),
        label="quartic sphere",
    )

    def inside(y):
        return bool(abs(_flat(y)[2]) > REGIME_TOL)

    return CatalogEntry(
        id=EntryId.DISK_QUARTIC,
        params={},
        lift=Lift(
            name="disk_quartic",
            manifold=manifold,
            ambient_shape=(2,),
            phi=lambda y: _flat(y)[:2].copy(),
            dphi=lambda y, v: _flat(v)[:2].copy(),
            d2phi=lambda y, v: np.zeros(2),
        ),
        set_desc=Disk(2),
        regimes={
            "boundary": lambda rng: at_height(0.0, rng),
            "interior": lambda rng: at_height(_signs(rng, 1)[0] * rng.uniform(0.3, 0.95), rng),
        },
        expected={
            Property.ONE_TO_ONE: inside,
            Property.TWO_TO_ONE: inside,
            Property.LOCAL_TO_LOCAL: _always(True),
        },
    )


BUILDERS = {
    EntryId.HADAMARD: hadamard,
    EntryId.HADPROD: hadprod,
    EntryId.EIGEN_SIMPLEX: eigen_simplex,
    EntryId.SQUARING: squaring,
    EntryId.BALL: ball,
    EntryId.ANNULUS: annulus,
    EntryId.PSD_LOWRANK: psd_lowrank,
    EntryId.BURER_MONTEIRO: burer_monteiro,
    EntryId.LR: lr,
    EntryId.DESING_CHART: desing_chart,
    EntryId.SVD: svd,
    EntryId.MSVD: msvd,
    EntryId.CP_RANK1: cp_rank1,
    EntryId.NODAL_CUBIC: nodal_cubic,
    EntryId.DISK_QUARTIC: disk_quartic,
}
