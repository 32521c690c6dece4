from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constants import FEASIBILITY_TOL, SLICE_NEWTON_ITERS, SetKind
from .models import (
    BoundedRankCone,
    IntersectSlice,
    LineUnion,
    Polyhedral,
    ProductCone,
    PsdRankCone,
    RankOneTensorCone,
    Subspace,
    TangentCone,
    best_rank_one,
    outer,
)
from ..common.exceptions import InvalidInputException, SamplerExhaustedException
from ..common.logger import get_logger
from ..lift.models import SmoothMap
from ..numerics.schemas import TolerancePolicy
from ..numerics.service import (
    DEFAULT_POLICY,
    as_generator,
    kernel_basis,
    min_norm_solve,
    numerical_rank,
    orthogonal_complement,
    project_simplex,
    rank_threshold,
    svd,
)

logger = get_logger(__name__)


def _flat(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


def _step(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    g = rng.standard_normal(dim)
    return radius * rng.uniform(0.1, 1.0) * g / np.linalg.norm(g)


def _linear_cone(dim: int, equalities: np.ndarray, active: np.ndarray) -> TangentCone:
    if active.shape[0] == 0:
        return Subspace(kernel_basis(equalities) if equalities.shape[0] else np.eye(dim))
    return Polyhedral(dim=dim, equalities=equalities, inequalities=active)


def _psd_free_basis(u: np.ndarray, s: int) -> np.ndarray:
    """Orthonormal basis of symmetric matrices vanishing on the block of u[:, s:] against itself."""
    n = u.shape[0]
    columns = []
    for a in range(s):
        columns.append(np.outer(u[:, a], u[:, a]).reshape(-1))
        for b in range(a + 1, n):
            columns.append(((np.outer(u[:, a], u[:, b]) + np.outer(u[:, b], u[:, a])) / np.sqrt(2.0)).reshape(-1))
    return np.column_stack(columns) if columns else np.zeros((n * n, 0))


class SetDesc(ABC):
    """A closed constraint set X in R^ambient_dim with a closed-form tangent cone."""

    kind: SetKind

    @property
    @abstractmethod
    def ambient_dim(self) -> int:
        ...

    @abstractmethod
    def residual(self, x: np.ndarray) -> float:
        """Violation of the defining relations; zero on X."""

    @abstractmethod
    def tangent_cone(self, x: np.ndarray, policy: TolerancePolicy) -> TangentCone:
        ...

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> np.ndarray:
        ...

    @abstractmethod
    def sample_near(self, x: np.ndarray, radius: float, rng: np.random.Generator) -> np.ndarray | None:
        """A point of X within roughly radius of x, or None when the draw failed."""

    def is_feasible(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = _flat(x)
        return self.residual(x) <= tol * max(1.0, float(np.linalg.norm(x)))


@dataclass(frozen=True)
class Simplex(SetDesc):
    n: int
    kind = SetKind.SIMPLEX

    @property
    def ambient_dim(self) -> int:
        return self.n

    def residual(self, x):
        return max(abs(float(np.sum(x)) - 1.0), float(np.max(-x)), 0.0)

    def tangent_cone(self, x, policy):
        active = np.eye(self.n)[x <= policy.zero_tol]
        return _linear_cone(self.n, np.ones((1, self.n)), active)

    def sample(self, rng):
        return as_generator(rng).dirichlet(np.ones(self.n))

    def sample_near(self, x, radius, rng):
        return project_simplex(x + _step(rng, self.n, radius))


@dataclass(frozen=True)
class StochasticMatrices(SetDesc):
    """n-by-m column-stochastic matrices stored column after column."""

    n: int
    m: int
    kind = SetKind.STOCHASTIC_MATRICES

    @property
    def ambient_dim(self) -> int:
        return self.n * self.m

    def _columns(self, x):
        return x.reshape(self.m, self.n)

    def residual(self, x):
        cols = self._columns(x)
        return max(float(np.max(np.abs(cols.sum(axis=1) - 1.0))), float(np.max(-x)), 0.0)

    def tangent_cone(self, x, policy):
        equalities = np.kron(np.eye(self.m), np.ones((1, self.n)))
        active = np.eye(self.ambient_dim)[x <= policy.zero_tol]
        return _linear_cone(self.ambient_dim, equalities, active)

    def sample(self, rng):
        rng = as_generator(rng)
        return np.concatenate([rng.dirichlet(np.ones(self.n)) for _ in range(self.m)])

    def sample_near(self, x, radius, rng):
        moved = self._columns(x + _step(rng, self.ambient_dim, radius))
        return np.concatenate([project_simplex(col) for col in moved])


@dataclass(frozen=True)
class Orthant(SetDesc):
    n: int
    kind = SetKind.ORTHANT

    @property
    def ambient_dim(self) -> int:
        return self.n

    def residual(self, x):
        return max(float(np.max(-x)), 0.0)

    def tangent_cone(self, x, policy):
        return _linear_cone(self.n, np.zeros((0, self.n)), np.eye(self.n)[x <= policy.zero_tol])

    def sample(self, rng):
        return np.abs(as_generator(rng).standard_normal(self.n))

    def sample_near(self, x, radius, rng):
        return np.maximum(x + _step(rng, self.n, radius), 0.0)


@dataclass(frozen=True)
class Ball(SetDesc):
    """Closed unit ball in R^n."""

    n: int
    kind = SetKind.BALL

    @property
    def ambient_dim(self) -> int:
        return self.n

    def residual(self, x):
        return max(float(x @ x) - 1.0, 0.0)

    def tangent_cone(self, x, policy):
        if abs(1.0 - float(x @ x)) > policy.zero_tol:
            return Subspace(np.eye(self.n))
        return Polyhedral(dim=self.n, equalities=np.zeros((0, self.n)), inequalities=-x.reshape(1, -1))

    def sample(self, rng):
        rng = as_generator(rng)
        g = rng.standard_normal(self.n)
        return g / np.linalg.norm(g) * rng.uniform() ** (1.0 / self.n)

    def sample_near(self, x, radius, rng):
        z = x + _step(rng, self.n, radius)
        return z / max(1.0, float(np.linalg.norm(z)))


@dataclass(frozen=True)
class Disk(Ball):
    kind = SetKind.DISK


@dataclass(frozen=True)
class Annulus(SetDesc):
    n: int
    r1: float
    r2: float
    kind = SetKind.ANNULUS

    def __post_init__(self):
        if not 0.0 < self.r1 < self.r2:
            raise InvalidInputException(f"Annulus needs 0 < r1 < r2, got {self.r1}, {self.r2}")

    @property
    def ambient_dim(self) -> int:
        return self.n

    def residual(self, x):
        sq = float(x @ x)
        return max(self.r1 ** 2 - sq, sq - self.r2 ** 2, 0.0)

    def tangent_cone(self, x, policy):
        sq = float(x @ x)
        if abs(sq - self.r1 ** 2) <= policy.zero_tol:
            active = x.reshape(1, -1)
        elif abs(sq - self.r2 ** 2) <= policy.zero_tol:
            active = -x.reshape(1, -1)
        else:
            return Subspace(np.eye(self.n))
        return Polyhedral(dim=self.n, equalities=np.zeros((0, self.n)), inequalities=active)

    def sample(self, rng):
        rng = as_generator(rng)
        g = rng.standard_normal(self.n)
        return g / np.linalg.norm(g) * rng.uniform(self.r1, self.r2)

    def sample_near(self, x, radius, rng):
        z = x + _step(rng, self.n, radius / 2)
        norm = float(np.linalg.norm(z))
        return z * min(max(norm, self.r1), self.r2) / norm


@dataclass(frozen=True)
class BoundedRank(SetDesc):
    """m-by-n matrices of rank at most r, flattened row-major."""

    m: int
    n: int
    r: int
    kind = SetKind.BOUNDED_RANK

    @property
    def ambient_dim(self) -> int:
        return self.m * self.n

    def residual(self, x):
        sv = np.linalg.svd(x.reshape(self.m, self.n), compute_uv=False)
        return float(sv[self.r]) if sv.size > self.r else 0.0

    def tangent_cone(self, x, policy):
        u, sv, v = svd(x.reshape(self.m, self.n), full_matrices=True)
        s = int(np.sum(sv > rank_threshold(sv, (self.m, self.n), policy)))
        if s < self.r:
            return BoundedRankCone(m=self.m, n=self.n, u=u, v=v, s=s, r=self.r)
        columns = [
            np.outer(u[:, a], v[:, b]).reshape(-1)
            for a in range(self.m) for b in range(self.n) if a < s or b < s
        ]
        return Subspace(np.column_stack(columns))

    def sample(self, rng):
        rng = as_generator(rng)
        return (rng.standard_normal((self.m, self.r)) @ rng.standard_normal((self.r, self.n))).reshape(-1)

    def sample_near(self, x, radius, rng):
        z = (x + _step(rng, self.ambient_dim, radius / 2)).reshape(self.m, self.n)
        u, sv, v = svd(z)
        return ((u[:, :self.r] * sv[:self.r]) @ v[:, :self.r].T).reshape(-1)


def _psd_factor(x: np.ndarray, n: int, r: int) -> np.ndarray:
    """An n-by-r factor R with R R^T equal to the PSD part of x truncated to rank r."""
    mat = x.reshape(n, n)
    eig, vec = np.linalg.eigh(0.5 * (mat + mat.T))
    eig, vec = eig[::-1][:r], vec[:, ::-1][:, :r]
    return vec * np.sqrt(np.maximum(eig, 0.0))


@dataclass(frozen=True)
class PsdBoundedRank(SetDesc):
    n: int
    r: int
    kind = SetKind.PSD_BOUNDED_RANK

    @property
    def ambient_dim(self) -> int:
        return self.n * self.n

    def residual(self, x):
        mat = x.reshape(self.n, self.n)
        eig = np.linalg.eigvalsh(0.5 * (mat + mat.T))[::-1]
        rank_excess = float(eig[self.r]) if eig.size > self.r else 0.0
        return max(float(np.linalg.norm(mat - mat.T)) / 2, -float(eig[-1]), abs(rank_excess), 0.0)

    def eigen_split(self, x, policy: TolerancePolicy) -> tuple[np.ndarray, int]:
        mat = x.reshape(self.n, self.n)
        eig, vec = np.linalg.eigh(0.5 * (mat + mat.T))
        eig, vec = eig[::-1], vec[:, ::-1]
        s = int(np.sum(eig > rank_threshold(np.sort(np.abs(eig))[::-1], (self.n, self.n), policy)))
        return vec, s

    def tangent_cone(self, x, policy):
        u, s = self.eigen_split(x, policy)
        if s < self.r:
            return PsdRankCone(n=self.n, u=u, s=s, r=self.r)
        return Subspace(_psd_free_basis(u, s))

    def sample(self, rng):
        factor = as_generator(rng).standard_normal((self.n, self.r))
        return (factor @ factor.T).reshape(-1)

    def sample_near(self, x, radius, rng):
        factor = _psd_factor(x, self.n, self.r)
        scale = radius / (2.0 * (float(np.linalg.norm(factor)) + 1.0))
        moved = factor + _step(rng, factor.size, scale).reshape(factor.shape)
        return (moved @ moved.T).reshape(-1)


@dataclass(frozen=True, eq=False)
class SmoothSdpSlice(SetDesc):
    """{X PSD, rank(X) <= r, <A_i, X> = b_i}; anchor is a feasible n-by-r factor."""

    a_list: np.ndarray
    b: np.ndarray
    n: int
    r: int
    anchor: np.ndarray
    kind = SetKind.SMOOTH_SDP_SLICE

    @property
    def ambient_dim(self) -> int:
        return self.n * self.n

    @property
    def constraints(self) -> np.ndarray:
        return self.a_list.reshape(len(self.a_list), -1)

    @property
    def psd_part(self) -> PsdBoundedRank:
        return PsdBoundedRank(self.n, self.r)

    def residual(self, x):
        linear = float(np.max(np.abs(self.constraints @ x - self.b))) if len(self.b) else 0.0
        return max(self.psd_part.residual(x), linear)

    def tangent_cone(self, x, policy):
        u, s = self.psd_part.eigen_split(x, policy)
        free = _psd_free_basis(u, s)
        if s == self.r:
            return Subspace(free @ kernel_basis(self.constraints @ free, policy))
        base = PsdRankCone(n=self.n, u=u, s=s, r=self.r)
        return IntersectSlice(base=base, constraints=self.constraints, free_basis=free)

    def restore(self, factor: np.ndarray) -> np.ndarray | None:
        """Gauss-Newton on the factor until <A_i, R R^T> = b_i; None if it stalls."""
        for _ in range(SLICE_NEWTON_ITERS):
            res = np.array([np.sum(a * (factor @ factor.T)) for a in self.a_list]) - self.b
            if np.linalg.norm(res) <= 1e-13 * max(1.0, float(np.sum(factor ** 2))):
                return factor
            jac = np.stack([(2.0 * a @ factor).reshape(-1) for a in self.a_list])
            factor = factor - min_norm_solve(jac, res).reshape(factor.shape)
        logger.debug("Slice restoration stalled")
        return None

    def sample(self, rng):
        rng = as_generator(rng)
        for _ in range(20):
            factor = self.restore(self.anchor + 0.5 * rng.standard_normal(self.anchor.shape))
            if factor is not None:
                return (factor @ factor.T).reshape(-1)
        raise SamplerExhaustedException("Could not restore a feasible point of the SDP slice")

    def sample_near(self, x, radius, rng):
        factor = _psd_factor(x, self.n, self.r)
        scale = radius / (4.0 * (float(np.linalg.norm(factor)) + 1.0))
        moved = self.restore(factor + _step(rng, factor.size, scale).reshape(factor.shape))
        return None if moved is None else (moved @ moved.T).reshape(-1)


@dataclass(frozen=True)
class NodalCubic(SetDesc):
    """{x in R^2 : x_2^2 = x_1^2 (x_1 + 1)}, parametrized by t -> (t^2 - 1, t^3 - t)."""

    kind = SetKind.NODAL_CUBIC

    @property
    def ambient_dim(self) -> int:
        return 2

    @staticmethod
    def at(t: float) -> np.ndarray:
        return np.array([t * t - 1.0, t ** 3 - t])

    def residual(self, x):
        return abs(x[1] ** 2 - x[0] ** 2 * (x[0] + 1.0))

    def tangent_cone(self, x, policy):
        if np.linalg.norm(x) <= policy.zero_tol:
            return LineUnion(np.array([[1.0, 1.0], [1.0, -1.0]]).T / np.sqrt(2.0))
        tangent = np.array([2.0 * x[1], 3.0 * x[0] ** 2 + 2.0 * x[0]])
        return Subspace((tangent / np.linalg.norm(tangent)).reshape(2, 1))

    def sample(self, rng):
        return self.at(as_generator(rng).uniform(-1.5, 1.5))

    def sample_near(self, x, radius, rng):
        if np.linalg.norm(x) <= DEFAULT_POLICY.zero_tol:
            t0 = 1.0 if rng.random() < 0.5 else -1.0
        elif abs(x[0]) > 1e-12:
            t0 = x[1] / x[0]
        else:
            t0 = 0.0
        speed = float(np.hypot(2 * t0, 3 * t0 * t0 - 1.0))
        return self.at(t0 + rng.uniform(-1.0, 1.0) * radius / (2.0 * (speed + 1.0)))


@dataclass(frozen=True)
class RankOneTensors(SetDesc):
    dims: tuple[int, ...]
    kind = SetKind.RANK_ONE_TENSORS

    @property
    def ambient_dim(self) -> int:
        return int(np.prod(self.dims))

    def factors(self, x) -> list[np.ndarray]:
        sigma, units = best_rank_one(x.reshape(self.dims))
        scale = sigma ** (1.0 / len(self.dims))
        return [scale * f for f in units]

    def residual(self, x):
        sigma, _ = best_rank_one(x.reshape(self.dims))
        return float(np.sqrt(max(float(x @ x) - sigma ** 2, 0.0)))

    def tangent_cone(self, x, policy):
        if np.linalg.norm(x) <= policy.zero_tol:
            return RankOneTensorCone(self.dims)
        factors = self.factors(x)
        columns = []
        for k, d in enumerate(self.dims):
            for j in range(d):
                moved = list(factors)
                moved[k] = np.eye(d)[j]
                columns.append(outer(moved).reshape(-1))
        u, sv, _ = svd(np.column_stack(columns))
        keep = sv > rank_threshold(sv, (self.ambient_dim, len(columns)), policy)
        return Subspace(u[:, keep])

    def sample(self, rng):
        rng = as_generator(rng)
        return outer([rng.standard_normal(d) for d in self.dims]).reshape(-1)

    def sample_near(self, x, radius, rng):
        if np.linalg.norm(x) <= DEFAULT_POLICY.zero_tol:
            size = (radius * rng.uniform(0.1, 1.0)) ** (1.0 / len(self.dims))
            parts = [rng.standard_normal(d) for d in self.dims]
            return outer([size * p / np.linalg.norm(p) for p in parts]).reshape(-1)
        factors = self.factors(x)
        scale = radius / (2.0 * len(self.dims) * (max(np.linalg.norm(f) for f in factors) ** 2 + 1.0))
        return outer([f + _step(rng, f.size, scale) for f in factors]).reshape(-1)


@dataclass(frozen=True, eq=False)
class ProductSet(SetDesc):
    parts: tuple[SetDesc, ...]
    offsets: tuple[int, ...] = field(init=False)
    kind = SetKind.PRODUCT

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        offsets = np.cumsum([0] + [p.ambient_dim for p in self.parts])
        object.__setattr__(self, "offsets", tuple(int(o) for o in offsets))

    @property
    def ambient_dim(self) -> int:
        return self.offsets[-1]

    def split(self, x) -> list[np.ndarray]:
        return [x[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def residual(self, x):
        return max((p.residual(q) for p, q in zip(self.parts, self.split(x))), default=0.0)

    def tangent_cone(self, x, policy):
        cones = [p.tangent_cone(q, policy) for p, q in zip(self.parts, self.split(x))]
        if all(isinstance(c, Subspace) for c in cones):
            basis = np.zeros((self.ambient_dim, sum(c.basis.shape[1] for c in cones)))
            col = 0
            for c, start, stop in zip(cones, self.offsets[:-1], self.offsets[1:]):
                basis[start:stop, col:col + c.basis.shape[1]] = c.basis
                col += c.basis.shape[1]
            return Subspace(basis)
        return ProductCone(tuple(cones))

    def sample(self, rng):
        rng = as_generator(rng)
        return np.concatenate([p.sample(rng) for p in self.parts])

    def sample_near(self, x, radius, rng):
        share = radius / np.sqrt(len(self.parts))
        pieces = [p.sample_near(q, share, rng) for p, q in zip(self.parts, self.split(x))]
        if any(piece is None for piece in pieces):
            return None
        return np.concatenate(pieces)


@dataclass(frozen=True, eq=False)
class Preimage(SetDesc):
    """{x : F(x) in base}, with the tangent cone pulled back through DF(x)."""

    F: SmoothMap
    base: SetDesc
    sampler: Callable[[np.random.Generator], np.ndarray] | None = None
    near_sampler: Callable[[np.ndarray, float, np.random.Generator], np.ndarray] | None = None
    kind = SetKind.PREIMAGE

    @property
    def ambient_dim(self) -> int:
        return self.F.in_dim

    def residual(self, x):
        return self.base.residual(self.F(x))

    def _require_qualification(self, rows: np.ndarray, jac: np.ndarray, policy: TolerancePolicy) -> None:
        """DF(x) must map onto the span of the active constraint normals."""
        if rows.shape[0] == 0:
            return
        expected = numerical_rank(rows, policy)
        pulled = numerical_rank(rows @ jac, policy)
        if pulled < expected:
            logger.warning(f"Constraint qualification fails for the preimage: rank {pulled} < {expected}")
            raise InvalidInputException(
                f"DF(x) is not onto the normal space of the base set (rank {pulled}, needed {expected})"
            )

    def tangent_cone(self, x, policy):
        jac = self.F.jacobian(x)
        cone = self.base.tangent_cone(self.F(x), policy)
        if isinstance(cone, Subspace):
            normal = orthogonal_complement(cone.basis, self.base.ambient_dim)
            if normal.shape[1] == 0:
                return Subspace(np.eye(self.ambient_dim))
            self._require_qualification(normal.T, jac, policy)
            return Subspace(kernel_basis(normal.T @ jac, policy))
        if isinstance(cone, Polyhedral):
            self._require_qualification(np.vstack([cone.equalities, cone.inequalities]), jac, policy)
            return _linear_cone(self.ambient_dim, cone.equalities @ jac, cone.inequalities @ jac)
        logger.warning(f"Cannot pull back a {cone.kind.value} cone")
        raise InvalidInputException(f"Only subspace and polyhedral cones pull back, got {cone.kind.value}")

    def sample(self, rng):
        if self.sampler is None:
            raise SamplerExhaustedException("Preimage set has no point sampler")
        return _flat(self.sampler(as_generator(rng)))

    def sample_near(self, x, radius, rng):
        if self.near_sampler is None:
            raise SamplerExhaustedException("Preimage set has no local sampler")
        return _flat(self.near_sampler(x, radius, rng))
