from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constants import ManifoldKind
from ..numerics.service import as_generator, random_stiefel


class ManifoldDesc(ABC):
    """A manifold embedded in R^ambient_dim as the zero set of h, with Dh of constant rank codim."""

    kind: ManifoldKind

    @property
    @abstractmethod
    def ambient_dim(self) -> int:
        ...

    @property
    @abstractmethod
    def codim(self) -> int:
        ...

    @property
    def dim(self) -> int:
        return self.ambient_dim - self.codim

    @abstractmethod
    def constraint(self, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def constraint_jacobian(self, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def constraint_curvature(self, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        """D^2 h(y)[v, v]."""

    def closest_point(self, z: np.ndarray) -> np.ndarray | None:
        return None

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        return None


@dataclass(frozen=True)
class ChartDomain(ManifoldDesc):
    dimension: int
    kind = ManifoldKind.CHART

    @property
    def ambient_dim(self) -> int:
        return self.dimension

    @property
    def codim(self) -> int:
        return 0

    def constraint(self, y):
        return np.zeros(0)

    def constraint_jacobian(self, y):
        return np.zeros((0, self.dimension))

    def constraint_curvature(self, y, v):
        return np.zeros(0)

    def closest_point(self, z):
        return np.asarray(z, dtype=float).copy()

    def sample(self, rng):
        return as_generator(rng).standard_normal(self.dimension)


@dataclass(frozen=True)
class Sphere(ManifoldDesc):
    """Unit sphere S^n in R^(n+1)."""

    n: int
    kind = ManifoldKind.SPHERE

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    @property
    def codim(self) -> int:
        return 1

    def constraint(self, y):
        return np.array([y @ y - 1.0])

    def constraint_jacobian(self, y):
        return 2.0 * y.reshape(1, -1)

    def constraint_curvature(self, y, v):
        return np.array([2.0 * (v @ v)])

    def closest_point(self, z):
        norm = np.linalg.norm(z)
        if norm == 0.0:
            return None
        return z / norm

    def sample(self, rng):
        z = as_generator(rng).standard_normal(self.ambient_dim)
        return z / np.linalg.norm(z)


@dataclass(frozen=True)
class Stiefel(ManifoldDesc):
    """m-by-r matrices with orthonormal columns, flattened row-major.

    h(U) collects the upper triangle (diagonal included) of U^T U - I.
    """

    m: int
    r: int
    kind = ManifoldKind.STIEFEL

    @property
    def ambient_dim(self) -> int:
        return self.m * self.r

    @property
    def codim(self) -> int:
        return self.r * (self.r + 1) // 2

    def _unflatten(self, y):
        return np.asarray(y, dtype=float).reshape(self.m, self.r)

    def constraint(self, y):
        u = self._unflatten(y)
        return (u.T @ u - np.eye(self.r))[np.triu_indices(self.r)]

    def constraint_jacobian(self, y):
        u = self._unflatten(y)
        rows, cols = np.triu_indices(self.r)
        jac = np.zeros((rows.size, self.ambient_dim))
        for k, (i, j) in enumerate(zip(rows, cols)):
            grad = np.zeros((self.m, self.r))
            grad[:, j] += u[:, i]
            grad[:, i] += u[:, j]
            jac[k] = grad.reshape(-1)
        return jac

    def constraint_curvature(self, y, v):
        dv = self._unflatten(v)
        return (2.0 * dv.T @ dv)[np.triu_indices(self.r)]

    def closest_point(self, z):
        u, _, vt = np.linalg.svd(self._unflatten(z), full_matrices=False)
        return (u @ vt).reshape(-1)

    def sample(self, rng):
        return random_stiefel(self.m, self.r, rng).reshape(-1)


@dataclass(frozen=True, eq=False)
class Embedded(ManifoldDesc):
    """Zero set of a user-supplied defining function with value/Jacobian/curvature oracles."""

    ambient: int
    h: Callable[[np.ndarray], np.ndarray]
    dh: Callable[[np.ndarray], np.ndarray]
    d2h: Callable[[np.ndarray, np.ndarray], np.ndarray]
    rank: int
    sampler: Callable[[np.random.Generator], np.ndarray] | None = None
    label: str = "embedded"
    kind = ManifoldKind.EMBEDDED

    @property
    def ambient_dim(self) -> int:
        return self.ambient

    @property
    def codim(self) -> int:
        return self.rank

    def constraint(self, y):
        return np.atleast_1d(np.asarray(self.h(y), dtype=float))

    def constraint_jacobian(self, y):
        return np.asarray(self.dh(y), dtype=float).reshape(-1, self.ambient)

    def constraint_curvature(self, y, v):
        return np.atleast_1d(np.asarray(self.d2h(y, v), dtype=float))

    def sample(self, rng):
        if self.sampler is None:
            return None
        return np.asarray(self.sampler(as_generator(rng)), dtype=float)


@dataclass(frozen=True, eq=False)
class Product(ManifoldDesc):
    factors: tuple[ManifoldDesc, ...]
    offsets: tuple[int, ...] = field(init=False)
    kind = ManifoldKind.PRODUCT

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        offsets = np.cumsum([0] + [f.ambient_dim for f in self.factors])
        object.__setattr__(self, "offsets", tuple(int(o) for o in offsets))

    @property
    def ambient_dim(self) -> int:
        return self.offsets[-1]

    @property
    def codim(self) -> int:
        return sum(f.codim for f in self.factors)

    def split(self, y: np.ndarray) -> list[np.ndarray]:
        return [y[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def constraint(self, y):
        parts = [f.constraint(p) for f, p in zip(self.factors, self.split(y))]
        return np.concatenate(parts) if parts else np.zeros(0)

    def constraint_jacobian(self, y):
        blocks = [f.constraint_jacobian(p) for f, p in zip(self.factors, self.split(y))]
        jac = np.zeros((sum(b.shape[0] for b in blocks), self.ambient_dim))
        row = 0
        for block, start, stop in zip(blocks, self.offsets[:-1], self.offsets[1:]):
            jac[row:row + block.shape[0], start:stop] = block
            row += block.shape[0]
        return jac

    def constraint_curvature(self, y, v):
        parts = [
            f.constraint_curvature(p, q)
            for f, p, q in zip(self.factors, self.split(y), self.split(v))
        ]
        return np.concatenate(parts) if parts else np.zeros(0)

    def sample(self, rng):
        rng = as_generator(rng)
        parts = [f.sample(rng) for f in self.factors]
        if any(p is None for p in parts):
            return None
        return np.concatenate(parts)
