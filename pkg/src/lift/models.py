from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .constants import FD_STEP
from ..manifold.models import ManifoldDesc
from ..numerics.service import orthogonal_complement


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """A smooth map between Euclidean spaces given by value / directional-derivative oracles.

    Missing derivative oracles are replaced by central differences with step FD_STEP.
    """

    in_dim: int
    out_dim: int
    value: Callable[[np.ndarray], np.ndarray]
    jvp: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    hvp: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    name: str = "F"

    @property
    def uses_finite_differences(self) -> bool:
        return self.jvp is None or self.hvp is None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.value(x), dtype=float)).reshape(-1)

    def derivative(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.jvp is not None:
            return np.atleast_1d(np.asarray(self.jvp(x, v), dtype=float)).reshape(-1)
        return (self(x + FD_STEP * v) - self(x - FD_STEP * v)) / (2 * FD_STEP)

    def second_derivative(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.hvp is not None:
            return np.atleast_1d(np.asarray(self.hvp(x, v), dtype=float)).reshape(-1)
        return (self(x + FD_STEP * v) - 2 * self(x) + self(x - FD_STEP * v)) / FD_STEP ** 2

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        jac = np.zeros((self.out_dim, self.in_dim))
        for j in range(self.in_dim):
            e = np.zeros(self.in_dim)
            e[j] = 1.0
            jac[:, j] = self.derivative(x, e)
        return jac


@dataclass(frozen=True, eq=False)
class Submersion:
    domain: ManifoldDesc
    map: SmoothMap


@dataclass(frozen=True, eq=False)
class ADecomposition:
    """Outcome of a closed-form A-set decomposition d = Q(v) + L(u) with v in ker L.

    contains is None when the closed form does not apply at this point.
    """

    contains: bool | None
    v: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class DegenerateDirection:
    """A tangent sequence v_i with L(v_i) -> 0 at rate 1/i and Q(v_i) equal to target."""

    direction: Callable[[int], np.ndarray]
    target: np.ndarray
    label: str = ""


@dataclass(frozen=True, eq=False)
class Lift:
    name: str
    manifold: ManifoldDesc
    ambient_shape: tuple[int, ...]
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d2phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    guards: tuple[Callable[[np.ndarray], None], ...] = ()
    a_set_decomposer: Callable[[np.ndarray, np.ndarray], ADecomposition] | None = None
    degenerate_family: Callable[[np.ndarray], list[DegenerateDirection]] | None = None
    fd_derivatives: bool = False

    @property
    def ambient_dim(self) -> int:
        return int(np.prod(self.ambient_shape))


@dataclass(frozen=True, eq=False)
class LQData:
    y: np.ndarray
    x: np.ndarray
    basis: np.ndarray
    L: np.ndarray
    im_l_basis: np.ndarray
    ker_l_basis: np.ndarray

    @property
    def tangent_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def rank(self) -> int:
        return self.im_l_basis.shape[1]

    @cached_property
    def normal_basis(self) -> np.ndarray:
        """Orthonormal basis of (im L)^perp in the ambient space."""
        return orthogonal_complement(self.im_l_basis, self.x.size)

    @cached_property
    def ker_complement(self) -> np.ndarray:
        """Orthonormal basis of (ker L)^perp in tangent coordinates."""
        return orthogonal_complement(self.ker_l_basis, self.tangent_dim)

    def apply(self, coords: np.ndarray) -> np.ndarray:
        """L applied to tangent coordinates."""
        return self.L @ coords

    def lift_coords(self, coords: np.ndarray) -> np.ndarray:
        """Tangent coordinates to an ambient tangent vector on M."""
        return self.basis @ coords
