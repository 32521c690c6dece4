from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import nnls

from .constants import ConeKind, HOPM_ITERS, HOPM_RESTARTS, HOPM_TOL
from ..numerics.service import as_generator, kernel_basis, pinv


def _unit(v: np.ndarray) -> np.ndarray | None:
    norm = float(np.linalg.norm(v))
    if norm <= 1e-14:
        return None
    return v / norm


def _contract_except(tensor: np.ndarray, factors: list[np.ndarray], keep: int) -> np.ndarray:
    result = tensor
    for mode in reversed(range(tensor.ndim)):
        if mode != keep:
            result = np.tensordot(result, factors[mode], axes=([mode], [0]))
    return result


def best_rank_one(tensor: np.ndarray, seed=0) -> tuple[float, list[np.ndarray]]:
    """Spectral norm of a tensor and its maximizing unit factors by higher-order power iterations."""
    tensor = np.asarray(tensor, dtype=float)
    if tensor.ndim == 1:
        norm = float(np.linalg.norm(tensor))
        return norm, [tensor / norm if norm > 0 else tensor]
    rng = as_generator(seed)
    starts = [[
        np.linalg.svd(np.moveaxis(tensor, k, 0).reshape(tensor.shape[k], -1), full_matrices=False)[0][:, 0]
        for k in range(tensor.ndim)
    ]]
    for _ in range(HOPM_RESTARTS - 1):
        starts.append([_unit(rng.standard_normal(d)) for d in tensor.shape])
    best_sigma, best_factors = -1.0, starts[0]
    for factors in starts:
        factors = [f.copy() for f in factors]
        sigma = 0.0
        for _ in range(HOPM_ITERS):
            for k in range(tensor.ndim):
                g = _contract_except(tensor, factors, k)
                norm = float(np.linalg.norm(g))
                if norm == 0.0:
                    break
                factors[k] = g / norm
            new_sigma = abs(float(_contract_except(tensor, factors, 0) @ factors[0]))
            if abs(new_sigma - sigma) <= HOPM_TOL * max(1.0, new_sigma):
                sigma = new_sigma
                break
            sigma = new_sigma
        if sigma > best_sigma:
            best_sigma, best_factors = sigma, factors
    return max(best_sigma, 0.0), best_factors


def outer(factors: list[np.ndarray]) -> np.ndarray:
    result = np.asarray(factors[0], dtype=float)
    for f in factors[1:]:
        result = np.multiply.outer(result, f)
    return result


@dataclass(frozen=True, eq=False)
class Subspace:
    basis: np.ndarray
    kind = ConeKind.SUBSPACE

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def violation(self, v: np.ndarray) -> float:
        return float(np.linalg.norm(v - self.basis @ (self.basis.T @ v)))

    def gap(self, w: np.ndarray) -> float:
        return -float(np.linalg.norm(self.basis.T @ w))

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        if self.basis.shape[1] == 0:
            return None
        return _unit(self.basis @ rng.standard_normal(self.basis.shape[1]))


@dataclass(frozen=True, eq=False)
class Polyhedral:
    """{v : E v = 0, G v >= 0}."""

    dim: int
    equalities: np.ndarray
    inequalities: np.ndarray
    kind = ConeKind.POLYHEDRAL

    def violation(self, v: np.ndarray) -> float:
        eq = float(np.max(np.abs(self.equalities @ v))) if self.equalities.shape[0] else 0.0
        ineq = float(np.max(-(self.inequalities @ v))) if self.inequalities.shape[0] else 0.0
        return max(eq, ineq, 0.0)

    def project(self, z: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the cone, z minus its projection onto the polar cone."""
        polar = np.hstack([self.equalities.T, -self.equalities.T, -self.inequalities.T])
        if polar.shape[1] == 0:
            return z.copy()
        coef, _ = nnls(polar, z, maxiter=50 * polar.shape[1])
        return z - polar @ coef

    def gap(self, w: np.ndarray) -> float:
        return -float(np.linalg.norm(self.project(-w)))

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        for _ in range(20):
            v = _unit(self.project(rng.standard_normal(self.dim)))
            if v is not None:
                return v
        return None


@dataclass(frozen=True, eq=False)
class BoundedRankCone:
    """Tangent cone to m-by-n matrices of rank <= r at a point of rank s < r.

    u and v are full orthogonal factors; the first s columns span the column and row spaces.
    """

    m: int
    n: int
    u: np.ndarray
    v: np.ndarray
    s: int
    r: int
    kind = ConeKind.BOUNDED_RANK

    @property
    def dim(self) -> int:
        return self.m * self.n

    def _block(self, vec: np.ndarray) -> np.ndarray:
        return self.u[:, self.s:].T @ vec.reshape(self.m, self.n) @ self.v[:, self.s:]

    def violation(self, vec: np.ndarray) -> float:
        sv = np.linalg.svd(self._block(vec), compute_uv=False)
        budget = self.r - self.s
        return float(sv[budget]) if sv.size > budget else 0.0

    def gap(self, w: np.ndarray) -> float:
        block = self._block(w)
        free = max(float(w @ w) - float(np.sum(block ** 2)), 0.0)
        sv = np.linalg.svd(block, compute_uv=False)
        return -float(np.sqrt(free + np.sum(sv[:self.r - self.s] ** 2)))

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        u_perp, v_perp = self.u[:, self.s:], self.v[:, self.s:]
        g = rng.standard_normal((self.m, self.n))
        free = g - u_perp @ (u_perp.T @ g @ v_perp) @ v_perp.T
        budget = self.r - self.s
        block = rng.standard_normal((u_perp.shape[1], budget)) @ rng.standard_normal((budget, v_perp.shape[1]))
        return _unit((free + u_perp @ block @ v_perp.T).reshape(-1))


@dataclass(frozen=True, eq=False)
class PsdRankCone:
    """Tangent cone to n-by-n PSD matrices of rank <= r at a point of rank s < r.

    Members are symmetric V whose block on the kernel of X is PSD of rank <= r - s.
    """

    n: int
    u: np.ndarray
    s: int
    r: int
    kind = ConeKind.PSD_RANK

    @property
    def dim(self) -> int:
        return self.n * self.n

    def _blocks(self, vec: np.ndarray):
        mat = vec.reshape(self.n, self.n)
        sym = 0.5 * (mat + mat.T)
        u1, u_perp = self.u[:, :self.s], self.u[:, self.s:]
        return mat, u1.T @ sym @ u1, u1.T @ sym @ u_perp, u_perp.T @ sym @ u_perp

    def violation(self, vec: np.ndarray) -> float:
        mat, _, _, block = self._blocks(vec)
        skew = float(np.linalg.norm(0.5 * (mat - mat.T)))
        eig = np.linalg.eigvalsh(block) if block.size else np.zeros(0)
        negative = max(-float(eig[0]), 0.0) if eig.size else 0.0
        budget = self.r - self.s
        descending = eig[::-1]
        excess = max(float(descending[budget]), 0.0) if descending.size > budget else 0.0
        return max(skew, negative, excess)

    def gap(self, w: np.ndarray) -> float:
        _, m11, m12, block = self._blocks(w)
        eig = np.linalg.eigvalsh(block) if block.size else np.zeros(0)
        negative = np.minimum(eig, 0.0)[:self.r - self.s]
        return -float(np.sqrt(np.sum(m11 ** 2) + 2.0 * np.sum(m12 ** 2) + np.sum(negative ** 2)))

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        u_perp = self.u[:, self.s:]
        g = rng.standard_normal((self.n, self.n))
        g = 0.5 * (g + g.T)
        free = g - u_perp @ (u_perp.T @ g @ u_perp) @ u_perp.T
        c = rng.standard_normal((u_perp.shape[1], self.r - self.s))
        return _unit((free + u_perp @ c @ c.T @ u_perp.T).reshape(-1))


@dataclass(frozen=True, eq=False)
class LineUnion:
    """Union of the lines spanned by the unit columns of directions."""

    directions: np.ndarray
    kind = ConeKind.LINE_UNION

    @property
    def dim(self) -> int:
        return self.directions.shape[0]

    def violation(self, v: np.ndarray) -> float:
        coeffs = self.directions.T @ v
        return float(min(np.linalg.norm(v - self.directions[:, i] * coeffs[i]) for i in range(coeffs.size)))

    def gap(self, w: np.ndarray) -> float:
        return -float(np.max(np.abs(self.directions.T @ w)))

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        i = int(rng.integers(self.directions.shape[1]))
        return self.directions[:, i] * (1.0 if rng.random() < 0.5 else -1.0)


@dataclass(frozen=True, eq=False)
class RankOneTensorCone:
    """The cone of rank-one tensors, which is its own tangent cone at the origin."""

    dims: tuple[int, ...]
    kind = ConeKind.RANK_ONE_TENSOR

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def violation(self, v: np.ndarray) -> float:
        sigma, _ = best_rank_one(v.reshape(self.dims))
        return float(np.sqrt(max(float(v @ v) - sigma ** 2, 0.0)))

    def gap(self, w: np.ndarray) -> float:
        sigma, _ = best_rank_one(w.reshape(self.dims))
        return -sigma

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        return _unit(outer([rng.standard_normal(d) for d in self.dims]).reshape(-1))


@dataclass(frozen=True, eq=False)
class ProductCone:
    factors: tuple["TangentCone", ...]
    offsets: tuple[int, ...] = field(init=False)
    kind = ConeKind.PRODUCT

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        offsets = np.cumsum([0] + [f.dim for f in self.factors])
        object.__setattr__(self, "offsets", tuple(int(o) for o in offsets))

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    def split(self, v: np.ndarray) -> list[np.ndarray]:
        return [v[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def violation(self, v: np.ndarray) -> float:
        return max((f.violation(p) for f, p in zip(self.factors, self.split(v))), default=0.0)

    def gap(self, w: np.ndarray) -> float:
        gaps = [f.gap(p) for f, p in zip(self.factors, self.split(w))]
        return -float(np.sqrt(sum(g * g for g in gaps)))

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        parts = []
        for f in self.factors:
            piece = f.sample(rng)
            parts.append(np.zeros(f.dim) if piece is None else abs(rng.standard_normal()) * piece)
        return _unit(np.concatenate(parts))


@dataclass(frozen=True, eq=False)
class IntersectSlice:
    """base cone intersected with ker A; free_basis spans the linear part of base."""

    base: "TangentCone"
    constraints: np.ndarray
    free_basis: np.ndarray
    kind = ConeKind.INTERSECT_SLICE

    @property
    def dim(self) -> int:
        return self.base.dim

    def violation(self, v: np.ndarray) -> float:
        return max(self.base.violation(v), float(np.linalg.norm(self.constraints @ v)))

    def gap(self, w: np.ndarray) -> float:
        # <w - A^T mu, v> = <w, v> for v in ker A, so the base gap of the shifted w is a lower bound.
        a_s = self.constraints @ self.free_basis
        mu = pinv(a_s).T @ (self.free_basis.T @ w)
        return self.base.gap(w - self.constraints.T @ mu)

    def sample(self, rng: np.random.Generator) -> np.ndarray | None:
        a_s = self.constraints @ self.free_basis
        slice_basis = self.free_basis @ kernel_basis(a_s)
        c = self.base.sample(rng)
        if c is None:
            c = np.zeros(self.dim)
        c = c - self.free_basis @ (pinv(a_s) @ (self.constraints @ c))
        s = slice_basis @ rng.standard_normal(slice_basis.shape[1]) if slice_basis.shape[1] else 0.0
        return _unit(s + c)


TangentCone = Union[
    Subspace, Polyhedral, BoundedRankCone, PsdRankCone, LineUnion, RankOneTensorCone, ProductCone, IntersectSlice
]
