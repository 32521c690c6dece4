from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .constants import CostKind
from ..common.exceptions import InvalidInputException
from ..numerics.service import as_generator


def _flat(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class Cost:
    """A smooth downstairs cost f with gradient and Hessian-vector oracles."""

    kind: CostKind
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hess_vec: Callable[[np.ndarray, np.ndarray], np.ndarray]
    params: dict[str, Any] = field(default_factory=dict)

    def __call__(self, x) -> float:
        return float(self.value(_flat(x)))


def _symmetric(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputException(f"Expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def linear(w) -> Cost:
    w = _flat(w)
    return Cost(
        kind=CostKind.LINEAR,
        value=lambda x: float(w @ x),
        gradient=lambda x: w.copy(),
        hess_vec=lambda x, u: np.zeros_like(w),
        params={"w": w},
    )


def quadratic(a, b=None, c: float = 0.0) -> Cost:
    """f(x) = x^T A x / 2 + b^T x + c."""
    a = _symmetric(a)
    b = np.zeros(a.shape[0]) if b is None else _flat(b)
    return Cost(
        kind=CostKind.QUADRATIC,
        value=lambda x: float(0.5 * x @ a @ x + b @ x + c),
        gradient=lambda x: a @ x + b,
        hess_vec=lambda x, u: a @ u,
        params={"a": a, "b": b, "c": c},
    )


def quadratic_quartic(a, b=None, weight: float = 1.0) -> Cost:
    """f(x) = x^T A x / 2 + b^T x + weight |x|^4 / 4."""
    a = _symmetric(a)
    b = np.zeros(a.shape[0]) if b is None else _flat(b)

    def hess_vec(x, u):
        return a @ u + weight * ((x @ x) * u + 2.0 * (x @ u) * x)

    return Cost(
        kind=CostKind.QUADRATIC_QUARTIC,
        value=lambda x: float(0.5 * x @ a @ x + b @ x + 0.25 * weight * (x @ x) ** 2),
        gradient=lambda x: a @ x + b + weight * (x @ x) * x,
        hess_vec=hess_vec,
        params={"a": a, "b": b, "weight": weight},
    )


def quadratic_shift(w, alpha: float, center) -> Cost:
    """f(x) = <w, x> + alpha/2 |x - center|^2."""
    w, center = _flat(w), _flat(center)
    if w.size != center.size:
        raise InvalidInputException(f"w has {w.size} entries but center has {center.size}")
    return Cost(
        kind=CostKind.QUADRATIC_SHIFT,
        value=lambda x: float(w @ x + 0.5 * alpha * np.sum((x - center) ** 2)),
        gradient=lambda x: w + alpha * (x - center),
        hess_vec=lambda x, u: alpha * u,
        params={"w": w, "alpha": alpha, "center": center},
    )


def constant(dim: int, c: float = 0.0) -> Cost:
    return Cost(
        kind=CostKind.CONSTANT,
        value=lambda x: float(c),
        gradient=lambda x: np.zeros(dim),
        hess_vec=lambda x, u: np.zeros(dim),
        params={"c": c},
    )


def random_convex_quadratic(dim: int, seed=0) -> Cost:
    rng = as_generator(seed)
    g = rng.standard_normal((dim, dim))
    return quadratic(g @ g.T / dim + 0.1 * np.eye(dim), rng.standard_normal(dim))


def random_quadratic_quartic(dim: int, seed=0) -> Cost:
    rng = as_generator(seed)
    g = rng.standard_normal((dim, dim))
    return quadratic_quartic(0.5 * (g + g.T), rng.standard_normal(dim), weight=rng.uniform(0.1, 1.0))
