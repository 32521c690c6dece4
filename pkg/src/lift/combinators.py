from typing import Sequence

import numpy as np

from .models import ADecomposition, DegenerateDirection, Lift, SmoothMap, Submersion
from ..common.exceptions import InvalidInputException, NotSubmersionException
from ..common.logger import get_logger
from ..manifold.models import Embedded, Product
from ..manifold.service import tangent_basis
from ..numerics.service import numerical_rank

logger = get_logger(__name__)


def _flat(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


def compose_submersion(lift: Lift, psi: Submersion, name: str | None = None) -> Lift:
    """The lift phi o psi on psi's domain N.

    At each queried z the differential of psi restricted to T_zN must be onto T_{psi(z)}M.
    """
    if psi.map.out_dim != lift.manifold.ambient_dim:
        raise InvalidInputException(
            f"Submersion lands in R^{psi.map.out_dim}, lift expects R^{lift.manifold.ambient_dim}"
        )

    def phi(z):
        return lift.phi(psi.map(z))

    def dphi(z, v):
        return lift.dphi(psi.map(z), psi.map.derivative(z, v))

    def d2phi(z, v):
        y = psi.map(z)
        dy = psi.map.derivative(z, v)
        return _flat(lift.d2phi(y, dy)) + _flat(lift.dphi(y, psi.map.second_derivative(z, v)))

    def submersion_guard(z):
        y = psi.map(z)
        basis_n = tangent_basis(psi.domain, z)
        basis_m = tangent_basis(lift.manifold, y)
        pushed = np.column_stack([psi.map.derivative(z, basis_n[:, j]) for j in range(basis_n.shape[1])]) \
            if basis_n.shape[1] else np.zeros((y.size, 0))
        rank = numerical_rank(basis_m.T @ pushed) if basis_m.shape[1] else 0
        if rank != basis_m.shape[1]:
            logger.warning(f"{psi.map.name} has rank {rank} < {basis_m.shape[1]} at the queried point")
            raise NotSubmersionException(
                f"Differential of {psi.map.name} has rank {rank}, expected {basis_m.shape[1]}"
            )
        for guard in lift.guards:
            guard(y)

    return Lift(
        name=name or f"{lift.name}∘{psi.map.name}",
        manifold=psi.domain,
        ambient_shape=lift.ambient_shape,
        phi=phi,
        dphi=dphi,
        d2phi=d2phi,
        guards=(submersion_guard,),
        fd_derivatives=lift.fd_derivatives or psi.map.uses_finite_differences,
    )


def product(lifts: Sequence[Lift], name: str | None = None) -> Lift:
    """Cartesian product of lifts acting factor-wise on the product manifold."""
    lifts = tuple(lifts)
    if not lifts:
        raise InvalidInputException("product needs at least one lift")
    if len(lifts) == 1:
        return lifts[0]
    manifold = Product(tuple(f.manifold for f in lifts))
    out_offsets = np.cumsum([0] + [f.ambient_dim for f in lifts])

    def split_out(x):
        x = _flat(x)
        return [x[a:b] for a, b in zip(out_offsets[:-1], out_offsets[1:])]

    def phi(y):
        return np.concatenate([_flat(f.phi(p)) for f, p in zip(lifts, manifold.split(_flat(y)))])

    def dphi(y, v):
        y, v = _flat(y), _flat(v)
        return np.concatenate([
            _flat(f.dphi(p, q)) for f, p, q in zip(lifts, manifold.split(y), manifold.split(v))
        ])

    def d2phi(y, v):
        y, v = _flat(y), _flat(v)
        return np.concatenate([
            _flat(f.d2phi(p, q)) for f, p, q in zip(lifts, manifold.split(y), manifold.split(v))
        ])

    def guards_all(y):
        for f, p in zip(lifts, manifold.split(_flat(y))):
            for guard in f.guards:
                guard(p)

    decomposer = None
    if all(f.a_set_decomposer is not None for f in lifts):
        def decomposer(y, d):
            parts = [
                f.a_set_decomposer(p, q)
                for f, p, q in zip(lifts, manifold.split(_flat(y)), split_out(d))
            ]
            if any(part.contains is False for part in parts):
                return ADecomposition(contains=False)
            if any(part.contains is None for part in parts):
                return ADecomposition(contains=None)
            return ADecomposition(contains=True, v=np.concatenate([_flat(part.v) for part in parts]))

    family = None
    if any(f.degenerate_family is not None for f in lifts):
        def family(y):
            points = manifold.split(_flat(y))
            directions = []
            for k, (f, p) in enumerate(zip(lifts, points)):
                if f.degenerate_family is None:
                    continue
                for item in f.degenerate_family(p):
                    directions.append(_embed_direction(item, k, manifold, out_offsets))
            return directions

    return Lift(
        name=name or " x ".join(f.name for f in lifts),
        manifold=manifold,
        ambient_shape=(int(out_offsets[-1]),),
        phi=phi,
        dphi=dphi,
        d2phi=d2phi,
        guards=(guards_all,),
        a_set_decomposer=decomposer,
        degenerate_family=family,
        fd_derivatives=any(f.fd_derivatives for f in lifts),
    )


def _embed_direction(item: DegenerateDirection, k: int, manifold: Product, out_offsets) -> DegenerateDirection:
    start, stop = manifold.offsets[k], manifold.offsets[k + 1]
    out_start, out_stop = int(out_offsets[k]), int(out_offsets[k + 1])

    def direction(i):
        v = np.zeros(manifold.ambient_dim)
        v[start:stop] = item.direction(i)
        return v

    target = np.zeros(int(out_offsets[-1]))
    target[out_start:out_stop] = item.target
    return DegenerateDirection(direction=direction, target=target, label=f"factor {k}: {item.label}")


def fiber_product(F: SmoothMap, psi: Lift, name: str = "fiber_product",
                  ambient_shape: tuple[int, ...] | None = None,
                  sampler=None) -> Lift:
    """Lift of F^{-1}(Z) from M = {(x, y) : F(x) = psi(y), y in N}, mapping (x, y) to x."""
    n = F.in_dim
    base = psi.manifold
    if F.out_dim != psi.ambient_dim:
        raise InvalidInputException(
            f"F lands in R^{F.out_dim} but psi lands in R^{psi.ambient_dim}"
        )

    def split(z):
        z = _flat(z)
        return z[:n], z[n:]

    def psi_jacobian(y):
        eye = np.eye(base.ambient_dim)
        cols = [_flat(psi.dphi(y, eye[:, j])) for j in range(base.ambient_dim)]
        return np.column_stack(cols) if cols else np.zeros((psi.ambient_dim, 0))

    def h(z):
        x, y = split(z)
        return np.concatenate([F(x) - _flat(psi.phi(y)), base.constraint(y)])

    def dh(z):
        x, y = split(z)
        jac_n = base.constraint_jacobian(y)
        top = np.hstack([F.jacobian(x), -psi_jacobian(y)])
        bottom = np.hstack([np.zeros((jac_n.shape[0], n)), jac_n])
        return np.vstack([top, bottom])

    def d2h(z, v):
        x, y = split(z)
        dx, dy = split(v)
        return np.concatenate([
            F.second_derivative(x, dx) - _flat(psi.d2phi(y, dy)),
            base.constraint_curvature(y, dy),
        ])

    manifold = Embedded(
        ambient=n + base.ambient_dim,
        h=h,
        dh=dh,
        d2h=d2h,
        rank=F.out_dim + base.codim,
        sampler=sampler,
        label=name,
    )

    def phi(z):
        return split(z)[0].copy()

    def dphi(z, v):
        return split(v)[0].copy()

    def d2phi(z, v):
        return np.zeros(n)

    def base_guards(z):
        _, y = split(z)
        for guard in psi.guards:
            guard(y)

    return Lift(
        name=name,
        manifold=manifold,
        ambient_shape=ambient_shape or (n,),
        phi=phi,
        dphi=dphi,
        d2phi=d2phi,
        guards=(base_guards,),
        fd_derivatives=F.uses_finite_differences or psi.fd_derivatives,
    )
