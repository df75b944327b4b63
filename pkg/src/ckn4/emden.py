"""Change of variables r = s^q between the weighted and effective problems.

With q = 2/(2-alpha) and M = 2(N-alpha)/(2-alpha), a radial function u of
r corresponds to v(s) = u(s^q) and the weighted Hessian seminorm becomes
q^{-3} times the unweighted one in effective dimension M; the critical
integrals match with a single factor q from the substitution.  Library
profiles map onto the closed bubble family exactly; generic functions are
composed with chain-rule derivatives.
"""

from __future__ import annotations

import numpy as np

from .calculus import RadialGrid, default_grid
from .forms import PowerForm
from .params import Params, normalization_constant
from .profiles import ProfileKind, RadialProfile

__all__ = [
    "to_sobolev",
    "from_sobolev",
    "sobolev_bubble",
    "norm_identity_check",
    "star_identity_check",
    "induced_sobolev_grid",
]


class ComposedRadial:
    """v(s) = u(s^q) (power > 0) with chain-rule derivatives up to order 2."""

    def __init__(self, u, power: float):
        self.u = u
        self.power = float(power)

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        return self.u.eval(s ** self.power)

    def __call__(self, s):
        return self.eval(s)

    def deriv(self, s, order: int = 1):
        s = np.asarray(s, dtype=float)
        q = self.power
        r = s ** q
        dr = q * s ** (q - 1.0)
        if order == 1:
            return self.u.deriv(r, 1) * dr
        if order == 2:
            d2r = q * (q - 1.0) * s ** (q - 2.0)
            return self.u.deriv(r, 2) * dr ** 2 + self.u.deriv(r, 1) * d2r
        raise ValueError("composed profiles support derivatives up to order 2")


def sobolev_bubble(p: Params, lam: float = 1.0, amplitude: float | None = None) -> RadialProfile:
    """Effective-side image of the extremal: C nu^{(M-4)/2} (1 + nu^2 s^2)^{-(M-4)/2}.

    The scale transforms as nu = lam^{1/q}.
    """
    A = normalization_constant(p) if amplitude is None else float(amplitude)
    nu = lam ** (1.0 / p.q)
    coef = A * nu ** ((p.M - 4.0) / 2.0)
    form = PowerForm.single(2.0, nu ** 2, -(p.M - 4.0) / 2.0, coef=coef)
    return RadialProfile(params=p, kind=ProfileKind.CUSTOM, lam=lam, amplitude=A, form=form)


def to_sobolev(p: Params, u):
    """v(s) = u(s^q).  Extremal profiles map onto the closed bubble family."""
    if isinstance(u, RadialProfile) and u.kind in (ProfileKind.EXTREMAL_U, ProfileKind.EXTREMAL_V):
        return sobolev_bubble(p, u.lam, amplitude=u.amplitude)
    return ComposedRadial(u, p.q)


def from_sobolev(p: Params, v):
    """u(r) = v(r^{1/q}), the inverse substitution."""
    return ComposedRadial(v, 1.0 / p.q)


def induced_sobolev_grid(p: Params, grid: RadialGrid) -> RadialGrid:
    """s-grid induced by s = r^{1/q} from a log-mapped r-grid."""
    q = p.q
    return RadialGrid(
        nodes=grid.nodes ** (1.0 / q),
        weights=grid.weights * grid.nodes ** (1.0 / q - 1.0) / q,
        map_kind=grid.map_kind,
        r_min=grid.r_min ** (1.0 / q),
        r_max=grid.r_max ** (1.0 / q),
    )


def _hess_integral(dim: float, weight_pow: float, u, grid: RadialGrid) -> float:
    """int r^weight_pow (u'' + (dim-1)u'/r)^2 r^{dim-1} dr with form corrections."""
    r = grid.nodes
    lap = u.deriv(r, 2) + (dim - 1.0) * u.deriv(r, 1) / r
    out = grid.integrate(r ** weight_pow * lap ** 2 * r ** (dim - 1.0))
    form = getattr(u, "form", None)
    if form is not None:
        f = form.radial_laplacian(dim)
        extra = weight_pow + dim - 1.0
        prod = f * f
        out += prod.head_integral(grid.r_min, extra) + prod.tail_integral(grid.r_max, extra)
    return out


def _abs_power_integral(p: Params, weight_pow: float, dim: float, u, grid: RadialGrid) -> float:
    """int r^weight_pow |u|^{p*} r^{dim-1} dr with form corrections."""
    r = grid.nodes
    out = grid.integrate(r ** weight_pow * np.abs(u.eval(r)) ** p.pstar * r ** (dim - 1.0))
    form = getattr(u, "form", None)
    if form is not None and len(form.terms) == 1:
        ((a, b, m), c) = next(iter(form.terms.items()))
        f = PowerForm(form.gamma, form.w, p.pstar * (form.e0 - m), {(0, 0, 0): abs(c) ** p.pstar})
        extra = p.pstar * (a * form.gamma - b) + weight_pow + dim - 1.0
        out += f.head_integral(grid.r_min, extra) + f.tail_integral(grid.r_max, extra)
    return out


def norm_identity_check(p: Params, u, grid: RadialGrid | None = None) -> tuple[float, float, float]:
    """Both sides of the Hessian-seminorm identity and their relative gap.

    lhs = int r^alpha (u'' + (N-1)u'/r)^2 r^{N-1} dr
    rhs = q^{-3} int (v'' + (M-1)v'/s)^2 s^{M-1} ds,  v(s) = u(s^q).
    """
    grid = grid or default_grid()
    lhs = _hess_integral(float(p.N), p.alpha, u, grid)
    v = to_sobolev(p, u)
    rhs = _hess_integral(p.M, 0.0, v, induced_sobolev_grid(p, grid)) / p.q ** 3
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    return lhs, rhs, rel


def star_identity_check(p: Params, u, grid: RadialGrid | None = None) -> tuple[float, float, float]:
    """Both sides of the critical-integral identity and their relative gap.

    lhs = int r^{-alpha} |u|^{p*} r^{N-1} dr
    rhs = q * int |v|^{2M/(M-4)} s^{M-1} ds,  v(s) = u(s^q).
    """
    grid = grid or default_grid()
    lhs = _abs_power_integral(p, -p.alpha, float(p.N), u, grid)
    v = to_sobolev(p, u)
    rhs = p.q * _abs_power_integral(p, 0.0, p.M, v, induced_sobolev_grid(p, grid))
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    return lhs, rhs, rel
