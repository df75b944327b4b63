"""Per-mode eigenproblem of the linearized equation.

After the substitution s = r^{1/q} the mode-k problem becomes, in the
effective dimension M,

    T_k(T_k X) = mu * (M-4)(M-2)M(M+2) (1 + s^2)^{-4} X,
    T_k X = X'' + (M-1) X'/s - lambda_k q^2 X / s^2,

with mu normalized so the extremal itself sits at mu = 1.  The problem is
discretized in weak form: trial space s^{sigma0} (1+s^2)^{1-delta} P_j(t),
t = (s^2-1)/(s^2+1), where sigma0 and the decay power are the indicial
exponents of T_k at zero and infinity.  Both closed-form eigenfunctions of
the continuum problem lie in the span exactly, the stiffness matrix needs
only second derivatives, and the discrete pencil is symmetric by
construction.  Quadrature is composite Gauss-Legendre in ln s, dense where
the mapped Legendre polynomials oscillate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .errors import EigensolveFailure, GridTooCoarse, InconsistentKernel
from .params import (
    Params,
    even_alpha_info,
    mode_lambda,
    normalization_constant,
    sphere_area,
)
from .profiles import RadialProfile

__all__ = [
    "SGrid",
    "ModeBasis",
    "ModeProblem",
    "SpectrumResult",
    "assemble_mode_problem",
    "mode_eigenvalues",
    "verify_kernel",
    "kernel_residual",
    "mu3_estimate",
    "SobolevModeFunction",
    "RadialModeFunction",
]


@dataclass(frozen=True)
class SGrid:
    """Composite Gauss-Legendre rule in u = ln s for int_0^inf f(s) ds."""

    u: np.ndarray
    s: np.ndarray
    w: np.ndarray          # weights including ds = s du
    u_min: float
    u_max: float

    @classmethod
    def build(cls, m: int, M: float | None = None, u_min: float | None = None,
              u_max: float | None = None, panel_pts: int = 64) -> "SGrid":
        # stiffness integrands decay like s^{3-M}: the window must widen as
        # M approaches 4 and may shrink for large effective dimensions
        if u_max is None:
            u_max = 60.0 if M is None else float(np.clip(34.0 / (M - 4.0), 12.0, 150.0))
        if u_min is None:
            u_min = -40.0 if M is None else -max(12.0, min(40.0, 170.0 / M))
        hc = min(0.25, 24.0 / max(m, 64))
        zones = [
            (u_min, -12.0, 1.0),
            (-12.0, -8.0, 0.25),
            (-8.0, 8.0, hc),
            (8.0, 12.0, 0.25),
            (12.0, u_max, 1.0),
        ]
        zones = [(a, b, h) for a, b, h in zones if b > a]
        x, wref = roots_legendre(panel_pts)
        us, ws = [], []
        for a, b, h in zones:
            npan = max(1, int(math.ceil((b - a) / h)))
            edges = np.linspace(a, b, npan + 1)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * (edges[1:] - edges[:-1])
            us.append((mid[:, None] + half[:, None] * x[None, :]).ravel())
            ws.append((half[:, None] * wref[None, :]).ravel())
        u = np.concatenate(us)
        w = np.concatenate(ws)
        s = np.exp(u)
        return cls(u=u, s=s, w=w * s, u_min=u_min, u_max=u_max)

    @property
    def n(self) -> int:
        return self.s.size


class ModeBasis:
    """Decay-adapted trial functions for one mode."""

    def __init__(self, M: float, nu_coeff: float, m: int):
        self.M = float(M)
        self.nu_coeff = float(nu_coeff)           # lambda_k q^2
        self.m = int(m)
        self.delta = math.sqrt(((M - 2.0) / 2.0) ** 2 + nu_coeff)
        self.sigma0 = self.delta - (M - 2.0) / 2.0

    def _legendre(self, t: np.ndarray, orders: int = 2):
        m, n = self.m, t.size
        P = np.empty((m, n))
        dP = np.empty((m, n)) if orders >= 1 else None
        d2P = np.empty((m, n)) if orders >= 2 else None
        P[0] = 1.0
        if orders >= 1:
            dP[0] = 0.0
        if orders >= 2:
            d2P[0] = 0.0
        if m > 1:
            P[1] = t
            if orders >= 1:
                dP[1] = 1.0
            if orders >= 2:
                d2P[1] = 0.0
        for j in range(1, m - 1):
            P[j + 1] = ((2 * j + 1) * t * P[j] - j * P[j - 1]) / (j + 1)
            if orders >= 1:
                dP[j + 1] = dP[j - 1] + (2 * j + 1) * P[j]
            if orders >= 2:
                d2P[j + 1] = d2P[j - 1] + (2 * j + 1) * dP[j]
        return P, dP, d2P

    def _log_envelope(self, s: np.ndarray) -> np.ndarray:
        # ln E computed as a sum so that s^{sigma0} and (1+s^2)^{1-delta}
        # cannot overflow separately (they can for large modes or large M)
        out = 2.0 * (1.0 - self.delta) * _log_hypot1(s)
        if self.sigma0 != 0.0:
            out = out + self.sigma0 * np.log(s)
        return out

    def _frame_coeffs(self, s: np.ndarray):
        """Map value t and the rational coefficient fields, overflow-safe.

        For s > 1 the fields are rewritten in z = s^{-2}; their direct forms
        overflow in (1+s^2)^2 and (1+s^2)^3 long before the fields themselves
        leave the representable range.
        """
        sig, dl = self.sigma0, self.delta
        t = np.empty_like(s)
        a = np.empty_like(s)
        ap = np.empty_like(s)
        tp = np.empty_like(s)
        tpp = np.empty_like(s)
        low = s <= 1.0
        if np.any(low):
            ss = s[low]
            s2 = ss * ss
            t[low] = (s2 - 1.0) / (s2 + 1.0)
            a[low] = sig / ss + 2.0 * (1.0 - dl) * ss / (1.0 + s2)
            ap[low] = -sig / s2 + 2.0 * (1.0 - dl) * (1.0 - s2) / (1.0 + s2) ** 2
            tp[low] = 4.0 * ss / (1.0 + s2) ** 2
            tpp[low] = (4.0 - 12.0 * s2) / (1.0 + s2) ** 3
        if np.any(~low):
            sl = s[~low]
            z = 1.0 / (sl * sl)
            zp = 1.0 + z
            t[~low] = (1.0 - z) / zp
            a[~low] = sig / sl + 2.0 * (1.0 - dl) / (sl * zp)
            ap[~low] = -sig * z + 2.0 * (1.0 - dl) * z * (z - 1.0) / zp ** 2
            tp[~low] = 4.0 * (z / sl) / zp ** 2
            tpp[~low] = z * z * (4.0 * z - 12.0) / zp ** 3
        return t, a, ap, tp, tpp

    def _operator_coeffs(self, s: np.ndarray):
        t, a, ap, tp, tpp = self._frame_coeffs(s)
        M, nu = self.M, self.nu_coeff
        inv_s = 1.0 / s
        c0 = a * a + ap + (M - 1.0) * a * inv_s - nu * inv_s * inv_s
        c1 = 2.0 * a * tp + tpp + (M - 1.0) * tp * inv_s
        c2 = tp * tp
        return t, a, ap, tp, c0, c1, c2

    def values(self, s: np.ndarray) -> np.ndarray:
        """Matrix (m, n) of trial values."""
        E = np.exp(self._log_envelope(s))
        t, *_ = self._frame_coeffs(s)
        P, _, _ = self._legendre(t, orders=0)
        return E * P

    def values_and_derivs(self, s: np.ndarray):
        """(psi, psi', psi'') matrices of shape (m, n)."""
        E = np.exp(self._log_envelope(s))
        t, a, ap, tp, tpp = self._frame_coeffs(s)
        P, dP, d2P = self._legendre(t, orders=2)
        psi = E * P
        dpsi = E * (a * P + tp * dP)
        d2psi = E * ((a * a + ap) * P + (2.0 * a * tp + tpp) * dP + tp * tp * d2P)
        return psi, dpsi, d2psi

    def applied(self, s: np.ndarray):
        """(psi, T_k psi) with T_k psi = psi'' + (M-1)psi'/s - nu psi/s^2."""
        E = np.exp(self._log_envelope(s))
        t, _, _, _, c0, c1, c2 = self._operator_coeffs(s)
        P, dP, d2P = self._legendre(t, orders=2)
        return E * P, E * (c0 * P + c1 * dP + c2 * d2P)

    def weighted_rows(self, s: np.ndarray, log_weight: np.ndarray,
                      log_pot: np.ndarray | None = None):
        """(psi, T_k psi) times exp(log_weight/2), assembled in log space.

        Folding the square root of the quadrature weight (and optionally of
        the potential) into the envelope keeps every factor representable
        even when s^{M-1} or the envelope overflow on their own.
        """
        lnE = self._log_envelope(s)
        t, _, _, _, c0, c1, c2 = self._operator_coeffs(s)
        P, dP, d2P = self._legendre(t, orders=2)
        stiff_scale = np.exp(lnE + 0.5 * log_weight)
        rows_stiff = stiff_scale * (c0 * P + c1 * dP + c2 * d2P)
        if log_pot is None:
            rows_mass = stiff_scale * P
        else:
            rows_mass = np.exp(lnE + 0.5 * (log_weight + log_pot)) * P
        return rows_mass, rows_stiff


@dataclass
class ModeProblem:
    """Discretized pencil for one spherical-harmonic mode."""

    params: Params
    k: int
    lambda_k: float
    basis: ModeBasis
    grid: SGrid
    A: np.ndarray          # stiffness int (T psi_i)(T psi_j) s^{M-1} ds
    B: np.ndarray          # weighted mass with the sharp potential, weight scale nu_w
    weight_lambda: float = 1.0

    @property
    def alpha_scale(self) -> float:
        """Factor turning s-side quadratic forms into the R^N inner product."""
        p = self.params
        return sphere_area(p.N) / p.q ** 3

    def potential(self, s: np.ndarray, weight_lambda: float = 1.0) -> np.ndarray:
        return np.exp(self.log_potential(s, weight_lambda))

    def log_potential(self, s: np.ndarray, weight_lambda: float = 1.0) -> np.ndarray:
        nu = weight_lambda ** (1.0 / self.params.q)
        return _log_potential(self.params.M, nu, s)

    def weighted_mass(self, weight_lambda: float, chunk: int = 4096) -> np.ndarray:
        nu = weight_lambda ** (1.0 / self.params.q)
        _, B = _chunked_matrices(self.basis, self.grid, self.params.M, nu, stiffness=False)
        return B


def _log_hypot1(s: np.ndarray) -> np.ndarray:
    """0.5 * log(1 + s^2) without overflow in the square."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    low = s < 1e150
    out[low] = 0.5 * np.log1p(s[low] * s[low])
    out[~low] = np.log(s[~low])
    return out


def _log_potential(M: float, nu: float, s: np.ndarray) -> np.ndarray:
    P4 = (M - 4.0) * (M - 2.0) * M * (M + 2.0)
    return math.log(P4) + 4.0 * math.log(nu) - 8.0 * _log_hypot1(nu * s)


def _chunked_matrices(basis: ModeBasis, grid: SGrid, M: float, nu: float,
                      stiffness: bool = True, chunk: int = 4096):
    m = basis.m
    A = np.zeros((m, m)) if stiffness else None
    B = np.zeros((m, m))
    for lo in range(0, grid.n, chunk):
        sl = slice(lo, min(lo + chunk, grid.n))
        s = grid.s[sl]
        log_w = np.log(grid.w[sl]) + (M - 1.0) * grid.u[sl]
        rows_mass, rows_stiff = basis.weighted_rows(s, log_w, _log_potential(M, nu, s))
        if stiffness:
            A += rows_stiff @ rows_stiff.T
        B += rows_mass @ rows_mass.T
    if stiffness:
        A = 0.5 * (A + A.T)
    return A, 0.5 * (B + B.T)


def assemble_mode_problem(p: Params, k: int, nodes: int = 160,
                          grid: SGrid | None = None,
                          weight_lambda: float = 1.0) -> ModeProblem:
    """Build the weak-form pencil (A, B) for mode k with `nodes` trial functions."""
    if nodes < 64:
        raise GridTooCoarse(f"need at least 64 trial functions, got {nodes}")
    lam_k, _ = mode_lambda(k, p.N)
    nu_coeff = p.q ** 2 * lam_k
    basis = ModeBasis(p.M, nu_coeff, nodes)
    grid = grid or SGrid.build(nodes, M=p.M)
    nu = weight_lambda ** (1.0 / p.q)
    A, B = _chunked_matrices(basis, grid, p.M, nu)
    return ModeProblem(params=p, k=k, lambda_k=lam_k, basis=basis, grid=grid,
                       A=A, B=B, weight_lambda=weight_lambda)


def _solve_pencil(A: np.ndarray, B: np.ndarray, drop: float = 1e-13):
    lam, V = np.linalg.eigh(B)
    top = lam.max()
    if not np.isfinite(top) or top <= 0:
        raise EigensolveFailure("weighted mass matrix is not positive")
    keep = lam > top * drop
    T = V[:, keep] / np.sqrt(lam[keep])
    Ar = T.T @ A @ T
    mu, Y = np.linalg.eigh(0.5 * (Ar + Ar.T))
    X = T @ Y
    return mu, X, int(keep.sum())


@dataclass
class SpectrumResult:
    """Computed eigenpairs of one mode pencil."""

    problem: ModeProblem
    eigenvalues: np.ndarray
    coefficients: np.ndarray      # (m, n_eigs), columns B-orthonormal
    residual_norms: np.ndarray
    nodes: int
    kept_rank: int

    def eigenfunction(self, i: int) -> "SobolevModeFunction":
        return SobolevModeFunction(self.problem.basis, self.coefficients[:, i])

    def alignment(self, i: int, exact_fn) -> float:
        """Weighted-inner-product alignment of eigenvector i with a closed form."""
        pr = self.problem
        s, u, w = pr.grid.s, pr.grid.u, pr.grid.w
        log_w = np.log(w) + (pr.params.M - 1.0) * u + pr.log_potential(s, pr.weight_lambda)
        fnum = self.eigenfunction(i).eval(np.atleast_1d(s))
        fex = np.asarray(exact_fn(s), dtype=float)

        def wsum(f, g):
            # assembled in log space; nodes where a factor underflowed to
            # zero contribute nothing by construction
            m = (f != 0.0) & (g != 0.0) & np.isfinite(f) & np.isfinite(g)
            vals = (np.sign(f[m]) * np.sign(g[m])
                    * np.exp(log_w[m] + np.log(np.abs(f[m])) + np.log(np.abs(g[m]))))
            return float(vals.sum())

        num = wsum(fnum, fex)
        den = math.sqrt(wsum(fnum, fnum) * wsum(fex, fex))
        return abs(num) / den


def mode_eigenvalues(p: Params, k: int, n_eigs: int = 6, nodes: int = 160,
                     grid: SGrid | None = None, weight_lambda: float = 1.0,
                     problem: ModeProblem | None = None) -> SpectrumResult:
    """Smallest eigenvalues of the mode-k pencil with discrete residual norms."""
    pr = problem
    if pr is None:
        pr = assemble_mode_problem(p, k, nodes=nodes, grid=grid, weight_lambda=weight_lambda)
    elif weight_lambda != pr.weight_lambda:
        pr = ModeProblem(params=pr.params, k=pr.k, lambda_k=pr.lambda_k, basis=pr.basis,
                         grid=pr.grid, A=pr.A, B=pr.weighted_mass(weight_lambda),
                         weight_lambda=weight_lambda)
    mu, X, kept = _solve_pencil(pr.A, pr.B)
    if kept < n_eigs:
        raise EigensolveFailure(f"only {kept} stable directions, need {n_eigs}")
    mu = mu[:n_eigs]
    X = X[:, :n_eigs]
    # sign normalization: positive at the first interior point where the
    # eigenfunction is resolvably nonzero
    probe = pr.basis.values(np.array([0.3, 1.0, 3.0]))
    vals = X.T @ probe
    for i in range(n_eigs):
        nz = vals[i][np.abs(vals[i]) > 1e-300]
        if nz.size and nz[0] < 0:
            X[:, i] = -X[:, i]
    res = np.empty(n_eigs)
    for i in range(n_eigs):
        ax = pr.A @ X[:, i]
        bx = pr.B @ X[:, i]
        res[i] = np.linalg.norm(ax - mu[i] * bx) / np.linalg.norm(bx)
    return SpectrumResult(problem=pr, eigenvalues=mu, coefficients=X,
                          residual_norms=res, nodes=pr.basis.m, kept_rank=kept)


class SobolevModeFunction:
    """Eigenfunction as an analytic combination of trial functions (s side)."""

    def __init__(self, basis: ModeBasis, coeffs: np.ndarray):
        self.basis = basis
        self.coeffs = np.asarray(coeffs, dtype=float)

    def eval(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = self.coeffs @ self.basis.values(s)
        return out if out.size > 1 else float(out[0])

    def __call__(self, s):
        return self.eval(s)

    def deriv(self, s, order: int = 1):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        psi, dpsi, d2psi = self.basis.values_and_derivs(s)
        mat = {1: dpsi, 2: d2psi}[order]
        out = self.coeffs @ mat
        return out if out.size > 1 else float(out[0])

    def to_radial(self, p: Params) -> "RadialModeFunction":
        return RadialModeFunction(self, p)


class RadialModeFunction:
    """The same function pulled back to the weighted side, u(r) = X(r^{1/q})."""

    def __init__(self, fn: SobolevModeFunction, p: Params):
        self.fn = fn
        self.p = p

    def eval(self, r):
        r = np.asarray(r, dtype=float)
        return self.fn.eval(r ** (1.0 / self.p.q))

    def __call__(self, r):
        return self.eval(r)

    def deriv(self, r, order: int = 1):
        r = np.asarray(r, dtype=float)
        iq = 1.0 / self.p.q
        s = r ** iq
        ds = iq * r ** (iq - 1.0)
        if order == 1:
            return self.fn.deriv(s, 1) * ds
        if order == 2:
            d2s = iq * (iq - 1.0) * r ** (iq - 2.0)
            return self.fn.deriv(s, 2) * ds ** 2 + self.fn.deriv(s, 1) * d2s
        raise ValueError("radial pullbacks support derivatives up to order 2")


def kernel_residual(p: Params, profile: RadialProfile, k: int, mu: float | None = None) -> float:
    """Sup over log-spaced radii of the relative mode-k ODE residual.

    The residual of L_k(r^alpha L_k u) = mu K r^{-alpha} (1+r^{2-a})^{-4} u is
    evaluated exactly through the term algebra; mu defaults to p*-1.
    """
    if mu is None:
        mu = p.pstar - 1.0
    lam_k, _ = mode_lambda(k, p.N)
    K = normalization_constant(p) ** (p.pstar - 2.0)
    form = profile.form
    inner = form.radial_laplacian(p.N, lam_k).mul_rpow(a=-1, b=-2)
    lhs = inner.radial_laplacian(p.N, lam_k)
    rhs = form.mul_wpow(-4).mul_rpow(a=1, b=2).scaled(mu * K)
    res = lhs - rhs
    r = np.logspace(-3, 3, 121)
    scale = lhs.term_magnitude(r) + np.abs(rhs.eval(r))
    return float(np.max(np.abs(res.eval(r)) / scale))


def verify_kernel(p: Params, k_max: int = 6, tol: float = 1e-3, nodes: int = 160,
                  n_eigs: int = 8) -> dict:
    """Compare the algebraic kernel condition with the discrete spectra.

    For each mode k <= k_max the condition q^2 lambda_k in {0, M-1} is
    checked analytically and against the presence of the eigenvalue p*-1 in
    the discrete pencil.  Disagreement raises InconsistentKernel.  The total
    kernel dimension (radial element plus harmonic multiplicities) must
    reproduce the even-case count.
    """
    info = even_alpha_info(p)
    target = p.pstar - 1.0
    grid = SGrid.build(nodes, M=p.M)
    modes = []
    kernel_dim = 0
    for k in range(k_max + 1):
        lam_k, mult = mode_lambda(k, p.N)
        nu = p.q ** 2 * lam_k
        analytic = (k == 0) or abs(nu - (p.M - 1.0)) < 1e-9
        result = mode_eigenvalues(p, k, n_eigs=n_eigs, nodes=nodes, grid=grid)
        dist = float(np.min(np.abs(result.eigenvalues - target)) / target)
        numeric = dist < tol
        if numeric != analytic:
            raise InconsistentKernel(
                f"mode {k}: analytic={analytic} numeric={numeric} (rel dist {dist:.2e})")
        if analytic:
            kernel_dim += 1 if k == 0 else mult
        modes.append({
            "k": k,
            "lambda_k": lam_k,
            "multiplicity": mult,
            "in_kernel": analytic,
            "rel_distance_to_target": dist,
        })
    if kernel_dim != info.kernel_dim:
        raise InconsistentKernel(
            f"assembled kernel dim {kernel_dim} != expected {info.kernel_dim}")
    return {
        "N": p.N,
        "alpha": p.alpha,
        "target_eigenvalue": target,
        "tol": tol,
        "modes": modes,
        "kernel_dim": kernel_dim,
        "is_even_case": info.is_even_case,
        "k_even": info.k,
    }


def mu3_estimate(p: Params, nodes: int = 220, n_eigs: int = 6) -> dict:
    """Third radial eigenvalue with a refinement error bar and its margin over p*-1."""
    coarse = mode_eigenvalues(p, 0, n_eigs=n_eigs, nodes=max(64, (2 * nodes) // 3))
    fine = mode_eigenvalues(p, 0, n_eigs=n_eigs, nodes=nodes)
    mu3 = float(fine.eigenvalues[2])
    err = abs(mu3 - float(coarse.eigenvalues[2]))
    margin = mu3 - (p.pstar - 1.0) - err
    return {
        "mu1": float(fine.eigenvalues[0]),
        "mu2": float(fine.eigenvalues[1]),
        "mu3": mu3,
        "err_bar": err,
        "margin_over_mu2": margin,
        "nodes": nodes,
    }
