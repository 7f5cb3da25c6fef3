"""The scalar flow operator, its exact derivatives, and Legendre duality.

The interior evolution is u_t = G(Du, D2u) with

    G(p, r) = v * trace(a) = g^ij(p) r_ij,

the nondivergence trace form; the two expressions agree identically
because trace((1/v) b r b) = (1/v) trace(r b b) = (1/v) trace(r g^inv)
and an extra factor v. Everything downstream differentiates the closed
trace form directly:

    dG/dr_ij = g^ij(p)
    dG/dp_k  = -2 eps (r p)_k / v^2 + 2 p_k (p^T r p) / v^4

with eps = -1 (Minkowski) or +1 (Euclidean) and v^2 = 1 + eps |p|^2.
A transcription of the gradient derivative found elsewhere evaluates to
-4 p r / v^4 in one dimension instead of +2 p r / v^4; the finite
difference oracle arbitrates, and the broken transcription is available
behind ``paper_form`` purely as a check-suite regression lock.

The Legendre transform ytilde(y) = x . Du(x) - u(x), y = Du(x) swaps the
domain and its gradient image; the dual operator on the dual Hessian M is

    Gdual(y, M) = -g^ij(y) : (M^{-1})_ij

and equals -G at the matched primal jet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvexityError
from .geometry import (
    MINKOWSKI,
    PointJet,
    curvature_matrix_many,
    metric_up_many,
    signature_eps,
    v_many,
)


@dataclass(frozen=True)
class OperatorDerivatives:
    """Exact first derivatives of G in the Hessian and gradient slots."""

    g_r: np.ndarray  # symmetric (n, n); equals g^ij(p)
    g_p: np.ndarray  # (n,)


@dataclass(frozen=True)
class StructureReport:
    """Structure constants of the operator evaluated over one flow state.

    T is the curvature-slot derivative sum (identically n for the trace
    operator). tg/f/fk2 carry (min, max) over nodes; lambda_bounds is the
    Hessian eigenvalue range; sandwich is the admissible band for sum of
    principal curvatures derived from the initial rate range and the
    gradient-image domain, with sandwich_ok its verdict.
    """

    n: int
    T: float
    tg_range: tuple[float, float]
    f_range: tuple[float, float]
    fk2_range: tuple[float, float]
    lambda_bounds: tuple[float, float]
    gp_max: float
    sandwich: tuple[float, float]
    sandwich_ok: bool
    tol: float


def g_value(jet: PointJet, sig: str) -> float:
    """G(Du, D2u) at a single jet."""
    p = np.asarray(jet.du, dtype=float)[None, :]
    r = np.asarray(jet.d2u, dtype=float)[None, :, :]
    return float(g_value_many(p, r, sig)[0])


def g_value_many(p: np.ndarray, r: np.ndarray, sig: str) -> np.ndarray:
    """G at each node; p is (N, n), r is (N, n, n)."""
    g_up = metric_up_many(p, sig)
    return np.einsum("nij,nij->n", g_up, r)


def g_derivatives(jet: PointJet, sig: str, paper_form: bool = False) -> OperatorDerivatives:
    """Exact derivatives of G at a single jet.

    ``paper_form`` swaps the gradient derivative for the broken printed
    transcription (see module docstring); check-suite use only.
    """
    p = np.asarray(jet.du, dtype=float)[None, :]
    r = np.asarray(jet.d2u, dtype=float)[None, :, :]
    if paper_form:
        g_p = _g_p_paper_many(p, r, sig)
    else:
        _, g_p = g_derivatives_many(p, r, sig)
    g_r = metric_up_many(p, sig)
    return OperatorDerivatives(g_r=g_r[0], g_p=g_p[0])


def g_derivatives_many(p: np.ndarray, r: np.ndarray, sig: str):
    """(G_r, G_p) at each node: G_r is (N, n, n), G_p is (N, n)."""
    eps = signature_eps(sig)
    v2 = v_many(p, sig) ** 2
    g_r = metric_up_many(p, sig)
    rp = np.einsum("nij,nj->ni", r, p)
    prp = np.einsum("ni,ni->n", p, rp)
    # eps^2 = 1 collapses the sign on the second term
    g_p = (-2.0 * eps) * rp / v2[:, None] + 2.0 * p * (prp / v2**2)[:, None]
    return g_r, g_p


def _g_p_paper_many(p: np.ndarray, r: np.ndarray, sig: str) -> np.ndarray:
    """Gradient derivative transcribed literally from the broken display.

    For the trace operator it reads, per component i,
        -2 (p_i / v) tr(a) - 2 (b a p)_i
    and disagrees with the true derivative (ratio -2 in one dimension).
    """
    if sig != MINKOWSKI:
        raise ValueError("the printed transcription exists for the Minkowski case only")
    eps = signature_eps(sig)
    v = v_many(p, sig)
    a = curvature_matrix_many(p, r, sig)
    n = p.shape[1]
    b = np.zeros_like(a)
    b[:] = np.eye(n)
    b -= eps * p[:, :, None] * p[:, None, :] / (v * (1.0 + v))[:, None, None]
    tr_a = np.einsum("nii->n", a)
    bap = np.einsum("nij,njk,nk->ni", b, a, p)
    return -2.0 * p * (tr_a / v)[:, None] - 2.0 * bap


def g_dual(y, m, sig: str) -> float:
    """Dual operator Gdual(y, M) = -g^ij(y) : (M^{-1})_ij.

    M is the Hessian of the Legendre transform at y; it must be positive
    definite, and Minkowski signature requires |y| < 1.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = np.atleast_2d(np.asarray(m, dtype=float))
    evals = np.linalg.eigvalsh(0.5 * (m + m.T))
    if evals[0] <= 0:
        raise ValueError("dual Hessian must be positive definite")
    s = metric_up_many(y[None, :], sig)[0]
    m_inv = np.linalg.inv(m)
    return float(-np.sum(s * m_inv))


def legendre_transform(u: np.ndarray, grid):
    """Nodewise Legendre transform of a strictly convex discrete field.

    Returns (y, u_tilde): y[k] = Du(x_k) from the grid stencils and
    u_tilde[k] = x_k . y[k] - u[k]. The emitted cloud lies in the
    gradient-image domain up to discretization error.
    """
    u = np.asarray(u, dtype=float)
    p = grid.gradient(u)
    r = grid.hessian(u)
    evals = np.linalg.eigvalsh(r)
    if np.min(evals[:, 0]) <= 0.0:
        worst = int(np.argmin(evals[:, 0]))
        raise ConvexityError(
            f"field is not strictly convex: min Hessian eigenvalue "
            f"{evals[worst, 0]:.3e} at node {worst}"
        )
    y = p
    u_tilde = np.sum(grid.nodes * y, axis=1) - u
    return y, u_tilde


def dual_hessians(r: np.ndarray) -> np.ndarray:
    """Dual Hessians at matched points: inverses of the primal Hessians."""
    return np.linalg.inv(r)


def structure_report(state, sig: str | None = None) -> StructureReport:
    """Evaluate the operator structure constants over a flow state.

    Checks that the sum of principal curvatures stays inside the band
    [min w * min G0, max w * max G0] where w = 1/v ranges over the
    gradient-image domain and (min G0, max G0) is the initial rate range
    carried by the state.
    """
    from .domains import radial_range

    sig = sig or state.sig
    eps = signature_eps(sig)
    p = state.grid.gradient(state.u)
    r = state.grid.hessian(state.u)
    n = p.shape[1]

    v = v_many(p, sig)
    tg = n - eps * np.sum(p * p, axis=1) / v**2
    a = curvature_matrix_many(p, r, sig)
    kappa = np.linalg.eigvalsh(a)
    f_vals = np.sum(kappa, axis=1)
    fk2_vals = np.sum(kappa * kappa, axis=1)
    lam = np.linalg.eigvalsh(r)
    _, g_p = g_derivatives_many(p, r, sig)
    gp_max = float(np.max(np.linalg.norm(g_p, axis=1)))

    rad_min, rad_max = radial_range(state.omega_tilde)
    if sig == MINKOWSKI:
        w_min = 1.0 / np.sqrt(1.0 - rad_min**2)
        w_max = 1.0 / np.sqrt(1.0 - rad_max**2)
    else:
        w_min = 1.0 / np.sqrt(1.0 + rad_max**2)
        w_max = 1.0 / np.sqrt(1.0 + rad_min**2)
    g0_min, g0_max = state.g0_range
    lo = w_min * g0_min
    hi = w_max * g0_max
    tol = state.grid.monitor_tol(state.tau_max)
    ok = bool(np.min(f_vals) >= lo - tol and np.max(f_vals) <= hi + tol)

    return StructureReport(
        n=n,
        T=float(n),
        tg_range=(float(np.min(tg)), float(np.max(tg))),
        f_range=(float(np.min(f_vals)), float(np.max(f_vals))),
        fk2_range=(float(np.min(fk2_vals)), float(np.max(fk2_vals))),
        lambda_bounds=(float(np.min(lam)), float(np.max(lam))),
        gp_max=gp_max,
        sandwich=(float(lo), float(hi)),
        sandwich_ok=ok,
        tol=float(tol),
    )
