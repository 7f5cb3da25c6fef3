"""Pointwise differential geometry of graphs in Minkowski and Euclidean space.

For a graph x -> (x, u(x)) with gradient p and Hessian r the induced
metric, its inverse, the symmetric square root of the inverse metric and
the curvature matrix are all rank-one corrections of the identity. Both
signatures share one set of formulas through the sign eps attached to
|p|^2 (eps = -1 spacelike Minkowski, eps = +1 Euclidean):

    v^2   = 1 + eps |p|^2
    g_ij  = delta_ij + eps p_i p_j
    g^ij  = delta_ij - eps p_i p_j / v^2
    b^ij  = delta_ij - eps p_i p_j / (v (1 + v))
    b_ij  = delta_ij + eps p_i p_j / (1 + v)
    a     = (1/v) b^T r b

The principal curvatures are the eigenvalues of a and the mean curvature
is its trace. b^ij is the positive square root of g^ij and b_ij its
inverse; for the Minkowski case this forces the opposite sign on the
rank-one parts of b^ij/b_ij relative to a common typographic variant
that breaks both b*b = g^inv and b^ij b_jk = id (the broken variant is
kept behind ``paper_signs`` as a regression lock for the check suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpacelikeViolationError

MINKOWSKI = "minkowski"
EUCLIDEAN = "euclidean"
SIGNATURES = (MINKOWSKI, EUCLIDEAN)

# Geometry refuses Minkowski gradients with |p| > 1 - SPACELIKE_MARGIN.
SPACELIKE_MARGIN = 1e-6

HESSIAN_SYMMETRY_TOL = 1e-14


def signature_eps(sig: str) -> float:
    if sig == MINKOWSKI:
        return -1.0
    if sig == EUCLIDEAN:
        return 1.0
    raise ValueError(f"unknown signature {sig!r}; expected one of {SIGNATURES}")


@dataclass(frozen=True)
class PointJet:
    """Position, value, gradient and Hessian of u at one point."""

    x: np.ndarray
    u: float
    du: np.ndarray
    d2u: np.ndarray

    def __post_init__(self):
        d2u = np.asarray(self.d2u, dtype=float)
        if np.max(np.abs(d2u - d2u.T)) > HESSIAN_SYMMETRY_TOL:
            raise ValueError("jet Hessian is not symmetric to 1e-14")


@dataclass(frozen=True)
class GraphGeometry:
    """Metric and curvature data of the graph at one point.

    kappa is sorted ascending; H = sum(kappa) = trace(a); nu is the
    (n+1)-dimensional unit normal of the graph in ambient space.
    """

    v: float
    g_lo: np.ndarray
    g_up: np.ndarray
    b_up: np.ndarray
    b_lo: np.ndarray
    a: np.ndarray
    kappa: np.ndarray
    H: float
    nu: np.ndarray


def check_spacelike(du: np.ndarray, sig: str) -> float:
    """Return |Du| after enforcing the causal bound in the Minkowski case."""
    norm = float(np.linalg.norm(du))
    if sig == MINKOWSKI and norm > 1.0 - SPACELIKE_MARGIN:
        raise SpacelikeViolationError(
            f"|Du| = {norm:.12g} violates the spacelike bound 1 - {SPACELIKE_MARGIN:g}"
        )
    return norm


def graph_geometry(jet: PointJet, sig: str, paper_signs: bool = False) -> GraphGeometry:
    """All pointwise graph quantities from a jet.

    ``paper_signs`` flips the rank-one parts of b^ij/b_ij in the Minkowski
    case to the variant that fails b*b = g^inv; only the check suite's
    regression lock should set it.
    """
    eps = signature_eps(sig)
    p = np.asarray(jet.du, dtype=float)
    r = np.asarray(jet.d2u, dtype=float)
    n = p.size
    check_spacelike(p, sig)

    pp = np.outer(p, p)
    v2 = 1.0 + eps * (p @ p)
    v = np.sqrt(v2)
    eye = np.eye(n)

    g_lo = eye + eps * pp
    g_up = eye - eps * pp / v2
    b_sign = -eps
    if paper_signs and sig == MINKOWSKI:
        b_sign = eps
    b_up = eye + b_sign * pp / (v * (1.0 + v))
    b_lo = eye - b_sign * pp / (1.0 + v)

    a = (b_up @ r @ b_up) / v
    a = 0.5 * (a + a.T)
    kappa = np.linalg.eigvalsh(a)
    big_h = float(np.trace(a))

    if sig == MINKOWSKI:
        nu = np.concatenate([p, [1.0]]) / v
    else:
        nu = np.concatenate([-p, [1.0]]) / v

    return GraphGeometry(
        v=float(v), g_lo=g_lo, g_up=g_up, b_up=b_up, b_lo=b_lo,
        a=a, kappa=kappa, H=big_h, nu=nu,
    )


def mean_curvature_k(kappa, k: int) -> float:
    """k-th elementary symmetric function of the principal curvatures."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    n = kappa.size
    if not 1 <= k <= n:
        raise ValueError(f"k = {k} out of range 1..{n}")
    # Coefficient recurrence for prod_i (1 + kappa_i t); coeffs[j] = S_j.
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    for ki in kappa:
        coeffs[1:] = coeffs[1:] + ki * coeffs[:-1]
    return float(coeffs[k])


# ---------------------------------------------------------------------------
# Vectorized geometry over node fields, used by the flow and the monitors.
# ---------------------------------------------------------------------------

def v_many(p: np.ndarray, sig: str) -> np.ndarray:
    """Tilt factor v at each row of p (N, n), with the spacelike guard."""
    eps = signature_eps(sig)
    sq = np.sum(p * p, axis=1)
    if sig == MINKOWSKI:
        worst = np.sqrt(np.max(sq)) if sq.size else 0.0
        if worst > 1.0 - SPACELIKE_MARGIN:
            raise SpacelikeViolationError(
                f"max |Du| = {worst:.12g} violates the spacelike bound"
            )
    return np.sqrt(1.0 + eps * sq)


def metric_up_many(p: np.ndarray, sig: str) -> np.ndarray:
    """Inverse induced metric g^ij at each row of p, shape (N, n, n)."""
    eps = signature_eps(sig)
    v2 = v_many(p, sig) ** 2
    n = p.shape[1]
    out = np.zeros((p.shape[0], n, n))
    out[:] = np.eye(n)
    out -= eps * p[:, :, None] * p[:, None, :] / v2[:, None, None]
    return out


def metric_lo_many(p: np.ndarray, sig: str) -> np.ndarray:
    """Induced metric g_ij at each row of p, shape (N, n, n)."""
    eps = signature_eps(sig)
    n = p.shape[1]
    out = np.zeros((p.shape[0], n, n))
    out[:] = np.eye(n)
    out += eps * p[:, :, None] * p[:, None, :]
    return out


def curvature_matrix_many(p: np.ndarray, r: np.ndarray, sig: str) -> np.ndarray:
    """Curvature matrix a = (1/v) b r b at each node, shape (N, n, n)."""
    eps = signature_eps(sig)
    v = v_many(p, sig)
    n = p.shape[1]
    b = np.zeros((p.shape[0], n, n))
    b[:] = np.eye(n)
    b -= eps * p[:, :, None] * p[:, None, :] / (v * (1.0 + v))[:, None, None]
    a = np.einsum("nik,nkl,nlj->nij", b, r, b) / v[:, None, None]
    return 0.5 * (a + np.swapaxes(a, 1, 2))


def laplace_beltrami(f: np.ndarray, u: np.ndarray, grid, sig: str) -> np.ndarray:
    """Intrinsic Laplacian of a discrete scalar field on the graph of u.

    The operator (1/sqrt(det g)) d_i (sqrt(det g) g^ij d_j f) is
    discretized in nondivergence form

        lap_M f = g^ij f_ij + (1/v) c_j f_j,
        c_j = p_j (-eps tr(r) / v + p^T r p / v^3),

    where the metric-divergence coefficient c comes from differentiating
    v g^ij analytically (det g = v^2 for either signature, so the area
    weight is v). Differencing the flux field numerically instead would
    double-difference derived quantities and lose an order near the
    boundary where stencil truncation constants jump; the analytic
    coefficient keeps the operator second-order accurate at every
    interior node. Boundary nodes are set to nan.
    """
    f = np.asarray(f, dtype=float)
    u = np.asarray(u, dtype=float)
    eps = signature_eps(sig)
    p = grid.gradient(u)
    r = grid.hessian(u)
    v = v_many(p, sig)
    g_up = metric_up_many(p, sig)
    hess_f = grid.hessian(f)
    grad_f = grid.gradient(f)
    main = np.einsum("nij,nij->n", g_up, hess_f)
    tr_r = np.einsum("nii->n", r)
    prp = np.einsum("ni,nij,nj->n", p, r, p)
    coeff = -eps * tr_r / v + prp / v**3
    out = main + coeff * np.einsum("ni,ni->n", p, grad_f) / v
    out[grid.boundary] = np.nan
    return out
