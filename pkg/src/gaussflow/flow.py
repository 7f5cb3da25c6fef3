"""Time discretization of the gradient-image evolution problem.

The semidiscrete problem on a grid over Omega reads

    interior node i:  dU_i/dt = G(DU_i, D2U_i)
    boundary node i:  h(DU_i) = 0

with h the defining function of the gradient-image domain and all
derivatives taken from the grid's second-order stencils. Implicit Euler
steps are solved by an exact Newton iteration whose Jacobian rows combine
the operator derivatives G_r (weighting the Hessian stencils) and G_p
(weighting the gradient stencils); boundary rows use Dh(DU) times the
gradient stencils. In one dimension convexity pins the boundary
gradients to the interval ends of the image domain, so those rows are
plain gradient conditions and no root selection arises.

The long-time limit is a translator: u(x, t) -> u_inf(x) + C_inf t. The
run loop declares convergence when the nodewise rate field u_dot has
oscillation (max - min) below tol_c and the boundary residual is below
tol_b, then reports C_inf as the mean interior rate, the profile
normalized to vanish at the anchor node, and the steady residual
max |G - C_inf|.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import domains as dom
from .errors import (
    ConvexityError,
    NonConvergenceError,
    SpacelikeViolationError,
    StepFailureError,
)
from .geometry import MINKOWSKI, SPACELIKE_MARGIN
from .grids import LineGrid, MappedDiskGrid
from .operators import g_derivatives_many, g_value_many


@dataclass
class StepControls:
    """Newton and step-size policy. All values overridable per run."""

    tol_newton: float = 1e-10
    max_newton: int = 30
    tol_c: float = 1e-8
    tol_b: float = 1e-9
    tol_r_scale: float = 1e-6
    tau0: float | None = None  # default 0.1 h_ref^2, resolved per grid
    tau_min: float = 1e-14
    tau_max: float = 1.0
    max_steps: int = 100000
    explicit_cfl: float = 0.2

    def initial_tau(self, grid) -> float:
        if self.tau0 is not None:
            return self.tau0
        return 0.1 * grid.h_ref**2


@dataclass
class FlowState:
    """One accepted snapshot of the discrete flow."""

    grid: object
    u: np.ndarray
    t: float
    u_dot: np.ndarray
    tau: float
    steps: int
    sig: str
    omega: dom.ConvexDomain
    omega_tilde: dom.ConvexDomain
    g0_range: tuple[float, float]
    tau_max: float = 1.0
    newton_iters: int = 0

    def copy(self) -> "FlowState":
        return replace(self, u=self.u.copy(), u_dot=self.u_dot.copy())


@dataclass
class SolitonResult:
    """Converged translator: speed, normalized profile, and diagnostics."""

    c_inf: float
    u_inf: np.ndarray
    residual: float
    steps: int
    wall_seconds: float
    state: FlowState
    history: list = field(default_factory=list, repr=False)


def build_grid(omega: dom.ConvexDomain, grid_spec):
    """Grid over omega: int N for intervals, (n_rho, n_theta) for 2D."""
    if omega.dimension == 1:
        if omega.kind == "interval":
            lo, hi = omega.lo, omega.hi
        else:  # 1D ball
            lo = omega.center[0] - omega.radius
            hi = omega.center[0] + omega.radius
        return LineGrid(lo, hi, int(grid_spec))
    if omega.dimension != 2:
        raise ValueError("full grids support n <= 2; use the radial oracle beyond")
    shape = dom.ellipse_shape_matrix(omega)
    a_map = dom.spd_inv_sqrt(shape)
    n_rho, n_theta = grid_spec
    return MappedDiskGrid(a_map, omega.center, int(n_rho), int(n_theta))


def initialize(omega: dom.ConvexDomain, omega_tilde: dom.ConvexDomain,
               grid_spec, sig: str) -> FlowState:
    """Initial state with the exact affine-compatible quadratic.

    Every supported domain pair (intervals, balls, ellipses of matching
    dimension) is the image of the other under a unique SPD affine map,
    so u0(x) = 0.5 (x - c)^T A (x - c) + c_tilde . x always realizes
    Du0(Omega) = Omega_tilde exactly and is uniformly convex.
    """
    if omega.dimension != omega_tilde.dimension:
        raise ValueError("omega and omega_tilde must share a dimension")
    if sig == MINKOWSKI:
        _, rad_max = dom.radial_range(omega_tilde)
        if rad_max > 1.0 - SPACELIKE_MARGIN:
            raise ValueError(
                f"omega_tilde reaches |p| = {rad_max:.6g}: the spacelike "
                f"constraint needs it strictly inside the unit ball "
                f"(margin {SPACELIKE_MARGIN:g})"
            )
    grid = build_grid(omega, grid_spec)
    a_mat, shift = dom.spd_affine_map(omega, omega_tilde)
    d = grid.nodes - omega.center
    u0 = 0.5 * np.einsum("ni,ij,nj->n", d, a_mat, d) + grid.nodes @ (
        a_mat @ omega.center + shift
    )
    g0 = g_value_many(grid.gradient(u0), grid.hessian(u0), sig)
    return FlowState(
        grid=grid, u=u0, t=0.0, u_dot=g0.copy(), tau=0.0, steps=0, sig=sig,
        omega=omega, omega_tilde=omega_tilde,
        g0_range=(float(np.min(g0)), float(np.max(g0))),
    )


# ---------------------------------------------------------------------------
# Implicit stepping
# ---------------------------------------------------------------------------

def _boundary_targets(state: FlowState):
    """1D gradient Dirichlet values: Du(a), Du(b) forced by monotonicity."""
    ot = state.omega_tilde
    if ot.kind == "interval":
        return ot.lo, ot.hi
    return ot.center[0] - ot.radius, ot.center[0] + ot.radius


def _residual(state: FlowState, u: np.ndarray, u_prev: np.ndarray, tau: float):
    grid = state.grid
    p = grid.gradient(u)
    r = grid.hessian(u)
    g = g_value_many(p, r, state.sig)
    res = np.empty(grid.n_nodes)
    ii = grid.interior
    res[ii] = u[ii] - u_prev[ii] - tau * g[ii]
    bb = grid.boundary
    if grid.dim == 1:
        lo, hi = _boundary_targets(state)
        res[bb[0]] = p[bb[0], 0] - lo
        res[bb[1]] = p[bb[1], 0] - hi
    else:
        hb, _ = dom.defining_jet_many(state.omega_tilde, p[bb])
        res[bb] = hb
    return res, p, r


def _jacobian(state: FlowState, p: np.ndarray, r: np.ndarray, tau: float):
    grid = state.grid
    n_nodes = grid.n_nodes
    ndim = grid.dim
    g_r, g_p = g_derivatives_many(p, r, state.sig)

    lin = sp.csr_matrix((n_nodes, n_nodes))
    for k in range(ndim):
        for l in range(ndim):
            lin = lin + sp.diags(g_r[:, k, l]) @ grid.d_second[k][l]
        lin = lin + sp.diags(g_p[:, k]) @ grid.d_first[k]

    if ndim == 1:
        bnd_rows = grid.d_first[0]
    else:
        bb = grid.boundary
        beta = np.zeros((n_nodes, ndim))
        _, dh = dom.defining_jet_many(state.omega_tilde, p[bb])
        beta[bb] = dh
        bnd_rows = sum(sp.diags(beta[:, k]) @ grid.d_first[k] for k in range(ndim))

    sel_i = np.zeros(n_nodes)
    sel_i[grid.interior] = 1.0
    sel_b = np.zeros(n_nodes)
    sel_b[grid.boundary] = 1.0
    jac = (
        sp.diags(sel_i) @ (sp.eye(n_nodes) - tau * lin)
        + sp.diags(sel_b) @ bnd_rows
    )
    return jac.tocsc()


def _newton_solve(state: FlowState, u_prev: np.ndarray, guess: np.ndarray,
                  tau: float, controls: StepControls):
    """Return (u, iterations) or None if Newton failed for this tau."""
    u = guess.copy()
    for it in range(1, controls.max_newton + 1):
        try:
            res, p, r = _residual(state, u, u_prev, tau)
        except SpacelikeViolationError:
            return None
        if not np.all(np.isfinite(res)):
            return None
        if np.max(np.abs(res)) <= controls.tol_newton:
            return u, it
        jac = _jacobian(state, p, r, tau)
        delta = spsolve(jac, res)
        if not np.all(np.isfinite(delta)):
            return None
        u = u - delta
    return None


def _admissible(state: FlowState, u: np.ndarray) -> bool:
    """Spacelike bound and strict convexity at a candidate state."""
    grid = state.grid
    p = grid.gradient(u)
    if state.sig == MINKOWSKI:
        if np.max(np.sum(p * p, axis=1)) >= (1.0 - SPACELIKE_MARGIN) ** 2:
            return False
    r = grid.hessian(u)
    return bool(np.min(np.linalg.eigvalsh(r)[:, 0]) > 0.0)


def step_implicit(state: FlowState, controls: StepControls | None = None) -> FlowState:
    """One accepted implicit Euler step with tau adaptation.

    Newton failure or an inadmissible candidate halves tau and retries;
    quick Newton convergence (<= 4 iterations) grows the next tau by 1.5
    up to tau_max. Underflow below tau_min raises StepFailureError.
    """
    controls = controls or StepControls()
    tau = state.tau if state.tau > 0 else controls.initial_tau(state.grid)
    u_prev = state.u
    while True:
        guess = u_prev + tau * state.u_dot if state.steps > 0 else u_prev
        got = _newton_solve(state, u_prev, guess, tau, controls)
        if got is not None and _admissible(state, got[0]):
            u_new, iters = got
            break
        tau *= 0.5
        if tau < controls.tau_min:
            raise StepFailureError(
                f"Newton failed at every tau down to {controls.tau_min:g} "
                f"(t = {state.t:.6g}, step {state.steps})"
            )
    u_dot = (u_new - u_prev) / tau
    tau_next = min(tau * 1.5, controls.tau_max) if iters <= 4 else tau
    return replace(
        state, u=u_new, t=state.t + tau, u_dot=u_dot, tau=tau_next,
        steps=state.steps + 1, tau_max=controls.tau_max, newton_iters=iters,
    )


# ---------------------------------------------------------------------------
# Explicit stepping (validation path)
# ---------------------------------------------------------------------------

def step_explicit(state: FlowState, tau: float,
                  controls: StepControls | None = None) -> FlowState:
    """Forward Euler on the interior plus boundary gradient projection.

    Each boundary value is corrected by a scalar Newton solve moving the
    one-sided gradient onto {h = 0}; the derivative of that solve is the
    obliqueness pairing of Dh(Du) with the stencil direction.
    """
    controls = controls or StepControls()
    grid = state.grid
    p = grid.gradient(state.u)
    if state.sig == MINKOWSKI:
        limiter = 1.0 - np.max(np.sum(p * p, axis=1))
    else:
        limiter = 1.0
    bound = controls.explicit_cfl * grid.h_ref**2 * limiter
    if tau > bound:
        raise ValueError(
            f"explicit step tau = {tau:g} exceeds the stability bound {bound:g}"
        )
    r = grid.hessian(state.u)
    g = g_value_many(p, r, state.sig)
    u_new = state.u.copy()
    ii = grid.interior
    u_new[ii] += tau * g[ii]

    if grid.dim == 1:
        lo, hi = _boundary_targets(state)
        targets = (lo, hi)
        for which, b in enumerate(grid.boundary):
            w = grid.d_first[0][b, b]
            pb = (grid.d_first[0].getrow(b) @ u_new)[0]
            u_new[b] += (targets[which] - pb) / w
    else:
        for b in grid.boundary:
            w = np.array([grid.d_first[k][b, b] for k in range(grid.dim)])
            rows = [grid.d_first[k].getrow(b) for k in range(grid.dim)]
            for _ in range(40):
                pb = np.array([(row @ u_new)[0] for row in rows])
                hb, dhb, _ = dom.defining_jet(state.omega_tilde, pb)
                if abs(hb) < 1e-13:
                    break
                slope = dhb @ w
                u_new[b] -= hb / slope
    u_dot = (u_new - state.u) / tau
    return replace(
        state, u=u_new, t=state.t + tau, u_dot=u_dot, steps=state.steps + 1,
        newton_iters=0,
    )


# ---------------------------------------------------------------------------
# Translator extraction
# ---------------------------------------------------------------------------

def boundary_residual(state: FlowState) -> float:
    """max |h(Du)| over boundary nodes."""
    p = state.grid.gradient(state.u)
    hb, _ = dom.defining_jet_many(state.omega_tilde, p[state.grid.boundary])
    return float(np.max(np.abs(hb)))


def translator_residual(u: np.ndarray, c: float, sig: str, grid) -> float:
    """max over interior nodes of |G(Du, D2u) - c| for a convex field."""
    p = grid.gradient(u)
    r = grid.hessian(u)
    lam_min = float(np.min(np.linalg.eigvalsh(r)[:, 0]))
    if lam_min <= 0.0:
        raise ConvexityError(
            f"translator residual needs a strictly convex field "
            f"(min Hessian eigenvalue {lam_min:.3e})"
        )
    g = g_value_many(p, r, sig)
    return float(np.max(np.abs(g[grid.interior] - c)))


def run_to_translator(state: FlowState, controls: StepControls | None = None,
                      on_accept=None) -> SolitonResult:
    """Advance implicit steps until the rate field is uniform.

    ``on_accept(state)`` fires after every accepted step (monitor hook).
    Raises NonConvergenceError carrying the light per-step history if
    max_steps is exhausted.
    """
    controls = controls or StepControls()
    t_start = time.perf_counter()
    state = replace(state, tau=controls.initial_tau(state.grid),
                    tau_max=controls.tau_max)
    history = []
    converged = False
    try:
        for _ in range(controls.max_steps):
            state = step_implicit(state, controls)
            if on_accept is not None:
                on_accept(state)
            osc = float(np.max(state.u_dot) - np.min(state.u_dot))
            bres = boundary_residual(state)
            history.append((state.t, state.tau, osc, bres, state.newton_iters))
            if osc < controls.tol_c and bres < controls.tol_b:
                converged = True
                break
    except StepFailureError as exc:
        raise NonConvergenceError(str(exc), history=history) from exc
    if not converged:
        raise NonConvergenceError(
            f"no translator after {controls.max_steps} steps "
            f"(osc = {history[-1][2] if history else float('nan'):.3e})",
            history=history,
        )

    c_inf = float(np.mean(state.u_dot[state.grid.interior]))
    u_inf = state.u - state.t * c_inf
    u_inf = u_inf - u_inf[state.grid.anchor]
    residual = translator_residual(u_inf, c_inf, state.sig, state.grid)
    tol_r = controls.tol_r_scale * max(1.0, abs(c_inf))
    if residual > tol_r:
        raise NonConvergenceError(
            f"translator residual {residual:.3e} exceeds {tol_r:.3e}",
            history=history,
        )
    return SolitonResult(
        c_inf=c_inf, u_inf=u_inf, residual=residual, steps=state.steps,
        wall_seconds=time.perf_counter() - t_start, state=state,
        history=history,
    )
