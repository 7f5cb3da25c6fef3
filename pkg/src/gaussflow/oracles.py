"""Independent ground truth for the solver.

Three self-contained references, none of which share code with the flow
discretization:

* Closed-form 1D translators. The translator ODE u'' = C (1 - u'^2)
  (spacelike) integrates to u' = tanh(C (x - x0)) and the Euclidean
  variant u'' = C (1 + u'^2) to u' = tan(C (x - x0)); prescribing the
  gradient image (c, d) over (a, b) fixes

      C = (artanh d - artanh c) / (b - a)   resp. arctan.

* Radially symmetric translators by shooting. With slope phi(r) = u'(r)
  the profile solves phi' = (C - (n-1) phi / r) (1 -+ phi^2), phi(0) = 0,
  regularized near the axis by phi ~ (C/n) r; bisection on C matches
  phi(R) to the prescribed boundary slope. phi(R) is monotone in C,
  which each call re-verifies on its bracket.

* Central finite differences of the flow operator against the exact
  derivative formulas, over batches of random spacelike jets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import OracleFailureError
from .geometry import EUCLIDEAN, MINKOWSKI, PointJet, signature_eps
from .operators import g_derivatives, g_value


@dataclass(frozen=True)
class ClosedForm1D:
    """Sampler for the closed form 1D translator profile."""

    c_speed: float
    x0: float
    sig: str

    def slope(self, x):
        z = self.c_speed * (np.asarray(x, dtype=float) - self.x0)
        return np.tanh(z) if self.sig == MINKOWSKI else np.tan(z)

    def height(self, x):
        """Profile u with u(x0) = 0; u' equals ``slope``."""
        z = self.c_speed * (np.asarray(x, dtype=float) - self.x0)
        if self.sig == MINKOWSKI:
            return np.log(np.cosh(z)) / self.c_speed
        return -np.log(np.cos(z)) / self.c_speed


def translator_1d_closed_form(a: float, b: float, c: float, d: float,
                              sig: str) -> tuple[float, ClosedForm1D]:
    """Speed and profile sampler for the 1D translator over (a, b).

    The gradient image is (c, d); Minkowski signature requires
    -1 < c < d < 1, Euclidean only c < d.
    """
    if not b > a:
        raise ValueError(f"need a < b, got ({a}, {b})")
    if not d > c:
        raise ValueError(f"need c < d, got ({c}, {d})")
    if sig == MINKOWSKI:
        if not (-1.0 < c and d < 1.0):
            raise ValueError("Minkowski slopes must satisfy -1 < c < d < 1")
        inv = np.arctanh
    elif sig == EUCLIDEAN:
        inv = np.arctan
    else:
        raise ValueError(f"unknown signature {sig!r}")
    speed = (inv(d) - inv(c)) / (b - a)
    x0 = a - inv(c) / speed
    return float(speed), ClosedForm1D(c_speed=float(speed), x0=float(x0), sig=sig)


@dataclass(frozen=True)
class RadialProfile:
    """Radial translator slope profile phi(r) = u'(r) with speed C."""

    radii: np.ndarray
    phi: np.ndarray
    c_speed: float
    dimension: int
    sig: str

    def slope_at(self, r):
        return np.interp(np.asarray(r, dtype=float), self.radii, self.phi)

    def height_at(self, r):
        """u(r) with u(0) = 0, by cumulative trapezoid on the dense profile."""
        cum = np.concatenate([
            [0.0],
            np.cumsum(0.5 * (self.phi[1:] + self.phi[:-1]) * np.diff(self.radii)),
        ])
        return np.interp(np.asarray(r, dtype=float), self.radii, cum)


_START_RADIUS = 1e-8


def _slope_ode(c_speed: float, n: int, sig: str):
    eps = signature_eps(sig)

    def rhs(r, y):
        phi = y[0]
        return [(c_speed - (n - 1) * phi / r) * (1.0 + eps * phi * phi)]

    return rhs


def _shoot(c_speed: float, radius: float, n: int, sig: str, dense: bool = False):
    """Integrate the slope ODE out to ``radius``; None on blowup."""
    rhs = _slope_ode(c_speed, n, sig)
    blow = 1e6

    def explode(r, y):
        return y[0] - blow

    explode.terminal = True
    t_eval = np.linspace(_START_RADIUS, radius, 4097) if dense else None
    sol = solve_ivp(
        rhs, (_START_RADIUS, radius), [c_speed * _START_RADIUS / n],
        method="RK45", rtol=1e-12, atol=1e-14, t_eval=t_eval, events=explode,
    )
    if not sol.success or sol.t[-1] < radius * (1.0 - 1e-12):
        return None
    return sol


def translator_radial_shooting(radius: float, rho: float, n: int, sig: str,
                               tol: float = 1e-10) -> RadialProfile:
    """Radial translator over the ball of the given radius.

    ``rho`` is the prescribed boundary slope (the gradient image is the
    rho-ball). Bisection runs on the speed until phi(R) = rho to ``tol``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if sig == MINKOWSKI:
        if not 0.0 < rho < 1.0:
            raise ValueError("Minkowski boundary slope must lie in (0, 1)")
        c_max = 2.0 * (n / radius) * np.arctanh(rho) + 1.0
    elif sig == EUCLIDEAN:
        if rho <= 0:
            raise ValueError("boundary slope must be positive")
        c_max = 2.0 * (n / radius) * np.arctan(rho) + 1.0
    else:
        raise ValueError(f"unknown signature {sig!r}")

    def end_slope(c_speed):
        sol = _shoot(c_speed, radius, n, sig)
        return None if sol is None else float(sol.y[0, -1])

    lo, hi = 0.0, float(c_max)
    f_lo = 0.0 - rho  # C = 0 gives phi identically 0
    f_hi_slope = end_slope(hi)
    f_hi = np.inf if f_hi_slope is None else f_hi_slope - rho
    if not (f_lo < 0.0 < f_hi):
        raise OracleFailureError(
            f"no bracket for the shooting speed in (0, {c_max:.6g})"
        )
    prev_mid_slope = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        slope = end_slope(mid)
        val = np.inf if slope is None else slope - rho
        # empirical monotonicity check of phi(R) in C on this bracket
        if slope is not None and prev_mid_slope is not None:
            pm_c, pm_s = prev_mid_slope
            if (mid - pm_c) * (slope - pm_s) < -1e-13:
                raise OracleFailureError(
                    "phi(R) failed to be monotone in C; bisection invalid"
                )
        if slope is not None:
            prev_mid_slope = (mid, slope)
        if val < 0.0:
            lo = mid
        else:
            hi = mid
    c_speed = 0.5 * (lo + hi)
    sol = _shoot(c_speed, radius, n, sig, dense=True)
    if sol is None:
        raise OracleFailureError("converged speed failed to integrate densely")
    radii = np.concatenate([[0.0], sol.t])
    phi = np.concatenate([[0.0], sol.y[0]])
    if np.any(np.diff(phi) <= 0.0):
        raise OracleFailureError("shooting profile is not strictly increasing")
    return RadialProfile(radii=radii, phi=phi, c_speed=float(c_speed),
                         dimension=n, sig=sig)


def radial_ode_residual(profile: RadialProfile) -> float:
    """Max Simpson-rule defect of the profile against its ODE.

    Independent consistency check of the returned nodes: over each pair
    of intervals, phi(r_{k+1}) - phi(r_{k-1}) must match the Simpson
    quadrature of the right-hand side through the three node values.
    """
    rhs = _slope_ode(profile.c_speed, profile.dimension, profile.sig)
    r = profile.radii[1:]  # skip the synthetic r = 0 node
    phi = profile.phi[1:]
    f = np.array([rhs(rk, [pk])[0] for rk, pk in zip(r, phi)])
    dr = r[2] - r[1]
    lhs = phi[2::2] - phi[:-2:2]
    quad = (dr / 3.0) * (f[:-2:2] + 4.0 * f[1:-1:2] + f[2::2])
    return float(np.max(np.abs(lhs - quad)))


def fd_check_derivatives(samples: int, sig: str, eps_fd: float,
                         dims=(1, 2, 3), seed: int = 0,
                         paper_form: bool = False) -> float:
    """Worst relative error of the exact derivatives vs central differences.

    Draws random spacelike jets; every gradient component and every
    symmetric Hessian direction is checked. ``paper_form`` routes the
    gradient derivative through the broken printed transcription so the
    check suite can demonstrate its failure.
    """
    if not 1e-7 <= eps_fd <= 1e-3:
        raise ValueError("finite difference step must lie in [1e-7, 1e-3]")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        n = int(rng.choice(dims))
        if sig == MINKOWSKI:
            direction = rng.normal(size=n)
            direction /= np.linalg.norm(direction)
            p = direction * rng.uniform(0.0, 0.9)
        else:
            p = rng.normal(size=n)
        r = rng.normal(size=(n, n))
        r = 0.5 * (r + r.T)
        x = np.zeros(n)
        jet = PointJet(x=x, u=0.0, du=p, d2u=r)
        deriv = g_derivatives(jet, sig, paper_form=paper_form)

        scale = max(1.0, float(np.max(np.abs(deriv.g_p))),
                    float(np.max(np.abs(deriv.g_r))))
        for k in range(n):
            dp = np.zeros(n)
            dp[k] = eps_fd
            plus = g_value(PointJet(x=x, u=0.0, du=p + dp, d2u=r), sig)
            minus = g_value(PointJet(x=x, u=0.0, du=p - dp, d2u=r), sig)
            fd = (plus - minus) / (2.0 * eps_fd)
            worst = max(worst, abs(fd - deriv.g_p[k]) / scale)
        for i in range(n):
            for j in range(i, n):
                dr = np.zeros((n, n))
                dr[i, j] = eps_fd
                dr[j, i] = eps_fd
                plus = g_value(PointJet(x=x, u=0.0, du=p, d2u=r + dr), sig)
                minus = g_value(PointJet(x=x, u=0.0, du=p, d2u=r - dr), sig)
                fd = (plus - minus) / (2.0 * eps_fd)
                exact = deriv.g_r[i, j] + deriv.g_r[j, i] if i != j else deriv.g_r[i, i]
                worst = max(worst, abs(fd - exact) / scale)
    return worst
