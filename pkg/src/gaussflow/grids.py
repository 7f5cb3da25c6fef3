"""Structured grids with sparse gradient and Hessian stencil operators.

Two grid families cover the supported domains:

* ``LineGrid``: N+1 uniformly spaced nodes on an interval. Centered
  second-order stencils inside, one-sided second-order at the two ends.

* ``MappedDiskGrid``: a polar reference grid on the unit disk mapped by
  x = A xhat + c with A symmetric positive definite, so balls and
  ellipses get exact boundaries and an exact affine chain rule
  (grad_x = A^{-1} grad_xhat, Hess_x = A^{-1} Hess_xhat A^{-1}).
  The pole is a single shared unknown; its derivative rows come from a
  least-squares quadratic fit through the first ring, which is exact for
  quadratics and second-order accurate in general. Theta is periodic and
  the node count there must be even so antipodal stencils exist.

Every grid exposes the same surface: node coordinates, interior and
boundary index sets, sparse first/second derivative operators, and the
``gradient`` / ``hessian`` convenience evaluators used throughout the
solver and the monitors.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class LineGrid:
    """Uniform 1D grid on [a, b] with N intervals (N + 1 nodes)."""

    def __init__(self, a: float, b: float, n_cells: int):
        if n_cells < 4:
            raise ValueError("line grid needs at least 4 cells")
        if not b > a:
            raise ValueError("line grid needs a < b")
        self.dim = 1
        self.n_nodes = n_cells + 1
        self.h = (b - a) / n_cells
        x = np.linspace(a, b, self.n_nodes)
        self.nodes = x[:, None]
        self.interior = np.arange(1, n_cells)
        self.boundary = np.array([0, n_cells])
        # interior nodes whose stencils see only centered-scheme values;
        # residual audits that second-difference derived fields (mean
        # curvature and friends) are restricted to these, since derived
        # values at one-sided rows carry a different truncation constant.
        self.audit_interior = np.arange(2, n_cells - 1)
        self.h_ref = self.h
        self.anchor = int(np.argmin(np.abs(x - 0.5 * (a + b))))
        self._build_operators()

    def _build_operators(self):
        m = self.n_nodes
        h = self.h
        d1 = sp.lil_matrix((m, m))
        d2 = sp.lil_matrix((m, m))
        idx = np.arange(1, m - 1)
        d1[idx, idx - 1] = -0.5 / h
        d1[idx, idx + 1] = 0.5 / h
        d2[idx, idx - 1] = 1.0 / h**2
        d2[idx, idx] = -2.0 / h**2
        d2[idx, idx + 1] = 1.0 / h**2
        # one-sided second order rows at the ends
        d1[0, [0, 1, 2]] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
        d1[m - 1, [m - 3, m - 2, m - 1]] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
        d2[0, [0, 1, 2, 3]] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
        d2[m - 1, [m - 4, m - 3, m - 2, m - 1]] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
        self.d_first = [d1.tocsr()]
        self.d_second = [[d2.tocsr()]]

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return (self.d_first[0] @ u)[:, None]

    def hessian(self, u: np.ndarray) -> np.ndarray:
        return (self.d_second[0][0] @ u)[:, None, None]

    def monitor_tol(self, tau_max: float) -> float:
        """Truncation-scaled audit tolerance 10 (h^2 + tau_max h)."""
        return 10.0 * (self.h_ref**2 + tau_max * self.h_ref)


class MappedDiskGrid:
    """Polar grid on the unit disk pushed forward by x = A xhat + c."""

    def __init__(self, a_map, center, n_rho: int, n_theta: int):
        a_map = np.atleast_2d(np.asarray(a_map, dtype=float))
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if a_map.shape != (2, 2):
            raise ValueError("mapped disk grids are two-dimensional")
        if not np.allclose(a_map, a_map.T, atol=1e-13):
            raise ValueError("affine matrix must be symmetric")
        if np.linalg.eigvalsh(a_map)[0] <= 0:
            raise ValueError("affine matrix must be positive definite")
        if n_theta % 2 != 0:
            raise ValueError("n_theta must be even (antipodal stencils at the pole)")
        if n_rho < 4 or n_theta < 8:
            raise ValueError("disk grid needs n_rho >= 4 and n_theta >= 8")

        self.dim = 2
        self.a_map = a_map
        self.a_inv = np.linalg.inv(a_map)
        self.center = center
        self.n_rho = n_rho
        self.n_theta = n_theta
        self.d_rho = 1.0 / n_rho
        self.d_theta = 2.0 * np.pi / n_theta
        self.n_nodes = 1 + n_rho * n_theta

        rho = np.arange(1, n_rho + 1) * self.d_rho
        theta = np.arange(n_theta) * self.d_theta
        rr, tt = np.meshgrid(rho, theta, indexing="ij")
        ref = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
        ref = np.vstack([np.zeros((1, 2)), ref])
        self.ref_nodes = ref
        self.nodes = ref @ a_map.T + center

        self.boundary = np.arange(self.index(n_rho, 0), self.index(n_rho, 0) + n_theta)
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary] = False
        self.interior = np.nonzero(mask)[0]
        # rings 2 .. n_rho - 2: stencil-clean for audits of derived fields
        # (ring 1 sees the pole's fitted values, ring n_rho - 1 sees the
        # boundary's one-sided values)
        self.audit_interior = np.arange(self.index(2, 0),
                                        self.index(n_rho - 1, 0))
        self.anchor = 0  # pole sits at the centroid

        sigma_max = float(np.linalg.eigvalsh(a_map)[-1])
        self.h_ref = sigma_max * max(self.d_rho, self.d_theta)
        self._build_operators()

    def index(self, j: int, m: int) -> int:
        """Flat index of ring j >= 1, angle m (pole is index 0)."""
        return 1 + (j - 1) * self.n_theta + (m % self.n_theta)

    # -- polar stencil tables -------------------------------------------------

    def _polar_entries(self):
        """COO entry lists for u_rho, u_rhorho, u_theta, u_thetatheta, u_rhotheta."""
        nt = self.n_theta
        nr = self.n_rho
        drho, dth = self.d_rho, self.d_theta
        ent = {k: ([], [], []) for k in ("r", "rr", "t", "tt", "rt")}

        def add(key, row, col, val):
            ent[key][0].append(row)
            ent[key][1].append(col)
            ent[key][2].append(val)

        for j in range(1, nr + 1):
            for m in range(nt):
                row = self.index(j, m)
                below = 0 if j == 1 else self.index(j - 1, m)
                # theta derivatives: centered, periodic (pole row excluded)
                add("t", row, self.index(j, m + 1), 0.5 / dth)
                add("t", row, self.index(j, m - 1), -0.5 / dth)
                add("tt", row, self.index(j, m + 1), 1.0 / dth**2)
                add("tt", row, row, -2.0 / dth**2)
                add("tt", row, self.index(j, m - 1), 1.0 / dth**2)
                if j < nr:
                    above = self.index(j + 1, m)
                    add("r", row, above, 0.5 / drho)
                    add("r", row, below, -0.5 / drho)
                    add("rr", row, above, 1.0 / drho**2)
                    add("rr", row, row, -2.0 / drho**2)
                    add("rr", row, below, 1.0 / drho**2)
                    # centered cross term; u_theta vanishes at the pole
                    for mm, w in ((m + 1, 0.5 / dth), (m - 1, -0.5 / dth)):
                        add("rt", row, self.index(j + 1, mm), w * 0.5 / drho)
                        if j > 1:
                            add("rt", row, self.index(j - 1, mm), -w * 0.5 / drho)
                else:
                    # boundary ring: one-sided second order in rho
                    j1 = self.index(j - 1, m)
                    j2 = self.index(j - 2, m)
                    j3 = self.index(j - 3, m)
                    add("r", row, row, 1.5 / drho)
                    add("r", row, j1, -2.0 / drho)
                    add("r", row, j2, 0.5 / drho)
                    add("rr", row, row, 2.0 / drho**2)
                    add("rr", row, j1, -5.0 / drho**2)
                    add("rr", row, j2, 4.0 / drho**2)
                    add("rr", row, j3, -1.0 / drho**2)
                    for mm, w in ((m + 1, 0.5 / dth), (m - 1, -0.5 / dth)):
                        add("rt", row, self.index(j, mm), w * 1.5 / drho)
                        add("rt", row, self.index(j - 1, mm), -w * 2.0 / drho)
                        add("rt", row, self.index(j - 2, mm), w * 0.5 / drho)
        mats = {}
        for key, (rows, cols, vals) in ent.items():
            mats[key] = sp.coo_matrix(
                (vals, (rows, cols)), shape=(self.n_nodes, self.n_nodes)
            ).tocsr()
        return mats

    def _pole_fit_rows(self):
        """Least-squares quadratic fit rows for the pole derivatives.

        Fits u - u_pole ~ g . xhat + 0.5 xhat^T M xhat over the first ring;
        the five coefficients (g1, g2, M11, M12, M22) are resolved by the
        modes {cos, sin, const, cos2, sin2} on the ring, so one ring plus
        the pole determines the full reference jet.
        """
        nt = self.n_theta
        rho1 = self.d_rho
        theta = np.arange(nt) * self.d_theta
        xh = rho1 * np.cos(theta)
        yh = rho1 * np.sin(theta)
        basis = np.stack([xh, yh, 0.5 * xh * xh, xh * yh, 0.5 * yh * yh], axis=1)
        # weights: coeffs = W (u_ring - u_pole)
        w = np.linalg.pinv(basis)
        ring_cols = np.array([self.index(1, m) for m in range(nt)])
        return w, ring_cols

    def _build_operators(self):
        mats = self._polar_entries()
        n = self.n_nodes
        rho = np.linalg.norm(self.ref_nodes, axis=1)
        theta = np.arctan2(self.ref_nodes[:, 1], self.ref_nodes[:, 0])
        cos, sin = np.cos(theta), np.sin(theta)
        inv_rho = np.zeros(n)
        inv_rho[1:] = 1.0 / rho[1:]

        def dia(vec):
            return sp.diags(vec)

        d_r, d_rr = mats["r"], mats["rr"]
        d_t, d_tt = mats["t"], mats["tt"]
        d_rt = mats["rt"]

        # reference Cartesian derivatives from polar ones
        gx = dia(cos) @ d_r - dia(sin * inv_rho) @ d_t
        gy = dia(sin) @ d_r + dia(cos * inv_rho) @ d_t
        hxx = (
            dia(cos * cos) @ d_rr
            - dia(2.0 * cos * sin * inv_rho) @ d_rt
            + dia(sin * sin * inv_rho**2) @ d_tt
            + dia(sin * sin * inv_rho) @ d_r
            + dia(2.0 * cos * sin * inv_rho**2) @ d_t
        )
        hyy = (
            dia(sin * sin) @ d_rr
            + dia(2.0 * cos * sin * inv_rho) @ d_rt
            + dia(cos * cos * inv_rho**2) @ d_tt
            + dia(cos * cos * inv_rho) @ d_r
            - dia(2.0 * cos * sin * inv_rho**2) @ d_t
        )
        hxy = (
            dia(cos * sin) @ d_rr
            + dia((cos * cos - sin * sin) * inv_rho) @ d_rt
            - dia(cos * sin * inv_rho**2) @ d_tt
            - dia(cos * sin * inv_rho) @ d_r
            - dia((cos * cos - sin * sin) * inv_rho**2) @ d_t
        )

        # pole rows from the quadratic fit
        w_fit, ring_cols = self._pole_fit_rows()
        gx, gy, hxx, hxy, hyy = (m.tolil() for m in (gx, gy, hxx, hxy, hyy))
        for mat, krow in ((gx, 0), (gy, 1), (hxx, 2), (hxy, 3), (hyy, 4)):
            row = w_fit[krow]
            mat.rows[0] = [0] + list(ring_cols)
            mat.data[0] = [-float(np.sum(row))] + [float(v) for v in row]
        gx, gy, hxx, hxy, hyy = (m.tocsr() for m in (gx, gy, hxx, hxy, hyy))

        # affine chain rule to physical coordinates
        ai = self.a_inv
        ref_grad = [gx, gy]
        ref_hess = [[hxx, hxy], [hxy, hyy]]
        self.d_first = [
            sum(ai[k, l] * ref_grad[l] for l in range(2)) for k in range(2)
        ]
        self.d_second = [[None, None], [None, None]]
        for k in range(2):
            for l in range(k, 2):
                acc = sum(
                    ai[k, a] * ai[l, b] * ref_hess[a][b]
                    for a in range(2)
                    for b in range(2)
                )
                self.d_second[k][l] = acc.tocsr()
                self.d_second[l][k] = self.d_second[k][l]
        self.d_first = [m.tocsr() for m in self.d_first]

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return np.stack([self.d_first[k] @ u for k in range(2)], axis=1)

    def hessian(self, u: np.ndarray) -> np.ndarray:
        out = np.empty((self.n_nodes, 2, 2))
        out[:, 0, 0] = self.d_second[0][0] @ u
        out[:, 0, 1] = self.d_second[0][1] @ u
        out[:, 1, 0] = out[:, 0, 1]
        out[:, 1, 1] = self.d_second[1][1] @ u
        return out

    def monitor_tol(self, tau_max: float) -> float:
        return 10.0 * (self.h_ref**2 + tau_max * self.h_ref)
