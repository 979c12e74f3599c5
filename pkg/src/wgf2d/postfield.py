"""Near-field evaluation from solved windowed densities.

The defect field in layer j is reconstructed from windowed layer potentials
of the density deviations: with fg = (f_j, g_j) the planar jumps and
(phit, psit) the planar traces on the curve,

    u_d_1 = D_1^b[wA (phi - phit) - f] - nu_1 S_1^b[wA (psi - psit) - g]
    u_d_j = ... same over Gamma_j ... - D_j^t[wA (phi - phit)_{j-1}]
            + S_j^t[wA (psi - psit)_{j-1}]              (middle layers)
    u_d_N = - D_N^t[...] + S_N^t[...]                   (bottom layer)

and the total field is the planar-structure field plus the defect field.
Evaluation uses the plain trapezoid rule, which is spectrally accurate for
targets at least a couple of node spacings away from the curves; closer
targets get a quality flag rather than a fabricated value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._special import hankel01_with_j
from .errors import ConfigError
from .kernels import WindowParams
from .medium import eval_planar_field, planar_traces_and_jumps

_CHUNK = 2048


@dataclass(frozen=True)
class FieldGrid:
    """Sampled total field on a rectangle with layer map and quality mask."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int
    ny: int
    values: np.ndarray = field(repr=False)  # (ny, nx) complex, x fastest
    layer: np.ndarray = field(repr=False)  # (ny, nx) int
    mask: np.ndarray = field(repr=False)  # (ny, nx) uint8, 1 = near-curve

    def points(self):
        x = np.linspace(self.xmin, self.xmax, self.nx)
        y = np.linspace(self.ymin, self.ymax, self.ny)
        return x, y


class SolvedField:
    """Bundles a solved density with everything needed to evaluate fields."""

    def __init__(self, stack, sol, curves, grids, density, wp: WindowParams):
        self.stack = stack
        self.sol = sol
        self.curves = curves
        self.grids = grids
        self.density = density
        self.wp = wp
        self.eta_near = [2.0 * g.dt * float(np.max(g.speed)) for g in grids]
        # effective single- and double-layer densities per interface
        self._dl = []
        self._sl = []
        self._dl_top = []
        self._sl_top = []
        for g, phi, psi in zip(grids, density.phi, density.psi):
            phit, psit, f, gj = planar_traces_and_jumps(sol, stack, g.curve, g.t)
            w = g.wA
            self._dl.append(w * (phi - phit) - f)
            self._sl.append(w * (psi - psit) - gj)
            self._dl_top.append(w * (phi - phit))
            self._sl_top.append(w * (psi - psit))

    def defect_field(self, points, j: int, with_grad: bool = False):
        """Windowed defect field u_d_j at points of layer j (1-based).

        Returns (values, near_flags) or (values, grads, near_flags); the flag
        marks targets inside the near-curve exclusion band (values are still
        returned there but the plain trapezoid rule degrades).
        """
        stack = self.stack
        n = stack.n_layers
        if not 1 <= j <= n:
            raise ConfigError(f"layer index {j} outside 1..{n}")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        val = np.zeros(len(pts), dtype=complex)
        grad = np.zeros((len(pts), 2), dtype=complex)
        near = np.zeros(len(pts), dtype=bool)
        k_j = stack.wavenumbers[j - 1]
        if j <= n - 1:  # own bottom boundary Gamma_j
            g = self.grids[j - 1]
            nu = stack.nu[j - 1]
            v, gr, nr = _potential(k_j, g, self._dl[j - 1], self._sl[j - 1], nu, pts,
                                   self.eta_near[j - 1], with_grad)
            val += v
            near |= nr
            if with_grad:
                grad += gr
        if j >= 2:  # top boundary Gamma_{j-1}, opposite sign, no jumps
            g = self.grids[j - 2]
            v, gr, nr = _potential(k_j, g, self._dl_top[j - 2], self._sl_top[j - 2], 1.0,
                                   pts, self.eta_near[j - 2], with_grad)
            val -= v
            near |= nr
            if with_grad:
                grad -= gr
        if with_grad:
            return val, grad, near
        return val, near

    def total_field(self, points, j: int):
        """u_w = planar-structure field + windowed defect field, in layer j."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        up, _ = eval_planar_field(self.sol, self.stack, j, pts)
        ud, near = self.defect_field(pts, j)
        return up + ud, near

    def classify(self, points):
        """Layer index per point: 1 + number of curves the point lies below."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        layer = np.ones(len(pts), dtype=int)
        for c in self.curves:
            layer += (c.side_of(pts) < 0).astype(int)
        return layer

    def near_any_curve(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        flag = np.zeros(len(pts), dtype=bool)
        for g, eta in zip(self.grids, self.eta_near):
            for lo in range(0, len(pts), _CHUNK):
                sub = pts[lo : lo + _CHUNK]
                d2 = (sub[:, None, 0] - g.points[None, :, 0]) ** 2 + (
                    sub[:, None, 1] - g.points[None, :, 1]
                ) ** 2
                flag[lo : lo + _CHUNK] |= np.min(d2, axis=1) < eta * eta
        return flag


def _potential(k, grid, dl_density, sl_density, nu, targets, eta, with_grad):
    """D[dl] - nu S[sl] over one grid at off-curve targets (trapezoid)."""
    wq = grid.speed * grid.dt
    val = np.zeros(len(targets), dtype=complex)
    grad = np.zeros((len(targets), 2), dtype=complex) if with_grad else None
    near = np.zeros(len(targets), dtype=bool)
    for lo in range(0, len(targets), _CHUNK):
        tgt = targets[lo : lo + _CHUNK]
        dx = tgt[:, 0, None] - grid.points[None, :, 0]
        dy = tgt[:, 1, None] - grid.points[None, :, 1]
        r = np.sqrt(dx * dx + dy * dy)
        near[lo : lo + _CHUNK] = np.min(r, axis=1) < eta
        r = np.maximum(r, 1e-300)
        h0, h1, _, _ = hankel01_with_j(k * r)
        rn_s = (dx * grid.normals[None, :, 0] + dy * grid.normals[None, :, 1]) / r
        dkern = 0.25j * k * h1 * rn_s
        skern = 0.25j * h0
        val[lo : lo + _CHUNK] = dkern @ (wq * dl_density) - nu * (skern @ (wq * sl_density))
        if with_grad:
            # grad_x G = -(i k/4) H1 rhat ; grad_x dG/dn' per the N-type kernel
            gx_s = -0.25j * k * h1 * dx / r
            gy_s = -0.25j * k * h1 * dy / r
            common = 0.25j * k * ((k * h0 - 2.0 * h1 / r) * rn_s / r)
            gx_d = common * dx + 0.25j * k * (h1 / r) * grid.normals[None, :, 0]
            gy_d = common * dy + 0.25j * k * (h1 / r) * grid.normals[None, :, 1]
            grad[lo : lo + _CHUNK, 0] = gx_d @ (wq * dl_density) - nu * (gx_s @ (wq * sl_density))
            grad[lo : lo + _CHUNK, 1] = gy_d @ (wq * dl_density) - nu * (gy_s @ (wq * sl_density))
    return val, grad, near


def total_field_grid(state: SolvedField, rect, nx: int, ny: int) -> FieldGrid:
    """Total field u_w on a uniform nx-by-ny grid over rect = (xmin, xmax,
    ymin, ymax); points within the near-curve band keep a quality flag."""
    xmin, xmax, ymin, ymax = (float(v) for v in rect)
    ca = state.wp.c * state.wp.A
    if not (-ca <= xmin < xmax <= ca):
        raise ConfigError(
            f"near-field rectangle x-range must lie inside the reliable region "
            f"|x| <= cA = {ca:.3g}; increase the window size A"
        )
    x = np.linspace(xmin, xmax, nx)
    y = np.linspace(ymin, ymax, ny)
    xx, yy = np.meshgrid(x, y)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    layer = state.classify(pts)
    near = state.near_any_curve(pts)
    vals = np.zeros(len(pts), dtype=complex)
    for j in np.unique(layer):
        m = layer == j
        v, _ = state.total_field(pts[m], int(j))
        vals[m] = v
    return FieldGrid(
        xmin=xmin, xmax=xmax, ymin=ymin, ymax=ymax, nx=nx, ny=ny,
        values=vals.reshape(ny, nx),
        layer=layer.reshape(ny, nx),
        mask=near.reshape(ny, nx).astype(np.uint8),
    )


def green_identity_residual(stack, sol, wp: WindowParams, ppw: float = 10.0,
                            n_points: int = 20, rng_seed: int = 1234) -> float:
    """Representation-formula residual of the planar field on flat interfaces.

    Evaluates the free-space Green identities of every layer with windowed
    truncation of the flat-interface integrals and returns the maximum
    residual over interior sample points (at least one wavelength away from
    every plane).  This validates the representation machinery, not the
    method's windowed convergence rate, so the residual decays only slowly
    with A.
    """
    from .geometry import InterfaceCurve, discretize
    from .medium import incident_field, u_parallel_with_grad, Incidence

    n = stack.n_layers
    lam = stack.wavelength
    rng = np.random.default_rng(rng_seed)
    inc = Incidence(alpha=sol.alpha, amplitude=sol.scale)
    grids = []
    for j in range(1, n):
        k_ref = max(stack.wavenumbers[j - 1].real, stack.wavenumbers[j].real)
        grids.append(discretize(InterfaceCurve(j, stack.depth(j), None), wp.A, wp.c, ppw, k_ref))

    def I_term(k, grid, v, dv, targets):
        dx = targets[:, 0, None] - grid.points[None, :, 0]
        dy = targets[:, 1, None] - grid.points[None, :, 1]
        r = np.sqrt(dx * dx + dy * dy)
        h0, h1, _, _ = hankel01_with_j(k * r)
        rn_s = (dx * grid.normals[None, :, 0] + dy * grid.normals[None, :, 1]) / r
        wq = grid.wA * grid.speed * grid.dt
        return (0.25j * k * h1 * rn_s) @ (wq * v) - (0.25j * h0) @ (wq * dv)

    worst = 0.0
    half_w = 0.45 * wp.c * wp.A
    for j in range(1, n + 1):
        k_j = stack.wavenumbers[j - 1]
        if j == 1:
            ys = rng.uniform(-stack.depth(1) + lam, -stack.depth(1) + 3 * lam, n_points)
        elif j == n:
            ys = rng.uniform(-stack.depth(n - 1) - 3 * lam, -stack.depth(n - 1) - lam, n_points)
        else:
            lo, hi = -stack.depth(j), -stack.depth(j - 1)
            if hi - lo <= 2 * lam:
                ys = np.full(n_points, 0.5 * (lo + hi))
            else:
                ys = rng.uniform(lo + lam, hi - lam, n_points)
        pts = np.stack([rng.uniform(-half_w, half_w, n_points), ys], axis=-1)
        v_ref, _ = eval_planar_field(sol, stack, j, pts)
        acc = np.zeros(n_points, dtype=complex)
        if j <= n - 1:  # integral over own bottom plane P_j
            g = grids[j - 1]
            tr, gr = eval_planar_field(sol, stack, j, g.points)
            acc += I_term(k_j, g, tr, gr[:, 1], pts)
        if j >= 2:  # minus integral over top plane P_{j-1}
            g = grids[j - 2]
            tr, gr = eval_planar_field(sol, stack, j, g.points)
            acc -= I_term(k_j, g, tr, gr[:, 1], pts)
        if j == 1:
            vinc, _ = incident_field(stack, inc, pts)
            acc += vinc
        if j == n:
            vpar, _ = u_parallel_with_grad(stack, sol, pts)
            acc += vpar
        worst = max(worst, float(np.max(np.abs(acc - v_ref)) / np.max(np.abs(v_ref))))
    return worst
