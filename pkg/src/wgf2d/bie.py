"""Assembly of the windowed block-tridiagonal Nystrom system.

Interface j carries the density pair (phi_j, psi_j).  The diagonal block
E_j + T_j collects the self-interactions of Gamma_j with the wavenumbers of
the layers above (k_j) and below (k_{j+1}); the off-diagonal blocks L_j and
R_j couple adjacent interfaces through smooth kernels.  All weakly singular
parts are split against the periodized logarithm ln(4 sin^2((s - s')/2)) and
integrated with the Martensen-Kussmaul spectral weights; the open windowed
arc may be treated as periodic because every density is multiplied by the
window, which vanishes with all derivatives at the arc ends.

The difference of hypersingular operators N_{k_b} - N_{k_a} on a common
curve is assembled as a single weakly singular kernel: the wavenumber
independent 1/rho^2 poles cancel analytically (see kernels.lam_weak), and
only logarithmic parts remain.

The right-hand side is  phi_inc + T_P[W_A phi_p] - mu  where mu = T_P[phi_p]
has the closed form below and the windowed term is integrated numerically
over the flat interfaces: far planes by trapezoid on their grids, the
target's own plane by adaptive panel quadrature that refines dyadically
toward the target abscissa.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._special import bessel_sigma1, hankel01_with_j
from .errors import ConfigError, GeometryError, NumericsError
from .kernels import EULER_GAMMA, WindowParams, lam_weak, window_wA
from .medium import (
    LayerStack,
    PlanarSolution,
    eval_planar_field,
    incident_field,
    u_parallel_with_grad,
)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def nystrom_log_weights(n: int) -> np.ndarray:
    """Martensen-Kussmaul weights R_m for the kernel ln(4 sin^2((t - t')/2)).

    `n` is the (even) number of points of the uniform 2 pi periodic grid.
    Returns R indexed by the circular node distance m = 0 .. n-1; with
    p = n/2,

        R_m = -(2 pi / p) sum_{k=1}^{p-1} cos(k m pi / p)/k - (-1)^m pi/p^2.
    """
    if n % 2 or n < 8:
        raise ConfigError("log-weight rule needs an even node count >= 8")
    p = n // 2
    m = np.arange(n)
    k = np.arange(1, p)
    table = np.cos(np.pi / p * np.outer(m, k)) @ (1.0 / k)
    return -(2.0 * np.pi / p) * table - np.pi / p**2 * (-1.0) ** m


@dataclass(frozen=True)
class OperatorBlock:
    """One assembled 2M_row x 2M_col operator block."""

    mat: np.ndarray = field(repr=False)
    row_interface: int
    col_interface: int
    kind: str  # "T", "L" or "R"


class _SelfGeometry:
    """Pairwise geometry of one grid, shared by all self-block kernels."""

    def __init__(self, grid):
        pts = grid.points
        nrm = grid.normals
        m = grid.n_nodes
        dx = pts[:, 0, None] - pts[None, :, 0]
        dy = pts[:, 1, None] - pts[None, :, 1]
        r = np.sqrt(dx * dx + dy * dy)
        np.fill_diagonal(r, 1.0)  # masked; diagonal handled by limits
        self.r = r
        self.rn_tgt = (dx * nrm[:, 0, None] + dy * nrm[:, 1, None]) / r
        self.rn_src = (dx * nrm[None, :, 0] + dy * nrm[None, :, 1]) / r
        np.fill_diagonal(self.rn_tgt, 0.0)
        np.fill_diagonal(self.rn_src, 0.0)
        self.nn = nrm @ nrm.T
        s = grid.s
        self.abs_sin = np.abs(np.sin(0.5 * (s[:, None] - s[None, :])))
        np.fill_diagonal(self.abs_sin, 1.0)  # masked with r's diagonal
        ln4s = 2.0 * np.log(2.0 * self.abs_sin)
        np.fill_diagonal(ln4s, 0.0)
        self.ln4s = ln4s
        idx = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
        self.logw = nystrom_log_weights(m)[idx]
        self.h = 2.0 * np.pi / m
        self.jac_s = grid.jac_s
        # curvature-limit diagonal of the double layer (parametrization free)
        sec = grid.curve.second(grid.t)
        sp = grid.speed
        self.dl_diag = np.sum(sec * nrm, axis=-1) / (4.0 * np.pi * sp * sp)
        self.grid = grid
        self._packs = {}

    def hankel_pack(self, k):
        key = complex(k)
        if key not in self._packs:
            self._packs[key] = hankel01_with_j(k * self.r)
        return self._packs[key]


def _self_single_layer(geo: _SelfGeometry, k):
    """M x M Nystrom matrix of S_k on the grid (jacobian folded in)."""
    h0, _, j0, _ = geo.hankel_pack(k)
    a = -j0 / (4.0 * np.pi)
    np.fill_diagonal(a, -1.0 / (4.0 * np.pi))  # J0(0) = 1
    b = 0.25j * h0 - a * geo.ln4s
    np.fill_diagonal(
        b, 0.25j - EULER_GAMMA / (2.0 * np.pi) - np.log(0.5 * k * geo.jac_s) / (2.0 * np.pi)
    )
    return (a * geo.logw + b * geo.h) * geo.jac_s[None, :]


def _self_double_layer(geo: _SelfGeometry, k, adjoint: bool):
    _, h1, _, j1 = geo.hankel_pack(k)
    rn = geo.rn_tgt if adjoint else geo.rn_src
    sgn = -1.0 if adjoint else 1.0
    kern = sgn * 0.25j * k * h1 * rn
    a = -sgn * k * j1 * rn / (4.0 * np.pi)
    b = kern - a * geo.ln4s
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(b, geo.dl_diag)
    return (a * geo.logw + b * geo.h) * geo.jac_s[None, :]


def _self_hyper_diff(geo: _SelfGeometry, k_b, k_a):
    """N_{k_b} - N_{k_a} on one curve as a weakly singular kernel.

    The 1/rho^2 poles are wavenumber independent and cancel analytically, so
    the difference splits into H0-type log parts plus the difference of the
    lam_weak remainders, whose log coefficient is -k J1(k rho)/(4 pi rho).
    """
    h0b, _, j0b, j1b = geo.hankel_pack(k_b)
    h0a, _, j0a, j1a = geo.hankel_pack(k_a)
    rr = geo.rn_tgt * geo.rn_src
    f2 = geo.nn - 2.0 * rr

    a1 = -(k_b**2 * j0b - k_a**2 * j0a) / (4.0 * np.pi) * rr
    b1 = 0.25j * (k_b**2 * h0b - k_a**2 * h0a) * rr - a1 * geo.ln4s
    np.fill_diagonal(a1, 0.0)
    np.fill_diagonal(b1, 0.0)

    def lam_log(k, j1k):
        return -k * j1k / (4.0 * np.pi * geo.r)

    def lam_smooth(k, j1k):
        lnratio = np.log(4.0 * geo.abs_sin / (k * geo.r))
        return (
            0.25j * k * j1k / geo.r
            + (k / (2.0 * np.pi * geo.r)) * j1k * lnratio
            + (k / (4.0 * np.pi * geo.r)) * bessel_sigma1(k * geo.r)
        )

    def diag_smooth(k):
        return (
            0.125j * k**2
            + (k**2 / (4.0 * np.pi)) * np.log(2.0 / (k * geo.jac_s))
            + (k**2) * (1.0 - 2.0 * EULER_GAMMA) / (8.0 * np.pi)
        )

    a2 = f2 * (lam_log(k_b, j1b) - lam_log(k_a, j1a))
    np.fill_diagonal(a2, -(k_b**2 - k_a**2) / (8.0 * np.pi))
    b2 = f2 * (lam_smooth(k_b, j1b) - lam_smooth(k_a, j1a))
    np.fill_diagonal(b2, diag_smooth(k_b) - diag_smooth(k_a))
    return ((a1 + a2) * geo.logw + (b1 + b2) * geo.h) * geo.jac_s[None, :]


def assemble_self_block(stack: LayerStack, curve, grid, window: WindowParams) -> OperatorBlock:
    """Diagonal operator block T_j of interface j (window not yet applied)."""
    j = grid.interface_index
    k_a = stack.wavenumbers[j - 1]
    k_b = stack.wavenumbers[j]
    nu = stack.nu[j - 1]
    if len(np.unique(grid.t)) != grid.n_nodes:
        raise NumericsError("duplicate quadrature nodes in grid")
    geo = _SelfGeometry(grid)
    a11 = _self_double_layer(geo, k_b, adjoint=False) - _self_double_layer(geo, k_a, adjoint=False)
    a12 = -_self_single_layer(geo, k_b) + nu * _self_single_layer(geo, k_a)
    a21 = _self_hyper_diff(geo, k_b, k_a)
    a22 = -_self_double_layer(geo, k_b, adjoint=True) + nu * _self_double_layer(geo, k_a, adjoint=True)
    mat = np.block([[a11, a12], [a21, a22]])
    return OperatorBlock(mat=mat, row_interface=j, col_interface=j, kind="T")


def _cross_kernels(k, tgt_pts, tgt_nrm, src_pts, src_nrm):
    """Smooth kernel values between disjoint point sets (no weights)."""
    dx = tgt_pts[:, 0, None] - src_pts[None, :, 0]
    dy = tgt_pts[:, 1, None] - src_pts[None, :, 1]
    r = np.sqrt(dx * dx + dy * dy)
    if np.any(r == 0.0):
        raise GeometryError("coincident points between supposedly disjoint curves")
    rn_t = (dx * tgt_nrm[:, 0, None] + dy * tgt_nrm[:, 1, None]) / r
    rn_s = (dx * src_nrm[None, :, 0] + dy * src_nrm[None, :, 1]) / r
    nn = tgt_nrm @ src_nrm.T
    h0, h1, _, _ = hankel01_with_j(k * r)
    s_k = 0.25j * h0
    d_k = 0.25j * k * h1 * rn_s
    k_k = -0.25j * k * h1 * rn_t
    n_k = 0.25j * k * ((k * h0 - 2.0 * h1 / r) * rn_t * rn_s + (h1 / r) * nn)
    return s_k, d_k, k_k, n_k


def assemble_coupling_block(stack: LayerStack, row_grid, col_grid, window: WindowParams,
                            kind: str) -> OperatorBlock:
    """Off-diagonal block L_j (col = j-1) or R_j (col = j+1), trapezoid rule."""
    j = row_grid.interface_index
    i = col_grid.interface_index
    if kind == "L":
        if i != j - 1:
            raise ConfigError("L block couples interface j with j-1")
        k = stack.wavenumbers[j - 1]  # layer j lies between the two interfaces
        sgn_d, fac_s = 1.0, -1.0
    elif kind == "R":
        if i != j + 1:
            raise ConfigError("R block couples interface j with j+1")
        k = stack.wavenumbers[j]  # layer j+1
        sgn_d, fac_s = -1.0, stack.nu[j]
    else:
        raise ConfigError(f"unknown coupling kind {kind!r}")
    s_k, d_k, k_k, n_k = _cross_kernels(
        k, row_grid.points, row_grid.normals, col_grid.points, col_grid.normals
    )
    wq = (col_grid.speed * col_grid.dt)[None, :]
    a11 = sgn_d * d_k * wq
    a12 = fac_s * s_k * wq
    a21 = sgn_d * n_k * wq
    a22 = fac_s * k_k * wq
    mat = np.block([[a11, a12], [a21, a22]])
    return OperatorBlock(mat=mat, row_interface=j, col_interface=i, kind=kind)


# --------------------------------------------------------------------------
# right-hand side: closed-form mu and the windowed flat-interface action
# --------------------------------------------------------------------------

def _planar_interface_density(stack, sol, i, x):
    """Traces (phi_p_i, psi_p_i) of the planar field on the flat plane P_i."""
    pts = np.stack([x, np.full_like(x, -stack.depth(i))], axis=-1)
    val, grad = eval_planar_field(sol, stack, i + 1, pts)
    return val, grad[..., 1]  # normal on P_i is (0, 1)


def closed_form_mu(stack: LayerStack, sol: PlanarSolution, j: int, points, normals,
                   eps_geom: float, include_delta: bool = True):
    """Closed form of (T_P[phi_p])_j at nodes of Gamma_j.

    On the flat portion (|y + d_j| <= eps_geom) the value is
    delta_{1,j} phi_inc + delta_{N-1,j} phi_par - E_j [phi_p_j, psi_p_j];
    off the plane the last term is replaced by [u_p, grad u_p . n] evaluated
    with the formula of the slab that contains the node.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    n = stack.n_layers
    d_j = stack.depth(j)
    dy = pts[:, 1] + d_j
    thick_up = np.inf if j == 1 else d_j - stack.depth(j - 1)
    thick_dn = np.inf if j == stack.n_interfaces else stack.depth(j + 1) - d_j
    if np.any(dy > thick_up) or np.any(dy < -thick_dn):
        raise GeometryError(f"node claimed on interface {j} lies beyond the adjacent planes")

    val = np.zeros(len(pts), dtype=complex)
    der = np.zeros(len(pts), dtype=complex)
    on = np.abs(dy) <= eps_geom
    if np.any(on):
        p_on = pts[on].copy()
        p_on[:, 1] = -d_j  # snap to the plane for the principal-value branch
        v, g = eval_planar_field(sol, stack, j + 1, p_on)
        dn = np.sum(g * nrm[on], axis=-1)
        val[on] = -v
        der[on] = -(1.0 + stack.nu[j - 1]) / 2.0 * dn
    off = ~on
    if np.any(off):
        layer = np.where(dy[off] > 0.0, j, j + 1)
        for ell in np.unique(layer):
            sub = off.nonzero()[0][layer == ell]
            v, g = eval_planar_field(sol, stack, int(ell), pts[sub])
            val[sub] = -v
            der[sub] = -np.sum(g * nrm[sub], axis=-1)
    if include_delta:
        if j == 1:
            v, g = incident_field(stack, _inc_of(sol), pts)
            val += v
            der += np.sum(g * nrm, axis=-1)
        if j == n - 1:
            v, g = u_parallel_with_grad(stack, sol, pts)
            val += v
            der += np.sum(g * nrm, axis=-1)
    return val, der


def _inc_of(sol: PlanarSolution):
    from .medium import Incidence

    return Incidence(alpha=sol.alpha, amplitude=sol.scale)


def _panel_nodes(x_star: float, dy: float, A: float, c: float, k_max: float):
    """Dyadically refined Gauss panels on [-A, A] split at x_star.

    Panels halve toward x_star until the innermost width falls below the
    target distance |dy| (or near machine scale when dy = 0), which resolves
    the log/near-log singularity; away from the singularity panels are
    capped at one minimum wavelength so the 16-point Gauss rule resolves the
    kernel oscillation, and the window rise regions [cA, A] get a fixed
    subdivision since the window is not analytic at their ends.
    """
    floor = max(abs(dy), 1e-13 * A)
    cap = 2.0 * np.pi / k_max  # one minimum wavelength per panel
    breaks = {-A, A, -c * A, c * A, x_star}
    for lo, hi in ((-A, -c * A), (c * A, A)):
        breaks.update(np.linspace(lo, hi, 9).tolist())
    for side in (-1.0, 1.0):
        end = A * side
        span = abs(end - x_star)
        if span < 1e-14 * A:
            continue
        w = span
        while w > floor and w > 1e-15 * A:
            w *= 0.5
            breaks.add(x_star + side * w)
    edges = sorted(b for b in breaks if -A <= b <= A)
    refined = [edges[0]]
    for e in edges[1:]:
        base = refined[-1]
        gap = e - base
        if gap > cap:
            nsplit = int(np.ceil(gap / cap))
            refined.extend([base + gap * (i + 1) / nsplit for i in range(nsplit)])
        else:
            refined.append(e)
    edges = np.asarray(refined)
    lo = edges[:-1]
    hi = edges[1:]
    keep = hi - lo > 1e-16 * A
    lo, hi = lo[keep], hi[keep]
    mid = 0.5 * (lo + hi)[:, None]
    half = 0.5 * (hi - lo)[:, None]
    xq = (mid + half * _GL_NODES[None, :]).ravel()
    wq = (half * _GL_WEIGHTS[None, :]).ravel()
    return xq, wq


def _lam_weak_from_pack(k, z, rho, h1, j1):
    """lam_weak reusing an existing Hankel pack at z = k * rho."""
    out = np.empty(rho.shape, dtype=complex)
    small = np.abs(z) < 0.5
    if np.any(small):
        zs = z[small]
        rs = rho[small]
        sig = bessel_sigma1(zs)
        out[small] = (
            0.25j * k * j1[small] / rs
            - (k / (2.0 * np.pi * rs)) * np.log(0.5 * zs) * j1[small]
            + (k / (4.0 * np.pi * rs)) * sig
        )
    big = ~small
    if np.any(big):
        rb = rho[big]
        out[big] = 0.25j * k * h1[big] / rb - 1.0 / (2.0 * np.pi * rb * rb)
    return out


def _tp_self_plane(stack, sol, j, tgt_pts, tgt_nrm, wp: WindowParams, eps_geom: float,
                   chunk: int = 64):
    """T_j^P action of the windowed planar density of plane P_j at targets on
    Gamma_j, by panel quadrature (targets may lie on or near the plane).

    Targets are processed in chunks whose panel nodes are concatenated, so
    the special functions run on large arrays and the per-target sums come
    from segment reductions.
    """
    k_a = stack.wavenumbers[j - 1]
    k_b = stack.wavenumbers[j]
    nu = stack.nu[j - 1]
    k_max = max(abs(k_a), abs(k_b))
    d_j = stack.depth(j)
    n_t = len(tgt_pts)
    val = np.zeros(n_t, dtype=complex)
    der = np.zeros(n_t, dtype=complex)
    for lo in range(0, n_t, chunk):
        hi = min(lo + chunk, n_t)
        xq_list, wq_list, dy_list = [], [], []
        for idx in range(lo, hi):
            dy = tgt_pts[idx, 1] + d_j
            if abs(dy) <= eps_geom:
                dy = 0.0  # principal-value convention, matching closed_form_mu
            x_star = float(np.clip(tgt_pts[idx, 0], -wp.A, wp.A))
            xq_i, wq_i = _panel_nodes(x_star, dy, wp.A, wp.c, k_max)
            xq_list.append(xq_i)
            wq_list.append(wq_i)
            dy_list.append(dy)
        counts = np.array([len(x) for x in xq_list])
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        xq = np.concatenate(xq_list)
        wq = np.concatenate(wq_list)
        dyv = np.repeat(np.array(dy_list), counts)
        xt = np.repeat(tgt_pts[lo:hi, 0], counts)
        ntx = np.repeat(tgt_nrm[lo:hi, 0], counts)
        nty = np.repeat(tgt_nrm[lo:hi, 1], counts)

        g1, g2 = _planar_interface_density(stack, sol, j, xq)
        w = window_wA(xq, wp)
        g1 = g1 * w
        g2 = g2 * w
        dxt = xt - xq
        rho = np.sqrt(dxt * dxt + dyv * dyv)
        za = k_a * rho
        zb = k_b * rho
        h0a, h1a, _, j1a = hankel01_with_j(za)
        h0b, h1b, _, j1b = hankel01_with_j(zb)
        rn_t = (dxt * ntx + dyv * nty) / rho
        rn_s = dyv / rho
        lam_a = _lam_weak_from_pack(k_a, za, rho, h1a, j1a)
        lam_b = _lam_weak_from_pack(k_b, zb, rho, h1b, j1b)
        f2 = nty - 2.0 * rn_t * rn_s
        n_diff = 0.25j * (k_b**2 * h0b - k_a**2 * h0a) * rn_t * rn_s + f2 * (lam_b - lam_a)
        v_int = wq * (
            (0.25j * k_b * h1b - 0.25j * k_a * h1a) * rn_s * g1
            + (-0.25j * h0b + nu * 0.25j * h0a) * g2
        )
        d_int = wq * (
            n_diff * g1 + (0.25j * k_b * h1b - nu * 0.25j * k_a * h1a) * rn_t * g2
        )
        val[lo:hi] = np.add.reduceat(v_int, starts)
        der[lo:hi] = np.add.reduceat(d_int, starts)
    return val, der


def tp_windowed(stack, sol, grids, fp_grids, wp: WindowParams, eps_geom: float):
    """(T_P[W_A phi_p])_j at every node of every interface grid.

    Far planes contribute through the trapezoid rule on their own windowed
    grids; the target's own plane through the panel rule above.
    """
    n_if = stack.n_interfaces
    dens = []
    for i in range(1, n_if + 1):
        g1, g2 = _planar_interface_density(stack, sol, i, fp_grids[i - 1].points[:, 0])
        w = fp_grids[i - 1].wA
        dens.append((g1 * w, g2 * w))
    out = []
    for j in range(1, n_if + 1):
        grid = grids[j - 1]
        val = np.zeros(grid.n_nodes, dtype=complex)
        der = np.zeros(grid.n_nodes, dtype=complex)
        if j >= 2:  # L-part over P_{j-1}, wavenumber k_j
            fg = fp_grids[j - 2]
            s_k, d_k, k_k, n_k = _cross_kernels(
                stack.wavenumbers[j - 1], grid.points, grid.normals, fg.points, fg.normals
            )
            wq = fg.speed * fg.dt
            g1, g2 = dens[j - 2]
            val += d_k @ (wq * g1) - s_k @ (wq * g2)
            der += n_k @ (wq * g1) - k_k @ (wq * g2)
            del s_k, d_k, k_k, n_k
        if j <= n_if - 1:  # R-part over P_{j+1}, wavenumber k_{j+1}
            fg = fp_grids[j]
            s_k, d_k, k_k, n_k = _cross_kernels(
                stack.wavenumbers[j], grid.points, grid.normals, fg.points, fg.normals
            )
            wq = fg.speed * fg.dt
            g1, g2 = dens[j]
            nu1 = stack.nu[j]
            val += -d_k @ (wq * g1) + nu1 * (s_k @ (wq * g2))
            der += -n_k @ (wq * g1) + nu1 * (k_k @ (wq * g2))
            del s_k, d_k, k_k, n_k
        v, w_ = _tp_self_plane(stack, sol, j, grid.points, grid.normals, wp, eps_geom)
        val += v
        der += w_
        out.append((val, der))
    return out


@dataclass(frozen=True)
class WindowedSystem:
    """Dense windowed Nystrom system with node metadata."""

    matrix: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    grids: list = field(repr=False)
    offsets: tuple
    wp: WindowParams
    stack: LayerStack = field(repr=False)
    sol: PlanarSolution = field(repr=False)
    eps_geom: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def block(self, row_if: int, col_if: int) -> np.ndarray:
        r0 = self.offsets[row_if - 1]
        r1 = self.offsets[row_if]
        c0 = self.offsets[col_if - 1]
        c1 = self.offsets[col_if]
        return self.matrix[r0:r1, c0:c1]


def assemble_system(stack: LayerStack, sol: PlanarSolution, curves, grids,
                    window: WindowParams) -> WindowedSystem:
    """Assemble matrix and right-hand side of the windowed system."""
    n_if = stack.n_interfaces
    if len(grids) != n_if:
        raise ConfigError(f"expected {n_if} grids, got {len(grids)}")
    sizes = [2 * g.n_nodes for g in grids]
    offsets = tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist())
    ntot = offsets[-1]
    eps_geom = 1e-12 * max(1.0, window.A, stack.depths[-1] - stack.depths[0])

    mat = np.zeros((ntot, ntot), dtype=complex)
    for j in range(1, n_if + 1):
        g = grids[j - 1]
        m = g.n_nodes
        o = offsets[j - 1]
        blk = assemble_self_block(stack, curves[j - 1], g, window).mat
        wcol = np.concatenate([g.wA, g.wA])
        mat[o : o + 2 * m, o : o + 2 * m] = blk * wcol[None, :]
        # identity part E_j
        idx = np.arange(m)
        mat[o + idx, o + idx] += 1.0
        mat[o + m + idx, o + m + idx] += 0.5 * (1.0 + stack.nu[j - 1])
        del blk
        if j >= 2:
            gc = grids[j - 2]
            blk = assemble_coupling_block(stack, g, gc, window, "L").mat
            wcol = np.concatenate([gc.wA, gc.wA])
            oc = offsets[j - 2]
            mat[o : o + 2 * m, oc : oc + 2 * gc.n_nodes] = blk * wcol[None, :]
            del blk
        if j <= n_if - 1:
            gc = grids[j]
            blk = assemble_coupling_block(stack, g, gc, window, "R").mat
            wcol = np.concatenate([gc.wA, gc.wA])
            oc = offsets[j]
            mat[o : o + 2 * m, oc : oc + 2 * gc.n_nodes] = blk * wcol[None, :]
            del blk

    # flat-plane grids for the windowed T_P term reuse the discretize rule
    from .geometry import InterfaceCurve, discretize

    fp_grids = []
    for j in range(1, n_if + 1):
        g = grids[j - 1]
        flat = InterfaceCurve(j, stack.depth(j), None)
        fp_grids.append(discretize(flat, g.A, g.c, g.ppw, g.k_ref))

    tp = tp_windowed(stack, sol, grids, fp_grids, window, eps_geom)
    rhs = np.zeros(ntot, dtype=complex)
    for j in range(1, n_if + 1):
        g = grids[j - 1]
        m = g.n_nodes
        o = offsets[j - 1]
        val, der = tp[j - 1]
        mu_v, mu_d = closed_form_mu(stack, sol, j, g.points, g.normals, eps_geom)
        if j == 1:
            v, gr = incident_field(stack, _inc_of(sol), g.points)
            val = val + v
            der = der + np.sum(gr * g.normals, axis=-1)
        if j == n_if:
            v, gr = u_parallel_with_grad(stack, sol, g.points)
            val = val + v
            der = der + np.sum(gr * g.normals, axis=-1)
        rhs[o : o + m] = val - mu_v
        rhs[o + m : o + 2 * m] = der - mu_d
    return WindowedSystem(
        matrix=mat,
        rhs=rhs,
        grids=list(grids),
        offsets=offsets,
        wp=window,
        stack=stack,
        sol=sol,
        eps_geom=eps_geom,
    )
