"""Far fields for the three-layer slab (k_1 = k_3).

The layer Green function with target r (cos t, sin t) in the top layer and
source in layer j has the spectral form

    H_j(r, r') = (1/4 pi) Int_SC p_j(xi, r')/q(xi) e^{|r| phi(xi)} d xi,
    phi(xi) = i xi cos t - gamma_1(xi) sin t,   gamma_j = sqrt(xi^2 - k_j^2),

with branch windows -3pi/2 <= arg(xi - k_j) < pi/2 and
-pi/2 <= arg(xi + k_j) < 3pi/2.  Deforming to the steepest-descent path
yields the two-term far-field form: a residue sum over the real guided-mode
poles crossed by the deformation (the set I below) plus the saddle-point
contribution at xi_0 = k_1 cos t.

The guided-mode poles are the zeros of q on (k_1, k_2).  There q has unit
modulus structure: q = 1 + exp(i Theta) with a real, strictly decreasing
phase Theta, so the zeros are located by a sign-change scan of the rotated
real quantity Re(q e^{-i Theta / 2}) = 2 cos(Theta/2) refined by bisection.
(The bare q is not real-valued on the interval; only the rotated form is.)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericsError
from .medium import LayerStack

__all__ = [
    "SlabSpectral",
    "FarFieldPattern",
    "find_guided_poles",
    "hf_eval",
    "far_pattern",
]


def _sqrt_minus(w):
    """sqrt with arg(w) folded into [-3pi/2, pi/2)."""
    w = np.asarray(w, dtype=complex)
    r = np.sqrt(w)
    flip = np.angle(w) >= 0.5 * np.pi
    return np.where(flip, -r, r)


def _sqrt_plus(w):
    """sqrt with arg(w) folded into [-pi/2, 3pi/2)."""
    w = np.asarray(w, dtype=complex)
    r = np.sqrt(w)
    flip = np.angle(w) < -0.5 * np.pi
    return np.where(flip, -r, r)


@dataclass(frozen=True)
class SlabSpectral:
    """Spectral machinery of a slab: k1 = k3, interfaces at 0 and -d2."""

    k1: float
    k2: float
    d2: float
    nu1: float = 1.0
    nu2: float = 1.0
    y_shift: float = 0.0  # added to физical y to reach normalized coords

    @classmethod
    def from_stack(cls, stack: LayerStack) -> "SlabSpectral":
        if stack.n_layers != 3:
            raise ConfigError("far fields are implemented for three-layer slabs only")
        k1, k2, k3 = stack.wavenumbers
        if abs(k1.imag) > 0 or abs(k2.imag) > 0 or abs(k3.imag) > 0:
            raise ConfigError("far-field machinery requires a lossless slab")
        if abs(k1 - k3) > 1e-12 * abs(k1):
            raise ConfigError("far-field machinery requires k_1 = k_3")
        return cls(
            k1=k1.real,
            k2=k2.real,
            d2=stack.depth(2) - stack.depth(1),
            nu1=stack.nu[0],
            nu2=stack.nu[1],
            y_shift=stack.depth(1),
        )

    def gammas(self, xi):
        xi = np.asarray(xi, dtype=complex)
        g1 = _sqrt_minus(xi - self.k1) * _sqrt_plus(xi + self.k1)
        g2 = _sqrt_minus(xi - self.k2) * _sqrt_plus(xi + self.k2)
        return g1, g2

    def fresnel(self, xi):
        g1, g2 = self.gammas(xi)
        r12 = (g1 - self.nu1 * g2) / (g1 + self.nu1 * g2)
        r23 = (g2 - self.nu2 * g1) / (g2 + self.nu2 * g1)
        return g1, g2, r12, r23

    def q(self, xi):
        g1, g2, r12, r23 = self.fresnel(xi)
        return 1.0 + r12 * r23 * np.exp(-2.0 * g2 * self.d2)

    def q_prime(self, xi):
        """Analytic derivative of q (closed form)."""
        xi = np.asarray(xi, dtype=complex)
        g1, g2, r12, r23 = self.fresnel(xi)
        k1sq, k2sq = self.k1**2, self.k2**2
        dr12 = 2.0 * self.nu1 * xi * (k1sq - k2sq) / (g1 * g2 * (g1 + self.nu1 * g2) ** 2)
        dr23 = 2.0 * self.nu2 * xi * (k2sq - k1sq) / (g2 * g1 * (g2 + self.nu2 * g1) ** 2)
        e = np.exp(-2.0 * g2 * self.d2)
        return (dr12 * r23 + r12 * dr23 - 2.0 * self.d2 * (xi / g2) * r12 * r23) * e

    def p_amp(self, xi, src, layer: int, with_grad: bool = False):
        """Spectral source amplitude p_j(xi, r') for sources in layer j.

        `xi` has shape (K,), `src` shape (M, 2); returns shape (K, M) (and
        the source-point gradient of shape (K, M, 2) when requested).  The
        normalization shift putting the first interface at y = 0 is applied
        here.
        """
        xi = np.asarray(xi, dtype=complex)[:, None]
        src = np.atleast_2d(np.asarray(src, dtype=float))
        xs = src[None, :, 0]
        ys = src[None, :, 1] + self.y_shift
        g1, g2, r12, r23 = (v[:, None] for v in self.fresnel(xi[:, 0]))
        g3 = g1
        ex = np.exp(-1j * xi * xs)
        if layer == 1:
            amp = (r12 + r23 * np.exp(-2.0 * g2 * self.d2)) / g1
            val = amp * ex * np.exp(-g1 * ys)
            if not with_grad:
                return val
            return val, np.stack(np.broadcast_arrays(-1j * xi * val, -g1 * val), axis=-1)
        if layer == 2:
            f_up = np.exp(g2 * ys)
            f_dn = r23 * np.exp(-2.0 * g2 * self.d2) * np.exp(-g2 * ys)
            base = (1.0 - r12) / g2 * ex
            val = base * (f_up + f_dn)
            if not with_grad:
                return val
            dy = base * g2 * (f_up - f_dn)
            return val, np.stack(np.broadcast_arrays(-1j * xi * val, dy), axis=-1)
        if layer == 3:
            amp = (1.0 - r12) * (1.0 - r23) * np.exp(-g2 * self.d2) / g3
            val = amp * ex * np.exp(g3 * (ys + self.d2))
            if not with_grad:
                return val
            return val, np.stack(np.broadcast_arrays(-1j * xi * val, g3 * val), axis=-1)
        raise ConfigError(f"source layer must be 1, 2 or 3, got {layer}")

    def dispersion_F(self, xi):
        """Real dispersion function on (k1, k2), zero exactly at the poles.

        On the interval q = 1 + e^{i Theta} with real strictly decreasing
        Theta (gamma_1 real, gamma_2 imaginary there), so q vanishes exactly
        where Theta hits odd multiples of pi.  F = arg(-(q - 1)) wraps Theta
        around those points: it is continuous through every pole, crosses
        zero there, and wraps (harmlessly) only where q = 2.
        """
        xi = np.asarray(xi, dtype=float)
        return np.angle(1.0 - self.q(xi))


def find_guided_poles(slab: SlabSpectral, n_scan: int = 10_000) -> np.ndarray:
    """Real zeros of q on (k1, k2): the slab guided-mode propagation constants.

    Located by a sign-change scan of the rotated real dispersion quantity on
    a uniform grid, refined by bisection to ~1e-12 absolute in xi.  Returns
    an empty array when k2 <= k1 (no guiding possible).
    """
    if slab.k2 <= slab.k1:
        return np.asarray([], dtype=float)
    eps = 1e-9 * slab.k1
    lo, hi = slab.k1 + eps, slab.k2 - eps
    xi = np.linspace(lo, hi, n_scan)
    g1, g2 = slab.gammas(xi)
    if np.max(np.abs(np.imag(g1))) > 1e-10 * slab.k1:
        raise NumericsError("gamma_1 not real on (k1, k2): branch selection broken")
    if np.max(np.abs(np.real(g2))) > 1e-10 * slab.k2:
        raise NumericsError("gamma_2 not imaginary on (k1, k2): branch selection broken")
    f = slab.dispersion_F(xi)
    cross = (np.sign(f[:-1]) * np.sign(f[1:]) < 0) & (np.abs(f[1:] - f[:-1]) < np.pi)
    poles = []
    for i in np.nonzero(cross)[0]:
        a, b = xi[i], xi[i + 1]
        fa = f[i]
        for _ in range(80):
            m = 0.5 * (a + b)
            fm = float(slab.dispersion_F(np.asarray([m]))[0])
            if fa * fm <= 0:
                b = m
            else:
                a, fa = m, fm
            if b - a < 1e-14 * slab.k1:
                break
        xi_p = 0.5 * (a + b)
        if abs(complex(slab.q(np.asarray([xi_p]))[0])) > 1e-10:
            raise NumericsError(f"pole candidate at xi = {xi_p} fails |q| <= 1e-10")
        poles.append(xi_p)
    return np.asarray(poles)


def _pole_set_I(poles, k1, cos_t):
    """Real poles (with their mirror images) picked up by the deformation.

    For cos t > 0 the set is (0, k1 cos t) u (k1/cos t, inf); mirrored for
    cos t < 0; empty at cos t = 0.  Guided poles live in (k1, k2) and their
    mirrors in (-k2, -k1); membership reduces to xi_p > k1/|cos t| with the
    sign of the contributing pole following the sign of cos t.
    """
    if abs(cos_t) < 1e-14 or len(poles) == 0:
        return np.asarray([], dtype=float)
    thresh = k1 / abs(cos_t)
    sel = poles[poles > thresh]
    return np.sign(cos_t) * sel


def hf_eval(slab: SlabSpectral, source, source_layer: int, theta: float, r: float,
            poles=None, with_source_grad: bool = False):
    """Far-field form of the slab Green function at target r (cos t, sin t).

    Two-term steepest-descent asymptotics: (i/2) sum of residues over the
    pole set I (non-exponentially-decaying crossings) plus the saddle-point
    term at xi_0 = k1 cos t.  `source` may be an array of source points;
    with_source_grad=True also returns d/d(source) for normal derivatives.
    """
    if not 0.0 < theta < np.pi:
        raise ConfigError(f"far-field angle must lie in (0, pi), got {theta}")
    if poles is None:
        poles = find_guided_poles(slab)
    src = np.atleast_2d(np.asarray(source, dtype=float))
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    k1 = slab.k1

    val = np.zeros(len(src), dtype=complex)
    grad = np.zeros((len(src), 2), dtype=complex)

    # saddle-point contribution: phi(xi_0) = i k1, |phi''(xi_0)| = 1/(k1 sin^2 t)
    xi0 = np.asarray([k1 * cos_t])
    q0 = slab.q(xi0)[0]
    amp = (1.0 / (4.0 * np.pi)) * np.sqrt(2.0 * np.pi * k1 / r) * sin_t * np.exp(
        1j * (k1 * r - 0.25 * np.pi)
    )
    if with_source_grad:
        p0, dp0 = slab.p_amp(xi0, src, source_layer, with_grad=True)
        val += amp * p0[0] / q0
        grad += amp * dp0[0] / q0
    else:
        val += amp * slab.p_amp(xi0, src, source_layer)[0] / q0

    # residue contributions over the set I
    for xi_p in _pole_set_I(np.asarray(poles, dtype=float), k1, cos_t):
        xp = np.asarray([xi_p])
        g1p, _ = slab.gammas(xp)
        phase = np.exp(r * (1j * xi_p * cos_t - g1p[0] * sin_t))
        qp = slab.q_prime(xp)[0]
        if with_source_grad:
            pv, dpv = slab.p_amp(xp, src, source_layer, with_grad=True)
            val += 0.5j * phase * pv[0] / qp
            grad += 0.5j * phase * dpv[0] / qp
        else:
            val += 0.5j * phase * slab.p_amp(xp, src, source_layer)[0] / qp

    if with_source_grad:
        return val, grad
    return val


@dataclass(frozen=True)
class FarFieldPattern:
    """Far-field pattern u_inf(theta) plus a separate guided-mode channel.

    The guided channel carries, per pole, the theta-masked complex amplitude
    multiplying e^{r phi(xi_p)}; those terms do not decay like r^{-1/2} and
    are therefore not folded into u_inf.
    """

    theta: np.ndarray = field(repr=False)
    u_inf: np.ndarray = field(repr=False)
    poles: np.ndarray = field(repr=False)
    guided: np.ndarray = field(repr=False)  # (n_poles, n_theta) complex
    meta: dict = field(default_factory=dict, repr=False)


def far_pattern(state, s_curve, slab: SlabSpectral, theta) -> FarFieldPattern:
    """Far-field pattern from defect data on the sampling curve S.

    u_f(r) = Int_S { dH_f/dn' u_d - H_f du_d/dn' } ds'; stripping the
    spherical factor sqrt(r) e^{-i k1 r} from the saddle part defines
    u_inf(theta).  `state` is a postfield.SolvedField for a slab problem.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(theta <= 0.0) or np.any(theta >= np.pi):
        raise ConfigError("far-field angles must lie strictly inside (0, pi)")
    poles = find_guided_poles(slab)
    pts = s_curve.points
    nrm = s_curve.normals
    wq = s_curve.jac * s_curve.dtau
    layer = state.classify(pts)
    ud = np.zeros(len(pts), dtype=complex)
    dud = np.zeros(len(pts), dtype=complex)
    for j in np.unique(layer):
        m = layer == j
        v, g, near = state.defect_field(pts[m], int(j), with_grad=True)
        if np.any(near):
            raise ConfigError("sampling curve S enters the near-curve band")
        ud[m] = v
        dud[m] = np.sum(g * nrm[m], axis=-1)

    k1 = slab.k1
    u_inf = np.zeros(len(theta), dtype=complex)
    guided = np.zeros((len(poles), len(theta)), dtype=complex)
    for it, th in enumerate(theta):
        cos_t, sin_t = np.cos(th), np.sin(th)
        xi0 = np.asarray([k1 * cos_t])
        q0 = slab.q(xi0)[0]
        amp = np.exp(-0.25j * np.pi) * np.sqrt(2.0 * np.pi * k1) * sin_t / (4.0 * np.pi)
        acc = 0.0 + 0.0j
        for j in np.unique(layer):
            m = layer == j
            pv, dpv = slab.p_amp(xi0, pts[m], int(j), with_grad=True)
            kern = amp * pv[0] / q0
            dkern = amp * np.sum(dpv[0] * nrm[m], axis=-1) / q0
            acc += np.sum(wq[m] * (dkern * ud[m] - kern * dud[m]))
        u_inf[it] = acc
        for ip, xi_p in enumerate(poles):
            signed = _pole_set_I(np.asarray([xi_p]), k1, cos_t)
            if len(signed) == 0:
                continue
            xp = np.asarray([signed[0]])
            qp = slab.q_prime(xp)[0]
            gacc = 0.0 + 0.0j
            for j in np.unique(layer):
                m = layer == j
                pv, dpv = slab.p_amp(xp, pts[m], int(j), with_grad=True)
                kern = 0.5j * pv[0] / qp
                dkern = 0.5j * np.sum(dpv[0] * nrm[m], axis=-1) / qp
                gacc += np.sum(wq[m] * (dkern * ud[m] - kern * dud[m]))
            guided[ip, it] = gacc
    return FarFieldPattern(
        theta=theta,
        u_inf=u_inf,
        poles=poles,
        guided=guided,
        meta={"A": state.wp.A, "c": state.wp.c, "n_S": s_curve.n_nodes},
    )


def far_field_at(state, s_curve, slab: SlabSpectral, theta: float, r: float) -> complex:
    """Direct evaluation of u_f(r x_hat) through H_f (large-r cross-check)."""
    pts = s_curve.points
    nrm = s_curve.normals
    wq = s_curve.jac * s_curve.dtau
    layer = state.classify(pts)
    poles = find_guided_poles(slab)
    out = 0.0 + 0.0j
    for j in np.unique(layer):
        m = layer == j
        ud, g, _ = state.defect_field(pts[m], int(j), with_grad=True)
        dud = np.sum(g * nrm[m], axis=-1)
        hv, hg = hf_eval(slab, pts[m], int(j), theta, r, poles=poles, with_source_grad=True)
        dh = np.sum(hg * nrm[m], axis=-1)
        out += np.sum(wq[m] * (dh * ud - hv * dud))
    return out
