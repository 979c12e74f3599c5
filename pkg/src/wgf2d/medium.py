"""Unperturbed planar N-layer medium: closed-form fields and coefficients.

Layer j occupies the slab between the planes y = -d_{j-1} and y = -d_j
(layer 1 is the upper half space hosting the incident plane wave, layer N
the lower half space).  The planar total field in layer j is

    u_j^p(x, y) = A_j e^{i k1x x} ( e^{-i kjy y} + Rt_j e^{i kjy (y + 2 d_j)} )

with k1x = k_1 cos(alpha), kjy = sqrt(k_j^2 - k1x^2) on the branch with
nonnegative imaginary (hence real) part, amplitudes A_j and generalized
reflection coefficients Rt_j = R~_{j,j+1} obtained by the usual downward /
upward recursions over the interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ResonanceError, SingularCoefficientError

_DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class LayerStack:
    """Depths, complex wavenumbers and density ratios of the planar medium.

    depths[j] is the depth d_{j+1} of interface j+1 (1-based), so interface
    P_j lies at y = -depths[j-1]; nu[j-1] = rho_j / rho_{j+1}.
    """

    wavenumbers: tuple
    depths: tuple
    nu: tuple

    def __post_init__(self):
        k = tuple(complex(v) for v in self.wavenumbers)
        d = tuple(float(v) for v in self.depths)
        nu = tuple(float(v) for v in self.nu)
        object.__setattr__(self, "wavenumbers", k)
        object.__setattr__(self, "depths", d)
        object.__setattr__(self, "nu", nu)
        n = len(k)
        if n < 2:
            raise ConfigError("a layered medium needs at least 2 layers")
        if len(d) != n - 1:
            raise ConfigError(f"expected {n - 1} interface depths, got {len(d)}")
        if len(nu) != n - 1:
            raise ConfigError(f"expected {n - 1} density ratios, got {len(nu)}")
        if any(d[i] >= d[i + 1] for i in range(len(d) - 1)):
            raise ConfigError("interface depths must be strictly increasing")
        for j, kj in enumerate(k):
            if (kj * kj).imag < -1e-15 * abs(kj) ** 2:
                raise ConfigError(f"layer {j + 1}: Im(k^2) must be nonnegative")
            if kj.real <= 0:
                raise ConfigError(f"layer {j + 1}: Re(k) must be positive")
        if any(v <= 0 for v in nu):
            raise ConfigError("density ratios nu must be positive")

    @property
    def n_layers(self) -> int:
        return len(self.wavenumbers)

    @property
    def n_interfaces(self) -> int:
        return len(self.wavenumbers) - 1

    def depth(self, j: int) -> float:
        """Depth d_j of interface j (1-based)."""
        return self.depths[j - 1]

    @property
    def wavelength(self) -> float:
        """Reference wavelength 2 pi / Re(k_1) of the top layer."""
        return 2.0 * np.pi / self.wavenumbers[0].real


@dataclass(frozen=True)
class Incidence:
    """Plane-wave incidence: angle alpha in (-pi, 0) measured from the
    horizontal, complex amplitude (default 1)."""

    alpha: float
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not -np.pi < self.alpha < 0.0:
            raise ConfigError(f"incidence angle must lie in (-pi, 0), got {self.alpha}")
        object.__setattr__(self, "amplitude", complex(self.amplitude))


@dataclass(frozen=True)
class PlanarSolution:
    """Closed-form planar-medium solution for one stack and incidence."""

    k1x: complex
    kjy: tuple
    amplitudes: tuple
    genrefl: tuple
    alpha: float
    scale: complex = 1.0 + 0.0j
    stack: LayerStack = field(repr=False, default=None)


def _branch_sqrt(w: complex) -> complex:
    """sqrt with Im >= 0, then Re >= 0 on the nonnegative-imaginary ridge."""
    r = complex(np.sqrt(complex(w)))
    if r.imag < 0.0 or (r.imag == 0.0 and r.real < 0.0):
        r = -r
    return r


def reflection_transmission(kjy_a, kjy_b, nu, interface=None):
    """Fresnel-type coefficients across one interface.

    R = (kjy_a - nu kjy_b)/(kjy_a + nu kjy_b), T = 2 kjy_a/(kjy_a + nu kjy_b);
    the identity 1 + R = T holds exactly.
    """
    kjy_a = complex(kjy_a)
    kjy_b = complex(kjy_b)
    den = kjy_a + nu * kjy_b
    scale = max(abs(kjy_a), abs(nu * kjy_b), 1e-300)
    if abs(den) <= _DEGENERATE_TOL * scale:
        where = f" at interface {interface}" if interface is not None else ""
        raise SingularCoefficientError(
            f"degenerate coefficient denominator kjy_a + nu*kjy_b ~ 0{where}"
        )
    return (kjy_a - nu * kjy_b) / den, 2.0 * kjy_a / den


def planar_coefficients(stack: LayerStack, inc: Incidence) -> PlanarSolution:
    """Amplitudes A_j and generalized reflection coefficients R~_{j,j+1}.

    The generalized coefficients come from the downward recursion (interface
    N-1 down to 1), the amplitudes from the upward one (layer 2 up to N).
    """
    n = stack.n_layers
    k = stack.wavenumbers
    d = stack.depths
    nu = stack.nu
    k1x = k[0] * np.cos(inc.alpha)
    kjy = tuple(_branch_sqrt(k[j] * k[j] - k1x * k1x) for j in range(n))

    # downward recursion for R~_{j,j+1}; R~_{N,N+1} = 0
    rt = [0.0 + 0.0j] * n
    for j in range(n - 2, -1, -1):  # interface index j+1 (1-based)
        r_fw, t_fw = reflection_transmission(kjy[j], kjy[j + 1], nu[j], interface=j + 1)
        if j == n - 2:
            rt[j] = r_fw
            continue
        r_bw, t_bw = reflection_transmission(
            kjy[j + 1], kjy[j], 1.0 / nu[j], interface=j + 1
        )
        phase = np.exp(2j * kjy[j + 1] * (d[j + 1] - d[j]))
        den = 1.0 - r_bw * rt[j + 1] * phase
        if abs(den) <= 1e-12:
            raise ResonanceError(
                f"guided resonance of the stack below interface {j + 1}: "
                f"multiple-reflection denominator |1 - R R~ e^(2 i kjy dd)| = {abs(den):.2e}"
            )
        rt[j] = r_fw + t_bw * rt[j + 1] * t_fw * phase / den

    # upward recursion for amplitudes; A_1 = 1
    a = [1.0 + 0.0j] * n
    for j in range(1, n):  # layer j+1 (1-based)
        _, t_fw = reflection_transmission(kjy[j - 1], kjy[j], nu[j - 1], interface=j)
        r_bw, _ = reflection_transmission(kjy[j], kjy[j - 1], 1.0 / nu[j - 1], interface=j)
        num = t_fw * a[j - 1] * np.exp(1j * (kjy[j - 1] - kjy[j]) * d[j - 1])
        if j < n - 1:
            phase = np.exp(2j * kjy[j] * (d[j] - d[j - 1]))
            den = 1.0 - r_bw * rt[j] * phase
        else:
            den = 1.0  # R~_{N,N+1} = 0 kills the multiple-reflection term
        if abs(den) <= 1e-12:
            raise ResonanceError(
                f"guided resonance of the stack at layer {j + 1}: "
                f"amplitude denominator ~ 0"
            )
        a[j] = num / den

    return PlanarSolution(
        k1x=k1x,
        kjy=kjy,
        amplitudes=tuple(a),
        genrefl=tuple(rt),
        alpha=inc.alpha,
        scale=inc.amplitude,
        stack=stack,
    )


def incident_field(stack: LayerStack, inc: Incidence, points):
    """Incident plane wave and its gradient at the given points."""
    pts = np.asarray(points, dtype=float)
    k1 = stack.wavenumbers[0]
    kvec = k1 * np.array([np.cos(inc.alpha), np.sin(inc.alpha)])
    phase = np.exp(1j * (pts[..., 0] * kvec[0] + pts[..., 1] * kvec[1]))
    val = inc.amplitude * phase
    grad = 1j * kvec * val[..., None]
    return val, grad


def eval_planar_field(sol: PlanarSolution, stack: LayerStack, j: int, points):
    """Planar field of layer j (1-based) and its gradient, by the layer-j
    formula regardless of which region contains the points."""
    if not 1 <= j <= stack.n_layers:
        raise ConfigError(f"layer index {j} outside 1..{stack.n_layers}")
    pts = np.asarray(points, dtype=float)
    x = pts[..., 0]
    y = pts[..., 1]
    kjy = sol.kjy[j - 1]
    aj = sol.amplitudes[j - 1] * sol.scale
    dj = stack.depths[j - 1] if j <= stack.n_interfaces else 0.0
    rt = sol.genrefl[j - 1]
    ex = np.exp(1j * sol.k1x * x)
    down = np.exp(-1j * kjy * y)
    up = rt * np.exp(1j * kjy * (y + 2.0 * dj))
    val = aj * ex * (down + up)
    dval_dx = 1j * sol.k1x * val
    dval_dy = aj * ex * (-1j * kjy * down + 1j * kjy * up)
    grad = np.stack(np.broadcast_arrays(dval_dx, dval_dy), axis=-1)
    return val, grad


def updown_split(sol: PlanarSolution, j: int):
    """Constants (p_j, q_j) of the up-going/down-going plane-wave split:
    u_j^p = p_j e^{i(k1x x + kjy y)} + q_j e^{i(k1x x - kjy y)}."""
    n = len(sol.amplitudes)
    if not 1 <= j <= n:
        raise ConfigError(f"layer index {j} outside 1..{n}")
    kjy = sol.kjy[j - 1]
    dj = sol.stack.depths[j - 1] if j <= n - 1 else 0.0
    p = np.exp(2j * kjy * dj) * sol.amplitudes[j - 1] * sol.genrefl[j - 1]
    q = sol.amplitudes[j - 1]
    return p * sol.scale, q * sol.scale


def u_parallel(stack: LayerStack, sol: PlanarSolution, points):
    """Grazing-critical extra term of the bottom layer: q_N e^{i k_1 x cos a}/2
    when k_N = k_1 |cos(alpha)| (to 1e-12 relative), else 0."""
    val, _ = u_parallel_with_grad(stack, sol, points)
    return val


def u_parallel_with_grad(stack: LayerStack, sol: PlanarSolution, points):
    pts = np.asarray(points, dtype=float)
    x = pts[..., 0]
    kn = stack.wavenumbers[-1]
    k1 = stack.wavenumbers[0]
    target = k1 * abs(np.cos(sol.alpha))
    zero = np.zeros_like(x, dtype=complex)
    if kn.imag != 0.0 or abs(kn - target) > 1e-12 * max(abs(kn), abs(target)):
        return zero, np.stack([zero, zero], axis=-1)
    _, q_n = updown_split(sol, stack.n_layers)
    val = 0.5 * q_n * np.exp(1j * k1 * np.cos(sol.alpha) * x)
    gx = 1j * k1 * np.cos(sol.alpha) * val
    return val, np.stack([gx, zero], axis=-1)


def planar_traces_and_jumps(sol: PlanarSolution, stack: LayerStack, curve, t):
    """Planar traces and jumps along the perturbed interface curve.

    Returns (phi_p, psi_p, f, g) at curve parameters t: the traces of the
    layer-(j+1) planar field and its normal derivative, and the jumps
    f = u_j^p - u_{j+1}^p, g = (1/nu_j) dn u_j^p - dn u_{j+1}^p, which vanish
    identically on the flat portion of the curve.
    """
    j = curve.interface_index
    pts = curve.point(t)
    nrm = curve.normal(t)
    v_lo, g_lo = eval_planar_field(sol, stack, j + 1, pts)
    v_up, g_up = eval_planar_field(sol, stack, j, pts)
    dn_lo = np.sum(g_lo * nrm, axis=-1)
    dn_up = np.sum(g_up * nrm, axis=-1)
    phi_p = v_lo
    psi_p = dn_lo
    f = v_up - v_lo
    g = dn_up / stack.nu[j - 1] - dn_lo
    return phi_p, psi_p, f, g
