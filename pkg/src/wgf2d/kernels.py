"""Free-space Helmholtz kernel values and the slow-rise window function.

The 2D free-space Green function is G_k(x, x') = (i/4) H0^(1)(k|x - x'|);
its first and second normal derivatives supply the double-layer, adjoint
double-layer and hypersingular kernels.  The window w_A is the C-infinity
compactly supported cutoff that equals 1 on [-cA, cA] and 0 outside [-A, A].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._special import (
    EULER_GAMMA,
    HankelDomainError,
    bessel_sigma1,
    besselj01,
    hankel01,
    hankel01_with_j,
)
from .errors import ConfigError

__all__ = [
    "EULER_GAMMA",
    "HankelDomainError",
    "KernelValues",
    "WindowParams",
    "bessel_sigma1",
    "besselj01",
    "hankel01",
    "hankel01_with_j",
    "kernel_values",
    "lam_weak",
    "window_eta",
    "window_wA",
]

_EXP_UNDERFLOW = -745.0


@dataclass(frozen=True)
class WindowParams:
    """Half-width A and rise-start fraction c of the window w_A."""

    A: float
    c: float = 0.7

    def __post_init__(self):
        if not self.A > 0:
            raise ConfigError(f"window half-width A must be positive, got {self.A}")
        if not 0.0 < self.c < 1.0:
            raise ConfigError(f"window parameter c must lie in (0, 1), got {self.c}")


def window_eta(t, t0: float, t1: float):
    """Slow-rise cutoff: 1 for |t| <= t0, exp(2 e^{-1/u}/(u-1)) on the rise
    with u = (|t| - t0)/(t1 - t0), and 0 for |t| >= t1."""
    if not 0 < t0 < t1:
        raise ConfigError(f"window shape requires 0 < t0 < t1, got ({t0}, {t1})")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    u = (np.abs(t) - t0) / (t1 - t0)
    out = np.zeros_like(t)
    out[u <= 0.0] = 1.0
    mid = (u > 0.0) & (u < 1.0)
    if np.any(mid):
        um = u[mid]
        expo = 2.0 * np.exp(-1.0 / um) / (um - 1.0)
        vals = np.where(expo < _EXP_UNDERFLOW, 0.0, np.exp(np.maximum(expo, _EXP_UNDERFLOW)))
        out[mid] = vals
    return out[0] if scalar else out


def window_wA(x, wp: WindowParams):
    """Window w_A(x) = eta(x/A; c, 1); support is exactly [-A, A]."""
    return window_eta(np.asarray(x, dtype=float) / wp.A, wp.c, 1.0)


@dataclass(frozen=True)
class KernelValues:
    """Green kernel and its normal derivatives for one target/source pair."""

    G: complex
    dG_dn_src: complex
    dG_dn_tgt: complex
    d2G_dndn: complex


def kernel_values(k, target, n_tgt, source, n_src):
    """Evaluate G_k and its first/second normal derivatives.

    `target`, `source` are points (arrays of shape (..., 2) broadcast
    together); `n_tgt`, `n_src` the unit normals at them.  Coincident points
    raise: the singular diagonal belongs to the quadrature rules, not here.

    With rhat = (target - source)/r,

        G          = (i/4) H0(k r)
        dG/dn_src  = +(i k/4) H1(k r) (rhat . n_src)
        dG/dn_tgt  = -(i k/4) H1(k r) (rhat . n_tgt)
        d2G/dndn'  = (i k/4) [ (k H0 - 2 H1/r)(rhat.n_tgt)(rhat.n_src)
                               + (H1/r)(n_tgt.n_src) ]
    """
    target = np.asarray(target, dtype=float)
    source = np.asarray(source, dtype=float)
    n_tgt = np.asarray(n_tgt, dtype=float)
    n_src = np.asarray(n_src, dtype=float)
    dvec = target - source
    r = np.sqrt(np.sum(dvec * dvec, axis=-1))
    if np.any(r == 0.0):
        raise HankelDomainError("kernel_values requires target != source")
    rhat = dvec / r[..., None]
    h0, h1 = hankel01(k * r)
    rn_src = np.sum(rhat * n_src, axis=-1)
    rn_tgt = np.sum(rhat * n_tgt, axis=-1)
    nn = np.sum(n_tgt * n_src, axis=-1)
    g = 0.25j * h0
    dg_src = 0.25j * k * h1 * rn_src
    dg_tgt = -0.25j * k * h1 * rn_tgt
    d2g = 0.25j * k * ((k * h0 - 2.0 * h1 / r) * rn_tgt * rn_src + (h1 / r) * nn)
    if g.ndim == 0:
        return KernelValues(complex(g), complex(dg_src), complex(dg_tgt), complex(d2g))
    return KernelValues(g, dg_src, dg_tgt, d2g)


def lam_weak(k, rho):
    """Weakly singular part (i k/(4 rho)) H1(k rho) - 1/(2 pi rho^2).

    The 1/rho^2 pole of the hypersingular kernel is wavenumber independent;
    subtracting it leaves this log-type function.  For small k*rho the
    subtraction is done analytically through the series split of Y1 so no
    cancellation occurs.
    """
    rho = np.asarray(rho, dtype=float)
    scalar = rho.ndim == 0
    rho = np.atleast_1d(rho)
    z = k * rho
    out = np.empty(np.broadcast(z, rho).shape, dtype=complex)
    z, rho_b = np.broadcast_arrays(z, rho)
    small = np.abs(z) < 0.5
    if np.any(small):
        zs = z[small]
        rs = rho_b[small]
        _, j1 = besselj01(zs)
        sig = bessel_sigma1(zs)
        out[small] = (
            0.25j * k * j1 / rs
            - (k / (2.0 * np.pi * rs)) * np.log(0.5 * zs) * j1
            + (k / (4.0 * np.pi * rs)) * sig
        )
    big = ~small
    if np.any(big):
        zb = z[big]
        rb = rho_b[big]
        _, h1 = hankel01(zb)
        out[big] = 0.25j * k * h1 / rb - 1.0 / (2.0 * np.pi * rb * rb)
    return out[0] if scalar else out
