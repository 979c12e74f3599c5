"""Bessel and Hankel functions of orders 0 and 1 to near machine accuracy.

Everything the solver needs reduces to H0^(1), H1^(1) (free-space kernel and
its derivatives) together with J0, J1 (coefficients of the logarithmic kernel
splits).  Real positive arguments are the hot path and are evaluated with a
three-regime scheme:

  z < 2      ascending power series (DLMF 10.2.2 / 10.8.1); no cancellation.
  2 <= z < 30  Steed's method: continued fractions CF1 (J1/J0) and CF2
             (H0'/H0) combined through the Wronskian.  The sign of the
             (J0, Y0) pair is fixed against the leading asymptotic form of
             H0, whose modulus never vanishes.
  z >= 30    Hankel asymptotic expansion; the phase is assembled as
             exp(i z) * const so large arguments keep full relative accuracy.

Complex arguments are supported in the closed first quadrant (Re z >= 0,
Im z >= 0), which is what lossy-layer wavenumbers produce: the ascending
series is used for |z| < 12 and the asymptotic expansion beyond.  H^(1) is
exponentially small for large Im z while J and Y are exponentially large, so
the series assembly H = J + iY loses relative accuracy like eps*exp(2 Im z);
the absolute error stays near eps*exp(Im z), i.e. harmless wherever the
kernel itself is not negligible.  On the real axis the scheme stays below
1e-13 relative on [1e-8, 1e4].
"""

from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.5772156649015328606065

_SERIES_CUT_REAL = 2.0
_STEED_CUT = 30.0
_SERIES_CUT_COMPLEX = 12.0

# exp(-i nu pi/2 - i pi/4) for nu = 0, 1
_PHASE0 = np.exp(-0.25j * np.pi)
_PHASE1 = np.exp(-0.75j * np.pi)


class HankelDomainError(ValueError):
    """Argument outside the supported sector Re z >= 0, Im z >= 0, z != 0."""


def _series_j01y01(z):
    """Ascending series for J0, J1, Y0, Y1 (complex-safe)."""
    z = np.asarray(z, dtype=complex)
    t = 0.25 * z * z
    term = np.ones_like(z)
    j0 = term.copy()
    s0 = np.zeros_like(z)
    c = 0.5 * z
    j1 = c.copy()
    s1 = (1.0 - 2.0 * EULER_GAMMA) * c
    hm = 0.0
    hm1 = 1.0
    for m in range(1, 80):
        term = term * (-t) / (m * m)
        j0 += term
        hm += 1.0 / m
        s0 -= term * hm
        c = c * (-t) / (m * (m + 1))
        j1 += c
        hm1 += 1.0 / (m + 1)
        s1 += c * (hm + hm1 - 2.0 * EULER_GAMMA)
        if m % 4 == 0 and np.all(
            np.abs(term) + np.abs(c) < 1e-18 * (np.abs(j0) + np.abs(j1) + 1e-300)
        ):
            break
    lg = np.log(0.5 * z)
    y0 = (2.0 / np.pi) * ((lg + EULER_GAMMA) * j0 + s0)
    y1 = (2.0 / np.pi) * lg * j1 - 2.0 / (np.pi * z) - s1 / np.pi
    return j0, j1, y0, y1


def _steed_j01y01(x):
    """Steed's method for real x in [2, 30): returns J0, J1, Y0, Y1."""
    x = np.asarray(x, dtype=float)
    tiny = 1e-300
    # CF1: r = J1/J0 via modified Lentz; f = J0'/J0 = -r
    h = np.full_like(x, tiny)
    c = np.full_like(x, tiny)
    d = np.zeros_like(x)
    done = np.zeros(x.shape, dtype=bool)
    for k in range(1, 400):
        a = 1.0 if k == 1 else -1.0
        b = 2.0 * k / x
        d = b + a * d
        d = np.where(d == 0.0, tiny, d)
        c = b + a / c
        c = np.where(c == 0.0, tiny, c)
        d = 1.0 / d
        delta = np.where(done, 1.0, c * d)
        h = h * delta
        done |= np.abs(delta - 1.0) < 1e-16
        if k % 8 == 0 and np.all(done):
            break
    f = -h

    # CF2: p + iq = H0'(x)/H0(x) = -1/(2x) + i + (i/x) * CF
    hc = np.full(x.shape, tiny, dtype=complex)
    cc = np.full(x.shape, tiny, dtype=complex)
    dc = np.zeros(x.shape, dtype=complex)
    done = np.zeros(x.shape, dtype=bool)
    for k in range(1, 400):
        a = (k - 0.5) ** 2
        b = 2.0 * (x + 1j * k)
        dc = b + a * dc
        dc = np.where(dc == 0.0, tiny, dc)
        cc = b + a / cc
        cc = np.where(cc == 0.0, tiny, cc)
        dc = 1.0 / dc
        delta = np.where(done, 1.0 + 0j, cc * dc)
        hc = hc * delta
        done |= np.abs(delta - 1.0) < 1e-16
        if k % 8 == 0 and np.all(done):
            break
    pq = -0.5 / x + 1j + (1j / x) * hc
    p, q = pq.real, pq.imag

    w = 2.0 / (np.pi * x)
    gam = (p - f) / q
    j0 = np.sqrt(w / (q + gam * (p - f)))
    # fix the sign of (J0, Y0) against the leading asymptotic form of H0
    h0_cand = j0 * (1.0 + 1j * gam)
    comp = np.sqrt(w) * np.exp(1j * x) * _PHASE0
    flip = np.abs(h0_cand - comp) > np.abs(h0_cand + comp)
    j0 = np.where(flip, -j0, j0)
    y0 = gam * j0
    j1 = -f * j0
    y1 = -(q * j0 + p * y0)
    return j0, j1, y0, y1


def _asym_h(z, nu, second=False, nterms=25):
    """Hankel asymptotic expansion of H_nu^(1) (or H_nu^(2) if second)."""
    z = np.asarray(z, dtype=complex)
    sgn = -1.0 if second else 1.0
    a = 1.0
    s = np.ones_like(z)
    last = np.full(z.shape, np.inf)
    frozen = np.zeros(z.shape, dtype=bool)
    zinv = (sgn * 1j) / z
    pw = np.ones_like(z)
    for k in range(1, nterms):
        a = a * (4.0 * nu * nu - (2 * k - 1) ** 2) / (8.0 * k)
        pw = pw * zinv
        term = a * pw
        mag = np.abs(term)
        grow = mag > last  # divergent tail reached: stop including
        frozen |= grow
        s = np.where(frozen, s, s + term)
        last = np.where(frozen, last, mag)
        if k % 4 == 0 and (np.all(frozen) or np.all(mag < 1e-18)):
            break
    phase = _PHASE0 if nu == 0 else _PHASE1
    if second:
        phase = np.conj(phase)
        ez = np.exp(-1j * z)
    else:
        ez = np.exp(1j * z)
    return np.sqrt(2.0 / (np.pi * z)) * ez * phase * s


def _hankel01_real(x):
    x = np.asarray(x, dtype=float)
    h0 = np.empty(x.shape, dtype=complex)
    h1 = np.empty(x.shape, dtype=complex)
    j0 = np.empty(x.shape, dtype=float)
    j1 = np.empty(x.shape, dtype=float)

    m = x < _SERIES_CUT_REAL
    if np.any(m):
        a0, a1, b0, b1 = _series_j01y01(x[m])
        j0[m], j1[m] = a0.real, a1.real
        h0[m] = a0.real + 1j * b0.real
        h1[m] = a1.real + 1j * b1.real
    m = (x >= _SERIES_CUT_REAL) & (x < _STEED_CUT)
    if np.any(m):
        a0, a1, b0, b1 = _steed_j01y01(x[m])
        j0[m], j1[m] = a0, a1
        h0[m] = a0 + 1j * b0
        h1[m] = a1 + 1j * b1
    m = x >= _STEED_CUT
    if np.any(m):
        v0 = _asym_h(x[m], 0)
        v1 = _asym_h(x[m], 1)
        h0[m], h1[m] = v0, v1
        j0[m], j1[m] = v0.real, v1.real
    return h0, h1, j0, j1


def _hankel01_complex(z):
    z = np.asarray(z, dtype=complex)
    h0 = np.empty(z.shape, dtype=complex)
    h1 = np.empty(z.shape, dtype=complex)
    j0 = np.empty(z.shape, dtype=complex)
    j1 = np.empty(z.shape, dtype=complex)
    az = np.abs(z)

    m = az < _SERIES_CUT_COMPLEX
    if np.any(m):
        a0, a1, b0, b1 = _series_j01y01(z[m])
        j0[m], j1[m] = a0, a1
        h0[m] = a0 + 1j * b0
        h1[m] = a1 + 1j * b1
    m = az >= _SERIES_CUT_COMPLEX
    if np.any(m):
        zm = z[m]
        v0 = _asym_h(zm, 0)
        v1 = _asym_h(zm, 1)
        h0[m], h1[m] = v0, v1
        j0[m] = 0.5 * (v0 + _asym_h(zm, 0, second=True))
        j1[m] = 0.5 * (v1 + _asym_h(zm, 1, second=True))
    return h0, h1, j0, j1


def _check_domain(z):
    if np.any(z == 0):
        raise HankelDomainError("Hankel function argument must be nonzero")
    if np.any(z.real < 0) or np.any(z.imag < 0):
        raise HankelDomainError(
            "argument outside the supported sector Re z >= 0, Im z >= 0"
        )


def hankel01(z):
    """First-kind Hankel functions of orders 0 and 1.

    Parameters
    ----------
    z : scalar or ndarray
        Real nonnegative or first-quadrant complex argument(s), nonzero.

    Returns
    -------
    (H0, H1) : complex scalars or ndarrays
    """
    h0, h1, _, _ = hankel01_with_j(z)
    return h0, h1


def hankel01_with_j(z):
    """H0^(1), H1^(1), J0, J1 at shared arguments (fused evaluation)."""
    arr = np.asarray(z)
    scalar = arr.ndim == 0
    zc = np.atleast_1d(np.asarray(arr, dtype=complex))
    _check_domain(zc)
    if np.all(zc.imag == 0.0):
        h0, h1, j0, j1 = _hankel01_real(zc.real)
    else:
        h0, h1, j0, j1 = _hankel01_complex(zc)
    if scalar:
        return h0[0], h1[0], j0[0], j1[0]
    return h0, h1, j0, j1


def besselj01(z):
    """J0 and J1 at real or first-quadrant complex arguments."""
    _, _, j0, j1 = hankel01_with_j(z)
    return j0, j1


def bessel_sigma1(z):
    """Regularized part of Y1: sigma(z) = 2 ln(z/2) J1(z) - pi Y1(z) - 2/z.

    Equals sum_m (-1)^m (psi(m+1)+psi(m+2)) (z/2)^(2m+1) / (m! (m+1)!), an
    entire odd function; it carries the non-logarithmic remainder used when
    splitting the difference of hypersingular kernels.
    """
    arr = np.asarray(z)
    scalar = arr.ndim == 0
    zc = np.atleast_1d(np.asarray(arr, dtype=complex))
    out = np.empty(zc.shape, dtype=complex)
    az = np.abs(zc)
    m = az <= 2.0
    if np.any(m):
        zz = zc[m]
        t = 0.25 * zz * zz
        c = 0.5 * zz
        s = (1.0 - 2.0 * EULER_GAMMA) * c
        hm, hm1 = 0.0, 1.0
        for k in range(1, 40):
            c = c * (-t) / (k * (k + 1))
            hm += 1.0 / k
            hm1 += 1.0 / (k + 1)
            s += c * (hm + hm1 - 2.0 * EULER_GAMMA)
            if np.all(np.abs(c) < 1e-20):
                break
        out[m] = s
    m = az > 2.0
    if np.any(m):
        zz = zc[m]
        h0, h1, j0, j1 = hankel01_with_j(zz)
        y1 = (h1 - j1) / 1j
        out[m] = 2.0 * np.log(0.5 * zz) * j1 - np.pi * y1 - 2.0 / zz
    if scalar:
        return out[0]
    return out
