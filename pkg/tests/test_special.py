"""Hankel/Bessel machinery against high-precision oracles."""

import mpmath as mp
import numpy as np
import pytest

from wgf2d._special import (
    HankelDomainError,
    bessel_sigma1,
    besselj01,
    hankel01,
    hankel01_with_j,
)

from oracles import mp_hankel01, mp_j0_y0, mp_j1_y1

mp.mp.dps = 50


def test_h0_at_one_frozen_value():
    # J0(1) + i Y0(1), frozen from the 50-digit series oracle
    h0, h1 = hankel01(1.0)
    assert abs(h0 - (0.76519768655796655 + 0.08825696421567696j)) < 1e-13
    assert abs(h1 - (0.44005058574493355 - 0.78121282130028871j)) < 1e-13


def test_series_oracle_consistency():
    # the mpmath series oracle agrees with mpmath's own implementation
    for z in (0.3, 1.0, 7.5):
        j0, y0 = mp_j0_y0(z)
        j1, y1 = mp_j1_y1(z)
        assert abs(complex(j0) - complex(mp.besselj(0, z))) < 1e-25
        assert abs(complex(y0) - complex(mp.bessely(0, z))) < 1e-25
        assert abs(complex(j1) - complex(mp.besselj(1, z))) < 1e-25
        assert abs(complex(y1) - complex(mp.bessely(1, z))) < 1e-25


def test_real_axis_accuracy_against_oracle():
    # 1e-13 relative over a log grid spanning the contract range
    zs = np.logspace(-8, 4, 1000)
    h0, h1, j0, j1 = hankel01_with_j(zs)
    idx = np.random.default_rng(3).choice(len(zs), size=160, replace=False)
    for i in idx:
        r0, r1 = mp_hankel01(float(zs[i]))
        assert abs(h0[i] - r0) / abs(r0) < 1e-13
        assert abs(h1[i] - r1) / abs(r1) < 1e-13


def test_small_argument_logarithmic_form():
    z = 1e-6
    h0, _ = hankel01(z)
    approx = 1.0 + (2j / np.pi) * (np.log(z / 2.0) + np.euler_gamma)
    assert abs(h0 - approx) / abs(h0) < 1e-10


def test_wronskian_identity():
    for x in (0.1, 1.0, 10.0, 100.0):
        h0, h1, j0, j1 = hankel01_with_j(x)
        y0, y1 = h0.imag, h1.imag
        assert abs(j0 * y1 - j1 * y0 - (-2.0 / (np.pi * x))) < 1e-12


def test_complex_sector_against_mpmath():
    for z in (0.5 + 0.5j, 3 + 2j, 12.5 + 3j, 40 + 5j, 2 + 4j):
        h0, h1 = hankel01(z)
        r0, r1 = complex(mp.hankel1(0, mp.mpc(z))), complex(mp.hankel1(1, mp.mpc(z)))
        assert abs(h0 - r0) / abs(r0) < 5e-11
        assert abs(h1 - r1) / abs(r1) < 5e-11


def test_besselj_complex():
    z = 5.0 + 2.0j
    j0, j1 = besselj01(z)
    assert abs(j0 - complex(mp.besselj(0, mp.mpc(z)))) < 1e-12 * abs(j0)
    assert abs(j1 - complex(mp.besselj(1, mp.mpc(z)))) < 1e-12 * abs(j1)


def test_domain_errors():
    with pytest.raises(HankelDomainError):
        hankel01(0.0)
    with pytest.raises(HankelDomainError):
        hankel01(-1.0)
    with pytest.raises(HankelDomainError):
        hankel01(1.0 - 1.0j)


def test_sigma1_series_vs_identity():
    # entire remainder of Y1: both evaluation branches agree across the seam
    for z in (0.5, 1.9, 2.1, 9.0):
        s = bessel_sigma1(z)
        zc = mp.mpf(z)
        ref = 2 * mp.log(zc / 2) * mp.besselj(1, zc) - mp.pi * mp.bessely(1, zc) - 2 / zc
        assert abs(complex(s) - complex(ref)) < 1e-13 * max(1.0, abs(complex(ref)))
