"""Quadrature weights, operator blocks and the windowed system assembly."""

import numpy as np
import pytest
from scipy.integrate import quad

from wgf2d.bie import (
    OperatorBlock,
    _planar_interface_density,
    _tp_self_plane,
    assemble_coupling_block,
    assemble_self_block,
    assemble_system,
    closed_form_mu,
    nystrom_log_weights,
)
from wgf2d.errors import ConfigError, GeometryError
from wgf2d.geometry import InterfaceCurve, build_interface, discretize
from wgf2d.kernels import WindowParams, window_wA
from wgf2d.medium import Incidence, LayerStack, planar_coefficients

from oracles import apply_block_adaptive


def bump_density(center, width):
    def rho(t):
        u = (np.asarray(t, dtype=float) - center) / width
        out = np.zeros_like(u)
        m = np.abs(u) < 1.0
        out[m] = np.exp(-1.0 / (1.0 - u[m] ** 2))
        return out

    return rho


class TestLogWeights:
    def test_zero_mean(self):
        for n in (8, 64, 130):
            assert abs(np.sum(nystrom_log_weights(n))) < 1e-12

    def test_cosine_identity(self):
        # int ln(4 sin^2((t - tau)/2)) cos(m tau) dtau = -(2 pi / m) cos(m t)
        n = 64
        r = nystrom_log_weights(n)
        s = 2.0 * np.pi * np.arange(n) / n
        for i_t in (0, 7):
            idx = (i_t - np.arange(n)) % n
            for m in (1, 2, 5, 16):
                val = np.sum(r[idx] * np.cos(m * s))
                assert abs(val - (-(2 * np.pi / m) * np.cos(m * s[i_t]))) < 1e-12

    def test_random_trig_poly_vs_adaptive_oracle(self):
        n = 40
        rng = np.random.default_rng(11)
        coef = rng.normal(size=6)
        s = 2.0 * np.pi * np.arange(n) / n

        def f(tau):
            return sum(c * np.cos((m + 1) * tau) + c * 0.3 * np.sin((m + 1) * tau)
                       for m, c in enumerate(coef))

        r = nystrom_log_weights(n)
        t0 = s[9]
        rule = np.sum(r[(9 - np.arange(n)) % n] * f(s))

        def integrand(tau):
            return f(tau) * np.log(4.0 * np.sin(0.5 * (t0 - tau)) ** 2)

        ref = quad(integrand, 0.0, 2.0 * np.pi, points=[t0], limit=500,
                   epsabs=1e-12, epsrel=1e-12)[0]
        assert abs(rule - ref) <= 1e-10 * max(1.0, abs(ref))

    def test_odd_n_rejected(self):
        with pytest.raises(ConfigError):
            nystrom_log_weights(33)


@pytest.fixture(scope="module")
def three_layer():
    stack = LayerStack(wavenumbers=(10.0, 20.0, 30.0), depths=(0.0, 1.5), nu=(1.0, 1.0))
    inc = Incidence(alpha=-np.pi / 3)
    return stack, inc, planar_coefficients(stack, inc)


class TestSelfBlock:
    def test_kernel_cancellation_equal_layers(self):
        stack = LayerStack(wavenumbers=(7.0, 7.0), depths=(0.0,), nu=(1.0,))
        curve = build_interface(stack, 1, {"kind": "semicircle_bump", "radius": 0.6})
        grid = discretize(curve, 3.0, 0.7, 10, 7.0)
        blk = assemble_self_block(stack, curve, grid, WindowParams(A=3.0, c=0.7))
        assert np.max(np.abs(blk.mat)) < 1e-12

    def test_applied_action_vs_adaptive_oracle(self, three_layer):
        # apply T_1 to a smooth compactly supported density and compare with
        # adaptive quadrature of the four split kernels at a few targets
        stack, inc, sol = three_layer
        curve = build_interface(stack, 1,
                                {"kind": "semicircle_bump", "radius": 1.0, "blend_frac": 0.8})
        grid = discretize(curve, 3.5, 0.7, 12, 20.0)
        blk = assemble_self_block(stack, curve, grid, WindowParams(A=3.5, c=0.7)).mat
        m = grid.n_nodes
        rho = bump_density(0.0, 1.8)
        dens = np.concatenate([rho(grid.t), 0.5 * rho(grid.t)])
        applied = blk @ dens
        k_a, k_b = 10.0, 20.0
        from wgf2d.kernels import kernel_values

        for i in (m // 2, m // 3):
            tgt = grid.points[i]
            ntg = grid.normals[i]

            def row_val(tau):
                pt = curve.point(tau)
                nn = curve.normal(tau)
                sp = curve.speed(tau)
                kv_b = kernel_values(k_b, tgt, ntg, pt, nn)
                kv_a = kernel_values(k_a, tgt, ntg, pt, nn)
                d_part = (kv_b.dG_dn_src - kv_a.dG_dn_src) * rho(tau)
                s_part = (-kv_b.G + kv_a.G) * 0.5 * rho(tau)
                return (d_part + s_part) * sp

            ref = apply_block_adaptive(row_val, lambda tau: 1.0,
                                       grid.t[0], grid.t[-1], singular_at=grid.t[i])
            scale = np.max(np.abs(applied[:m]))
            assert abs(applied[i] - ref) <= 1e-8 * scale

    def test_self_convergence_on_refinement(self, three_layer):
        # evaluate at the same physical node of both grids (the anchored
        # construction makes the fine grid contain the coarse nodes); the
        # blend is widened so its Gevrey scale is fully resolved
        stack, inc, sol = three_layer
        curve = build_interface(stack, 1,
                                {"kind": "semicircle_bump", "radius": 1.0, "blend_frac": 0.8})
        wp = WindowParams(A=3.5, c=0.7)
        rho = bump_density(0.0, 1.8)
        vals = []
        t_eval = None
        for ppw in (14, 28):
            grid = discretize(curve, 3.5, 0.7, ppw, 20.0)
            blk = assemble_self_block(stack, curve, grid, wp).mat
            dens = np.concatenate([rho(grid.t), 0.5 * rho(grid.t)])
            applied = blk @ dens
            if t_eval is None:
                i = np.argmin(np.abs(grid.t - 0.4))
                t_eval = grid.t[i]
            else:
                i = np.argmin(np.abs(grid.t - t_eval))
                assert abs(grid.t[i] - t_eval) < 1e-12
            vals.append(applied[np.array([i, grid.n_nodes + i])])
        assert np.max(np.abs(vals[0] - vals[1])) <= 1e-9


class TestCouplingBlock:
    def test_trapezoid_vs_adaptive_oracle(self, three_layer):
        stack, inc, sol = three_layer
        c1 = build_interface(stack, 1, None)
        c2 = build_interface(stack, 2, None)
        g1 = discretize(c1, 3.0, 0.7, 12, 20.0)
        g2 = discretize(c2, 3.0, 0.7, 12, 30.0)
        wp = WindowParams(A=3.0, c=0.7)
        blk = assemble_coupling_block(stack, g1, g2, wp, "R").mat
        rho = bump_density(0.0, 1.5)
        m2 = g2.n_nodes
        dens = np.concatenate([rho(g2.t), 0.2 * rho(g2.t)])
        applied = blk @ dens
        from wgf2d.kernels import kernel_values

        i = g1.n_nodes // 2
        tgt, ntg = g1.points[i], g1.normals[i]
        k = 20.0
        nu2 = stack.nu[1]

        def row_val(tau):
            pt = c2.point(tau)
            nn = c2.normal(tau)
            kv = kernel_values(k, tgt, ntg, pt, nn)
            return (-kv.dG_dn_src * rho(tau) + nu2 * kv.G * 0.2 * rho(tau)) * c2.speed(tau)

        ref = apply_block_adaptive(row_val, lambda tau: 1.0, g2.t[0], g2.t[-1])
        assert abs(applied[i] - ref) <= 1e-10 * max(1.0, abs(ref))

    def test_nu_factor_on_R_block(self, three_layer):
        stack, _, _ = three_layer
        stack_nu = LayerStack(wavenumbers=(10.0, 20.0, 30.0), depths=(0.0, 1.5),
                              nu=(1.0, 3.0))
        c1 = build_interface(stack_nu, 1, None)
        c2 = build_interface(stack_nu, 2, None)
        g1 = discretize(c1, 2.0, 0.7, 8, 20.0)
        g2 = discretize(c2, 2.0, 0.7, 8, 30.0)
        wp = WindowParams(A=2.0, c=0.7)
        b1 = assemble_coupling_block(stack, g1, g2, wp, "R").mat
        b3 = assemble_coupling_block(stack_nu, g1, g2, wp, "R").mat
        m1, m2 = g1.n_nodes, g2.n_nodes
        # S and K columns (the psi columns) scale with nu_{j+1}
        assert np.allclose(b3[:, m2:], 3.0 * b1[:, m2:])
        assert np.allclose(b3[:, :m2], b1[:, :m2])

    def test_zero_density_zero_output(self, three_layer):
        stack, _, _ = three_layer
        c1 = build_interface(stack, 1, None)
        c2 = build_interface(stack, 2, None)
        g1 = discretize(c1, 2.0, 0.7, 8, 20.0)
        g2 = discretize(c2, 2.0, 0.7, 8, 30.0)
        blk = assemble_coupling_block(stack, g2, g1, WindowParams(A=2.0, c=0.7), "L").mat
        assert np.max(np.abs(blk @ np.zeros(2 * g1.n_nodes))) == 0.0

    def test_non_adjacent_rejected(self, three_layer):
        stack4 = LayerStack(wavenumbers=(10.0, 20.0, 30.0, 15.0),
                            depths=(0.0, 1.0, 2.0), nu=(1.0, 1.0, 1.0))
        c1 = build_interface(stack4, 1, None)
        c3 = build_interface(stack4, 3, None)
        g1 = discretize(c1, 2.0, 0.7, 8, 20.0)
        g3 = discretize(c3, 2.0, 0.7, 8, 30.0)
        with pytest.raises(ConfigError):
            assemble_coupling_block(stack4, g1, g3, WindowParams(A=2.0, c=0.7), "R")


class TestClosedFormMu:
    def test_flat_node_interface_one(self, three_layer):
        stack, inc, sol = three_layer
        from wgf2d.medium import eval_planar_field, incident_field

        pts = np.array([[0.7, 0.0], [-2.0, 0.0]])
        nrm = np.array([[0.0, 1.0], [0.0, 1.0]])
        mv, md = closed_form_mu(stack, sol, 1, pts, nrm, 1e-12)
        vinc, ginc = incident_field(stack, inc, pts)
        v2, g2 = eval_planar_field(sol, stack, 2, pts)
        assert np.max(np.abs(mv - (vinc - v2))) < 1e-13
        assert np.max(np.abs(md - (ginc[:, 1] - 1.0 * g2[:, 1]))) < 1e-12

    def test_middle_interface_no_delta(self):
        stack = LayerStack(wavenumbers=(10.0, 20.0, 30.0, 25.0),
                           depths=(0.0, 1.0, 2.2), nu=(1.0, 1.0, 1.0))
        inc = Incidence(alpha=-1.0)
        sol = planar_coefficients(stack, inc)
        from wgf2d.medium import eval_planar_field

        pts = np.array([[0.3, -1.0]])
        nrm = np.array([[0.0, 1.0]])
        mv, md = closed_form_mu(stack, sol, 2, pts, nrm, 1e-12)
        v3, g3 = eval_planar_field(sol, stack, 3, pts)
        assert abs(mv[0] + v3[0]) < 1e-13
        assert abs(md[0] + g3[0, 1]) < 1e-12

    def test_off_plane_uses_containing_slab(self, three_layer):
        stack, inc, sol = three_layer
        from wgf2d.medium import eval_planar_field, incident_field

        # bump node above P_1 lies in D_1; cavity node below in D_2
        for y, layer in ((0.5, 1), (-0.5, 2)):
            pts = np.array([[0.2, y]])
            nrm = np.array([[0.6, 0.8]])
            mv, md = closed_form_mu(stack, sol, 1, pts, nrm, 1e-12)
            v, g = eval_planar_field(sol, stack, layer, pts)
            vinc, ginc = incident_field(stack, inc, pts)
            assert abs(mv[0] - (vinc[0] - v[0])) < 1e-13
            assert abs(md[0] - (ginc[0] @ nrm[0] - g[0] @ nrm[0])) < 1e-12

    def test_far_node_rejected(self, three_layer):
        stack, inc, sol = three_layer
        with pytest.raises(GeometryError):
            closed_form_mu(stack, sol, 2, np.array([[0.0, 5.0]]),
                           np.array([[0.0, 1.0]]), 1e-12)

    def test_brute_force_windowed_integration_equivalence(self, three_layer):
        # spec acceptance 6: mu against numerical integration of T_P[phi_p]
        # with the window extended to 4A, at targets on each interface
        # the discrepancy is the windowed tail -T_P[(1-w)phi_p], which
        # decays super-algebraically: measured 4.1e-3 / 5.9e-4 / 2.8e-5 /
        # 1.3e-6 at 4A = 10/20/40/80 lam, so the 1e-6 target pins A = 40 lam
        stack, inc, sol = three_layer
        lam = stack.wavelength
        a_small = 40.0 * lam
        wp_big = WindowParams(A=4.0 * a_small, c=0.7)
        for j in (1, 2):
            flat = InterfaceCurve(j, stack.depth(j), None)
            grid = discretize(flat, wp_big.A, wp_big.c, 10,
                              max(stack.wavenumbers[j - 1].real, stack.wavenumbers[j].real))
            sel = np.abs(grid.points[:, 0]) < 2.0
            idx = np.nonzero(sel)[0][:: max(1, sel.sum() // 10)][:10]
            tgt = grid.points[idx]
            nrm = grid.normals[idx]
            val_n = np.zeros(len(idx), dtype=complex)
            der_n = np.zeros(len(idx), dtype=complex)
            v, d = _tp_self_plane(stack, sol, j, tgt, nrm, wp_big, 1e-12)
            val_n += v
            der_n += d
            from wgf2d.bie import _cross_kernels

            for i_pl in (j - 1, j + 1):
                if not 1 <= i_pl <= stack.n_interfaces or i_pl == j:
                    continue
                fg = discretize(InterfaceCurve(i_pl, stack.depth(i_pl), None),
                                wp_big.A, wp_big.c, 10,
                                max(stack.wavenumbers[i_pl - 1].real,
                                    stack.wavenumbers[i_pl].real))
                g1, g2 = _planar_interface_density(stack, sol, i_pl, fg.points[:, 0])
                w = window_wA(fg.points[:, 0], wp_big)
                wq = fg.speed * fg.dt
                k = stack.wavenumbers[j - 1] if i_pl == j - 1 else stack.wavenumbers[j]
                s_k, d_k, k_k, n_k = _cross_kernels(k, tgt, nrm, fg.points, fg.normals)
                if i_pl == j - 1:
                    val_n += d_k @ (wq * w * g1) - s_k @ (wq * w * g2)
                    der_n += n_k @ (wq * w * g1) - k_k @ (wq * w * g2)
                else:
                    nu1 = stack.nu[j]
                    val_n += -d_k @ (wq * w * g1) + nu1 * (s_k @ (wq * w * g2))
                    der_n += -n_k @ (wq * w * g1) + nu1 * (k_k @ (wq * w * g2))
            mv, md = closed_form_mu(stack, sol, j, tgt, nrm, 1e-12)
            scale = max(np.max(np.abs(mv)), np.max(np.abs(md)))
            assert np.max(np.abs(val_n - mv)) <= 1e-6 * scale
            assert np.max(np.abs(der_n - md)) <= 1e-6 * scale


class TestAssembleSystem:
    def test_degenerate_two_layer_identity(self):
        stack = LayerStack(wavenumbers=(8.0, 8.0), depths=(0.0,), nu=(1.0,))
        inc = Incidence(alpha=-0.9)
        sol = planar_coefficients(stack, inc)
        curve = build_interface(stack, 1, None)
        wp = WindowParams(A=2.0, c=0.7)
        grid = discretize(curve, 2.0, 0.7, 10, 8.0)
        system = assemble_system(stack, sol, [curve], [grid], wp)
        m = grid.n_nodes
        expect = np.eye(2 * m)
        assert np.max(np.abs(system.matrix - expect)) < 1e-12
        from wgf2d.solve import solve_dense

        d = solve_dense(system)
        assert np.max(np.abs(np.concatenate(d.phi) - system.rhs[:m])) < 1e-12

    def test_block_tridiagonal_sparsity_n6(self):
        stack = LayerStack(
            wavenumbers=(8.0, 12.0, 9.0, 14.0, 11.0, 10.0),
            depths=(0.0, 0.8, 1.6, 2.4, 3.2),
            nu=(1.0, 1.2, 0.8, 1.0, 1.5),
        )
        inc = Incidence(alpha=-1.2)
        sol = planar_coefficients(stack, inc)
        curves = [build_interface(stack, j, None) for j in range(1, 6)]
        wp = WindowParams(A=2.0, c=0.7)
        grids = [discretize(c, 2.0, 0.7, 6,
                            max(stack.wavenumbers[j].real, stack.wavenumbers[j + 1].real))
                 for j, c in enumerate(curves)]
        system = assemble_system(stack, sol, curves, grids, wp)
        for i in range(1, 6):
            for j in range(1, 6):
                if abs(i - j) > 1:
                    assert np.max(np.abs(system.block(i, j))) == 0.0
                else:
                    assert np.max(np.abs(system.block(i, j))) > 0.0
