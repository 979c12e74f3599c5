"""Dense solution of the windowed system and density bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NumericsError

_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class DensityVector:
    """Per-interface sampled densities (phi_j, psi_j) aligned with the grids."""

    grids: list = field(repr=False)
    phi: list = field(repr=False)  # list of complex arrays, one per interface
    psi: list = field(repr=False)
    residual: float = 0.0

    @property
    def n_interfaces(self) -> int:
        return len(self.phi)

    def as_vector(self) -> np.ndarray:
        """Block vector [phi_1, psi_1, ..., phi_{N-1}, psi_{N-1}]."""
        return np.concatenate(
            [np.concatenate([p, q]) for p, q in zip(self.phi, self.psi)]
        )

    def w_is_one_masks(self):
        return [g.w_is_one for g in self.grids]


def solve_dense(system) -> DensityVector:
    """Direct LU solve of the windowed system with a residual check."""
    mat = system.matrix
    rhs = system.rhs
    try:
        lu, piv = lu_factor(mat)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericsError(f"factorization failed: {exc}") from exc
    if not np.all(np.isfinite(lu)):
        raise NumericsError("factorization produced non-finite entries (singular system?)")
    x = lu_solve((lu, piv), rhs)
    bnorm = np.linalg.norm(rhs)
    res = float(np.linalg.norm(mat @ x - rhs) / bnorm) if bnorm > 0 else 0.0
    if not np.all(np.isfinite(x)) or not np.isfinite(res) or res > _RESIDUAL_TOL:
        diag = np.abs(np.diag(lu))
        diag_min = float(np.min(diag))
        diag_max = float(np.max(diag))
        raise NumericsError(
            f"solve residual {res:.2e} exceeds {_RESIDUAL_TOL:.0e}; "
            f"condition indicator |u_max|/|u_min| = {diag_max / max(diag_min, 1e-300):.2e}"
        )
    phi, psi = [], []
    for j, g in enumerate(system.grids):
        o = system.offsets[j]
        m = g.n_nodes
        phi.append(x[o : o + m].copy())
        psi.append(x[o + m : o + 2 * m].copy())
    return DensityVector(grids=list(system.grids), phi=phi, psi=psi, residual=res)


@dataclass(frozen=True)
class DensityView:
    """Restriction of a density vector to selected nodes per interface."""

    t: list = field(repr=False)
    points: list = field(repr=False)
    phi: list = field(repr=False)
    psi: list = field(repr=False)


def restrict_reliable(d: DensityVector) -> DensityView:
    """Nodes where w_A = 1, the region carrying the accuracy guarantee."""
    masks = d.w_is_one_masks()
    return DensityView(
        t=[g.t[m] for g, m in zip(d.grids, masks)],
        points=[g.points[m] for g, m in zip(d.grids, masks)],
        phi=[p[m] for p, m in zip(d.phi, masks)],
        psi=[q[m] for q, m in zip(d.psi, masks)],
    )


def density_error(d1: DensityVector, d2: DensityVector, region: str = "defect") -> float:
    """Max relative difference of two densities on matching nodes.

    `region` selects the comparison nodes: "defect" (defect-surface nodes,
    the paper's error metric) or "w1" (the whole reliable region).  d2 may
    live on a refined or wider grid as long as its nodes contain d1's
    comparison nodes; the error is computed separately for phi and psi,
    each normalized by max |d2|, and combined by max.
    """
    if d1.n_interfaces != d2.n_interfaces:
        raise NumericsError("density vectors live on different stacks")
    worst = 0.0
    for g1, g2, p1, p2, q1, q2 in zip(
        d1.grids, d2.grids, d1.phi, d2.phi, d1.psi, d2.psi
    ):
        if region == "defect":
            m1 = g1.defect_mask()
        elif region == "w1":
            m1 = g1.w_is_one
        else:
            raise NumericsError(f"unknown comparison region {region!r}")
        if not np.any(m1):
            continue
        t_sel = g1.t[m1]
        idx = np.searchsorted(g2.t, t_sel)
        idx = np.clip(idx, 0, g2.n_nodes - 1)
        left = np.clip(idx - 1, 0, g2.n_nodes - 1)
        use_left = np.abs(g2.t[left] - t_sel) < np.abs(g2.t[idx] - t_sel)
        idx = np.where(use_left, left, idx)
        if np.max(np.abs(g2.t[idx] - t_sel)) > 1e-9 * max(g1.dt, g2.dt):
            raise NumericsError(
                "grids do not share the comparison nodes; rerun with matching "
                "anchored discretizations"
            )
        for a, b in ((p1, p2), (q1, q2)):
            ref = b[idx]
            scale = np.max(np.abs(ref))
            if scale == 0.0:
                continue
            worst = max(worst, float(np.max(np.abs(a[m1] - ref)) / scale))
    return worst
