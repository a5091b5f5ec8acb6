"""Per-snapshot diagnostics: norms, gradient growth, direction-field health.

All 2D quantities are computed spectrally from the scalar field so they stay
consistent with the solver's own derivatives.  The direction field

    xi = perp_grad(theta) / |perp_grad(theta)|

is only meaningful where the gradient is appreciable, so every xi-based
statistic carries a mask: points with |grad| below ``XI_MASK_REL`` times the
instantaneous maximum are excluded, and the reported coverage is the kept
fraction of the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field1D, Field2D
from .models import check_model, velocity_sqg, velocity_euler2d

XI_MASK_REL = 1e-6


@dataclass
class DiagRow:
    """One diagnostics record; field order matches the CSV column order."""
    t: float
    sup_grad: float
    max_u: float
    l2_theta: float
    energy: float
    bkm_accum: float
    sup_grad_xi_outside: float
    xi_coverage: float

    COLUMNS = ("t", "sup_grad", "max_u", "l2_theta", "energy",
               "bkm_accum", "sup_grad_xi_outside", "xi_coverage")

    def as_tuple(self) -> tuple:
        return (self.t, self.sup_grad, self.max_u, self.l2_theta, self.energy,
                self.bkm_accum, self.sup_grad_xi_outside, self.xi_coverage)


def _second_derivs(theta: Field2D):
    """Spectral theta_11, theta_12, theta_22 as value arrays."""
    spec = theta.spectral()
    n = theta.grid.n
    k = np.fft.fftfreq(n, d=1.0 / n)
    d1 = 1j * k.copy()
    d1[n // 2] = 0.0
    d1c = d1[:, None]
    d1r = d1[None, :]
    t11 = np.fft.ifft2(d1c * d1c * spec).real
    t12 = np.fft.ifft2(d1c * d1r * spec).real
    t22 = np.fft.ifft2(d1r * d1r * spec).real
    return t11, t12, t22


def _first_derivs(theta: Field2D):
    spec = theta.spectral()
    n = theta.grid.n
    k = np.fft.fftfreq(n, d=1.0 / n)
    d1 = 1j * k.copy()
    d1[n // 2] = 0.0
    t1 = np.fft.ifft2(d1[:, None] * spec).real
    t2 = np.fft.ifft2(d1[None, :] * spec).real
    return t1, t2


def grad_norm(theta: Field2D) -> np.ndarray:
    t1, t2 = _first_derivs(theta)
    return np.hypot(t1, t2)


def _xi_gradient_norm(theta: Field2D):
    """|grad xi| (Frobenius) and the validity mask, via the quotient rule.

    Differentiating xi_i = g_i/|g| directly on the grid would put Gibbs
    ringing from the normalisation into the result, so instead grad(xi) is
    assembled from spectral second derivatives of theta:

        d_j xi_i = d_j g_i / |g| - g_i (g . d_j g) / |g|^3

    with g = perp_grad(theta), so d_1 g_1 = -theta_12, d_2 g_1 = -theta_22,
    d_1 g_2 = theta_11, d_2 g_2 = theta_12.
    """
    t1, t2 = _first_derivs(theta)
    g1, g2 = -t2, t1
    gn = np.hypot(g1, g2)
    sup = float(gn.max())
    if sup == 0.0:
        mask = np.zeros(gn.shape, dtype=bool)
        return np.zeros_like(gn), mask
    mask = gn >= XI_MASK_REL * sup
    t11, t12, t22 = _second_derivs(theta)
    dg = ((-t12, -t22), (t11, t12))
    gn_safe = np.where(mask, gn, 1.0)
    total = np.zeros_like(gn)
    for i, gi in enumerate((g1, g2)):
        for j in range(2):
            dot = g1 * dg[0][j] + g2 * dg[1][j]
            dji = dg[i][j] / gn_safe - gi * dot / gn_safe**3
            total += dji * dji
    out = np.sqrt(total)
    out[~mask] = 0.0
    return out, mask


def snapshot_diagnostics(model: str, state, saddle_disc=None) -> DiagRow:
    """Diagnostics for one state; ``bkm_accum`` is left 0 for the caller.

    ``saddle_disc`` is an optional ``(x1, x2, radius)`` exclusion disc
    (periodic distance) so gradient growth of the direction field can be
    reported away from the tracked saddle.  For clm1d the gradient column
    carries sup|omega| (the blow-up functional for that model) and the
    velocity, energy and xi columns are identically zero.
    """
    check_model(model)
    t = 0.0
    if model == "clm1d":
        if not isinstance(state, Field1D):
            raise TypeError("clm1d expects Field1D")
        w = state.values
        sup = float(np.abs(w).max())
        l2 = float(np.sqrt(np.mean(w * w) * (2 * np.pi)))
        return DiagRow(t, sup, 0.0, l2, 0.0, 0.0, 0.0, 0.0)

    if not isinstance(state, Field2D):
        raise TypeError(f"{model} expects Field2D")
    gn = grad_norm(state)
    sup = float(gn.max())
    vel = velocity_sqg(state) if model == "sqg" else velocity_euler2d(state)
    u1, u2 = vel[0].values, vel[1].values
    maxu = float(np.sqrt(u1 * u1 + u2 * u2).max())
    area = (2 * np.pi) ** 2
    v = state.values
    l2 = float(np.sqrt(np.mean(v * v) * area))
    energy = float(0.5 * np.mean(u1 * u1 + u2 * u2) * area)

    xin, mask = _xi_gradient_norm(state)
    if saddle_disc is not None:
        cx, cy, r = saddle_disc
        g = state.grid
        x1, x2 = g.mesh()
        L = g.length
        dx1 = np.abs((x1 - cx + L / 2) % L - L / 2)
        dx2 = np.abs((x2 - cy + L / 2) % L - L / 2)
        outside = dx1 * dx1 + dx2 * dx2 > r * r
    else:
        outside = np.ones(v.shape, dtype=bool)
    sel = mask & outside
    sup_xi = float(xin[sel].max()) if sel.any() else 0.0
    coverage = float(mask.mean())
    return DiagRow(t, sup, maxu, l2, energy, 0.0, sup_xi, coverage)


def bkm_integral(times, sup_grads) -> float:
    """Trapezoid rule accumulation of the blow-up functional."""
    t = np.asarray(times, dtype=float)
    s = np.asarray(sup_grads, dtype=float)
    if t.shape != s.shape or t.ndim != 1:
        raise ValueError("times and sup_grads must be 1D and equal length")
    if len(t) < 2:
        return 0.0
    return float(np.trapezoid(s, t))


def stretching_alpha(theta: Field2D):
    """Lagrangian stretching rate alpha = xi . (S xi) for the sqg velocity.

    S is the symmetric part of grad u.  Returns ``(alpha, mask)`` where
    alpha is a Field2D zeroed off-mask and mask marks points with a usable
    direction field.  alpha is homogeneous of degree zero in theta up to the
    velocity's linear scaling: alpha(c*theta) = c*alpha(theta).
    """
    u1f, u2f = velocity_sqg(theta)
    du11, du12 = _first_derivs(u1f)
    du21, du22 = _first_derivs(u2f)
    s11 = du11
    s22 = du22
    s12 = 0.5 * (du12 + du21)

    t1, t2 = _first_derivs(theta)
    g1, g2 = -t2, t1
    gn = np.hypot(g1, g2)
    sup = float(gn.max())
    if sup == 0.0:
        zero = Field2D(theta.grid, np.zeros_like(gn))
        return zero, np.zeros(gn.shape, dtype=bool)
    mask = gn >= XI_MASK_REL * sup
    gn_safe = np.where(mask, gn, 1.0)
    xi1 = g1 / gn_safe
    xi2 = g2 / gn_safe
    alpha = s11 * xi1 * xi1 + 2 * s12 * xi1 * xi2 + s22 * xi2 * xi2
    alpha[~mask] = 0.0
    return Field2D(theta.grid, alpha), mask


def alpha_consistency_check(snap_a, snap_mid, snap_b) -> dict:
    """Check d/dt log|grad theta| = alpha along trajectories, Eulerian form.

    Takes three ``(t, Field2D)`` snapshots with t_a < t_mid < t_b close
    together.  The material derivative is split as

        (log|g|(t_b) - log|g|(t_a)) / (t_b - t_a) + u . grad log|g| |_mid

    and compared with alpha at the middle time.  Points where |g| at the
    middle time falls below half its maximum are excluded; relative
    deviations use a floored denominator max(|alpha|, 0.05 * max|alpha|)
    so near-zero alpha cannot blow the statistic up.  Returns median and
    max relative deviation plus the mask coverage.
    """
    ta, fa = snap_a
    tm, fm = snap_mid
    tb, fb = snap_b
    if not (ta < tm < tb):
        raise ValueError("snapshots must be time-ordered")
    ga = grad_norm(fa)
    gb = grad_norm(fb)
    gm = grad_norm(fm)
    sup = float(gm.max())
    if sup == 0.0:
        raise ValueError("zero gradient field; nothing to check")
    mask = gm >= 0.5 * sup

    ddt = (np.log(np.where(gb > 0, gb, 1.0))
           - np.log(np.where(ga > 0, ga, 1.0))) / (tb - ta)

    # grad log|g| at the middle time, spectrally via grad|g| = (g . d_j g)/|g|
    t1, t2 = _first_derivs(fm)
    g1, g2 = -t2, t1
    t11, t12, t22 = _second_derivs(fm)
    gm_safe = np.where(mask, gm, 1.0)
    d1_log = (g1 * (-t12) + g2 * t11) / gm_safe**2
    d2_log = (g1 * (-t22) + g2 * t12) / gm_safe**2
    u1, u2 = (f.values for f in velocity_sqg(fm))
    lhs = ddt + u1 * d1_log + u2 * d2_log

    alpha_f, amask = stretching_alpha(fm)
    alpha = alpha_f.values
    sel = mask & amask
    if not sel.any():
        raise ValueError("empty comparison mask")
    a_scale = float(np.abs(alpha[sel]).max())
    denom = np.maximum(np.abs(alpha), 0.05 * a_scale if a_scale > 0 else 1.0)
    rel = np.abs(lhs - alpha) / denom
    return {
        "median_rel_dev": float(np.median(rel[sel])),
        "max_rel_dev": float(rel[sel].max()),
        "coverage": float(sel.mean()),
    }
