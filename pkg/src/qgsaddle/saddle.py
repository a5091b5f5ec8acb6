"""Saddle detection, tracking, opening-angle measurement, and envelopes.

A hyperbolic saddle of the level-set topology is a critical point of theta
whose Hessian has mixed signature.  Its two separatrix lines are the null
directions of the Hessian quadratic form u.H u = 0.  Each line has a
well-defined angle modulo pi; folding both into (-pi/2, pi/2] and ordering
them phi1 <= phi2 gives the chart used here:

* if phi2 - phi1 <= pi/2 the opening angle is gamma = phi2 - phi1, the
  branch slopes are beta = -tan(phi1) and delta = tan(phi2) (slopes of the
  lines y2 = -beta*y1 and y2 = delta*y1), and the bisector angle is the
  mean of the two angles;
* otherwise the complementary pair of sectors is the opening: gamma =
  pi - (phi2 - phi1), the bisector is rotated a quarter turn, and the
  slopes are reported symmetrically about that bisector, beta = delta =
  tan(gamma/2), because the x1-axis chart cannot represent lines that
  straddle the vertical.

In both cases gamma = arctan(beta) + arctan(delta) holds exactly and gamma
is invariant under rigid rotation of the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field2D, eval_at, eval_derivs_at

SLOPE_CAP_DEFAULT = 10.0
DEGENERATE_REL_TOL = 1e-8
# A critical point whose Hessian norm falls below this fraction of the
# field's characteristic curvature (sup |grad| / dx) is a truncation
# artifact, not a resolved feature.  Where a field is locally flat, the
# interpolant's ringing still has transversal gradient zeros; Newton
# converges on them exactly, and their det H and |H|^2 scale together, so
# the relative det test alone cannot flag them.  Measured on rasterized
# compact-support profiles, ringing zeros carry |H| of a few 1e-6 times
# sup|grad|/dx while resolved saddles sit above 5e-2 of it; 1e-4 splits
# the two populations with two decades of margin on each side.
DEGENERATE_NORM_FACTOR = 1e-4
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50

_ORDERS = ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
TWO_PI = 2.0 * np.pi


@dataclass
class SaddleRecord:
    t: float
    pos: tuple[float, float]
    beta: float
    delta: float
    gamma: float
    quality: float
    frame_angle: float
    flag: str = "ok"          # ok | degenerate | out-of-model

    def __post_init__(self):
        if self.flag == "ok":
            assert 0.0 < self.gamma < np.pi
            assert abs(self.gamma
                       - (np.arctan(self.beta) + np.arctan(self.delta))) < 1e-12
        assert self.quality >= 0.0


@dataclass
class SaddleTrack:
    records: list = field(default_factory=list)
    terminated: bool = False
    reason: str | None = None  # lost | merged | left-region

    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def gammas(self) -> np.ndarray:
        return np.array([r.gamma for r in self.records])


@dataclass
class EllipseFit:
    t: float
    center: tuple[float, float]
    a: float
    b: float
    aspect: float


def _fold_line_angle(phi):
    """Fold an angle to the line chart (-pi/2, pi/2]."""
    out = np.mod(phi + np.pi / 2, np.pi) - np.pi / 2
    if out <= -np.pi / 2 + 1e-15:
        out += np.pi
    return out


def saddle_geometry(t11: float, t12: float, t22: float):
    """(beta, delta, gamma, frame_angle) from Hessian entries at a saddle.

    Requires det H < 0.  The separatrix angles come from the eigen-structure:
    with eigenpairs (lam1 < 0 < lam2, v1, v2), the null lines are spanned by
    v1 +- sqrt(-lam1/lam2) * v2.
    """
    H = np.array([[t11, t12], [t12, t22]])
    evals, evecs = np.linalg.eigh(H)
    lam1, lam2 = evals
    if not (lam1 < 0.0 < lam2):
        raise ValueError("not a saddle Hessian")
    s = np.sqrt(-lam1 / lam2)
    d_plus = evecs[:, 0] + s * evecs[:, 1]
    d_minus = evecs[:, 0] - s * evecs[:, 1]
    phi_a = _fold_line_angle(np.arctan2(d_plus[1], d_plus[0]))
    phi_b = _fold_line_angle(np.arctan2(d_minus[1], d_minus[0]))
    phi1, phi2 = min(phi_a, phi_b), max(phi_a, phi_b)
    spread = phi2 - phi1
    if spread <= np.pi / 2:
        gamma = spread
        beta = -np.tan(phi1)
        delta = np.tan(phi2)
        frame = 0.5 * (phi1 + phi2)
    else:
        gamma = np.pi - spread
        frame = _fold_line_angle(0.5 * (phi1 + phi2) + np.pi / 2)
        beta = delta = np.tan(0.5 * gamma)
    # enforce the exact identity against tan/arctan roundoff
    gamma = np.arctan(beta) + np.arctan(delta)
    return float(beta), float(delta), float(gamma), float(frame)


def _candidate_cells(theta: Field2D) -> tuple[np.ndarray, np.ndarray, float]:
    """Centers of grid cells where both gradient components change sign,
    plus the grid supremum of the gradient magnitude (the field scale used
    for noise floors)."""
    spec = theta.spectral()
    n = theta.grid.n
    k = np.fft.fftfreq(n, d=1.0 / n)
    d = 1j * k.copy()
    d[n // 2] = 0.0
    g1 = np.fft.ifft2(d[:, None] * spec).real
    g2 = np.fft.ifft2(d[None, :] * spec).real

    def corners(g):
        return np.stack([g, np.roll(g, -1, 0), np.roll(g, -1, 1),
                         np.roll(np.roll(g, -1, 0), -1, 1)])

    def straddles(c):
        return (c.min(axis=0) <= 0.0) & (c.max(axis=0) >= 0.0)

    c1 = corners(g1)
    c2 = corners(g2)
    cells = straddles(c1) & straddles(c2)
    # Exclude flat plateaus and their truncation ringing: isolated critical
    # points keep cell-level gradients of order |H|*dx, far above this floor.
    gmag = np.hypot(np.abs(c1).max(axis=0), np.abs(c2).max(axis=0))
    sup = float(gmag.max())
    if sup == 0.0:
        return np.empty(0), np.empty(0), 0.0
    cells &= gmag >= 1e-6 * sup
    i, j = np.nonzero(cells)
    dx = theta.grid.dx
    return (i + 0.5) * dx, (j + 0.5) * dx, sup


_NEWTON_CHUNK = 2048


def _newton_refine(theta: Field2D, x1: np.ndarray, x2: np.ndarray):
    """Batched Newton iteration for grad(theta) = 0; returns refined points,
    their derivative rows, and a convergence mask.

    Point evaluation builds an (m, n) phase matrix, so large candidate
    batches are processed in fixed-size chunks to bound memory.
    """
    m = len(x1)
    if m > _NEWTON_CHUNK:
        parts = [_newton_refine(theta, x1[s:s + _NEWTON_CHUNK],
                                x2[s:s + _NEWTON_CHUNK])
                 for s in range(0, m, _NEWTON_CHUNK)]
        return (np.concatenate([p[0] for p in parts]),
                np.concatenate([p[1] for p in parts]),
                np.concatenate([p[2] for p in parts], axis=1),
                np.concatenate([p[3] for p in parts]))
    x1 = x1.copy()
    x2 = x2.copy()
    active = np.ones(m, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        if not active.any():
            break
        d = eval_derivs_at(theta, x1[active], x2[active], _ORDERS)
        g1, g2, t11, t12, t22 = d
        gn = np.hypot(g1, g2)
        idx = np.nonzero(active)[0]
        done = gn < NEWTON_TOL
        active[idx[done]] = False
        todo = ~done
        if not todo.any():
            continue
        sub = idx[todo]
        det = t11[todo] * t22[todo] - t12[todo] ** 2
        scale = t11[todo] ** 2 + 2 * t12[todo] ** 2 + t22[todo] ** 2
        ok = np.abs(det) > 1e-14 * np.maximum(scale, 1e-300)
        s1 = np.zeros(todo.sum())
        s2 = np.zeros(todo.sum())
        # regular Newton step where the Hessian is invertible
        s1[ok] = (t22[todo][ok] * g1[todo][ok]
                  - t12[todo][ok] * g2[todo][ok]) / det[ok]
        s2[ok] = (-t12[todo][ok] * g1[todo][ok]
                  + t11[todo][ok] * g2[todo][ok]) / det[ok]
        # pseudo-inverse step along degenerate directions
        if (~ok).any():
            for w in np.nonzero(~ok)[0]:
                J = np.array([[t11[todo][w], t12[todo][w]],
                              [t12[todo][w], t22[todo][w]]])
                step = np.linalg.pinv(J, rcond=1e-10) @ np.array(
                    [g1[todo][w], g2[todo][w]])
                s1[w], s2[w] = step
        # keep steps sane; a diverging candidate gets dropped later anyway
        cap = 2.0 * theta.grid.dx
        norm = np.hypot(s1, s2)
        big = norm > cap
        s1[big] *= cap / norm[big]
        s2[big] *= cap / norm[big]
        x1[sub] -= s1
        x2[sub] -= s2
    # final derivative refresh for points that moved on the last pass
    d = eval_derivs_at(theta, x1, x2, _ORDERS)
    converged = np.hypot(d[0], d[1]) < NEWTON_TOL
    return np.mod(x1, TWO_PI), np.mod(x2, TWO_PI), d, converged


def _in_region(x1, x2, region) -> bool:
    if region is None:
        return True
    x0, x1b, y0, y1b = region
    return (np.mod(x1 - x0, TWO_PI) <= (x1b - x0) + 1e-12
            and np.mod(x2 - y0, TWO_PI) <= (y1b - y0) + 1e-12)


def _quality(theta: Field2D, x1: float, x2: float, derivs) -> float:
    """Normalized residual of the local quadratic model on a small circle."""
    g1, g2, t11, t12, t22 = derivs
    h = 2.0 * theta.grid.dx
    ang = np.arange(8) * (np.pi / 4)
    y1 = h * np.cos(ang)
    y2 = h * np.sin(ang)
    center = eval_at(theta, np.array([x1]), np.array([x2]))[0]
    actual = eval_at(theta, x1 + y1, x2 + y2)
    pred = (center + g1 * y1 + g2 * y2
            + 0.5 * (t11 * y1 * y1 + 2 * t12 * y1 * y2 + t22 * y2 * y2))
    hnorm = np.sqrt(t11 * t11 + 2 * t12 * t12 + t22 * t22)
    denom = 0.5 * max(hnorm, 1e-300) * h * h
    return float(np.sqrt(np.mean((actual - pred) ** 2)) / denom)


def detect_saddles(theta: Field2D, region=None, t: float = 0.0,
                   slope_cap: float = SLOPE_CAP_DEFAULT) -> list[SaddleRecord]:
    """All sub-pixel saddles of theta, optionally restricted to a rectangle.

    Grid cells where both gradient components straddle zero seed a batched
    Newton iteration on grad(theta) = 0 using spectral point evaluation.
    Converged critical points with det H < 0 become records; points whose
    |det H| falls below DEGENERATE_REL_TOL * |H|^2, or whose Hessian norm
    falls below the field's noise-floor curvature, are reported with flag
    "degenerate" (callers exclude them from tracks).  Slopes beyond
    ``slope_cap`` or beta+delta < 0 flag the record "out-of-model".

    ``region`` is (x1_min, x1_max, x2_min, x2_max), interpreted periodically
    so it may straddle the box edge (e.g. (-0.5, 0.5, ...)).
    """
    c1, c2, sup_grad = _candidate_cells(theta)
    if len(c1) == 0:
        return []
    x1, x2, derivs, converged = _newton_refine(theta, c1, c2)

    records: list[SaddleRecord] = []
    taken: list[tuple[float, float]] = []
    dedupe = max(1e-7 * TWO_PI, 0.25 * theta.grid.dx)
    hfloor = DEGENERATE_NORM_FACTOR * sup_grad / theta.grid.dx
    order = np.argsort(np.hypot(derivs[0], derivs[1]))
    for idx in order:
        if not converged[idx]:
            continue
        p1, p2 = float(x1[idx]), float(x2[idx])
        if not _in_region(p1, p2, region):
            continue
        if any(_perdist(p1, p2, q1, q2) < dedupe for q1, q2 in taken):
            continue
        g1, g2, t11, t12, t22 = (float(v[idx]) for v in derivs)
        det = t11 * t22 - t12 * t12
        hsq = t11 * t11 + 2 * t12 * t12 + t22 * t22
        taken.append((p1, p2))
        if (abs(det) <= DEGENERATE_REL_TOL * max(hsq, 1e-300)
                or np.sqrt(hsq) <= hfloor):
            records.append(SaddleRecord(t, (p1, p2), 0.0, 0.0, np.pi / 2,
                                        _quality(theta, p1, p2,
                                                 (g1, g2, t11, t12, t22)),
                                        0.0, flag="degenerate"))
            continue
        if det > 0.0:
            continue  # extremum, not a saddle
        beta, delta, gamma, frame = saddle_geometry(t11, t12, t22)
        flag = "ok"
        if beta + delta < 0.0 or max(abs(beta), abs(delta)) > slope_cap:
            flag = "out-of-model"
        records.append(SaddleRecord(
            t, (p1, p2), beta, delta, gamma,
            _quality(theta, p1, p2, (g1, g2, t11, t12, t22)), frame, flag))
    records.sort(key=lambda r: r.pos)
    return records


def _perdist(a1, a2, b1, b2) -> float:
    d1 = abs(a1 - b1)
    d2 = abs(a2 - b2)
    d1 = min(d1, TWO_PI - d1)
    d2 = min(d2, TWO_PI - d2)
    return float(np.hypot(d1, d2))


def track_saddle(snapshots, seed: SaddleRecord, region=None,
                 r_c: float | None = None) -> SaddleTrack:
    """Follow one saddle through time-ordered ``(t, Field2D)`` snapshots.

    At each snapshot the detected saddle nearest the previous position (in
    the periodic metric) continues the track if it lies within the
    continuity radius ``r_c`` (default 10 grid cells).  Otherwise the track
    terminates: "lost" when nothing is within reach (e.g. the saddle
    annihilated with an extremum), "merged" when the nearest candidate is
    degenerate or out-of-model, "left-region" when it walked out of the
    requested rectangle.
    """
    track = SaddleTrack()
    if not snapshots:
        return track
    t0, theta0 = snapshots[0]
    if abs(seed.t - t0) > 1e-9:
        raise ValueError("seed time does not match the first snapshot")
    if r_c is None:
        r_c = 10.0 * theta0.grid.dx
    pos = seed.pos
    for t, theta in snapshots:
        found = detect_saddles(theta, region=None, t=t)
        if not found:
            track.terminated, track.reason = True, "lost"
            return track
        dists = [_perdist(pos[0], pos[1], r.pos[0], r.pos[1]) for r in found]
        nearest = found[int(np.argmin(dists))]
        if min(dists) > r_c:
            track.terminated, track.reason = True, "lost"
            return track
        if nearest.flag != "ok":
            track.terminated, track.reason = True, "merged"
            return track
        if not _in_region(nearest.pos[0], nearest.pos[1], region):
            track.terminated, track.reason = True, "left-region"
            return track
        track.records.append(nearest)
        pos = nearest.pos
    return track


def gamma_ode_ratio(track: SaddleTrack):
    """Series (t, r) with r = |dgamma/dt| / (gamma * (1 + |log gamma|)).

    gamma(t) is first smoothed by a moving least-squares quadratic over a
    5-point window, then differenced centrally; the denominator's 1+|log|
    keeps the statistic defined for gamma near or above 1 without changing
    the gamma -> 0 behavior.  Needs at least 5 records.
    """
    recs = [r for r in track.records if r.flag == "ok"]
    if len(recs) < 5:
        raise ValueError("track too short: need at least 5 usable records")
    t = np.array([r.t for r in recs])
    g = np.array([r.gamma for r in recs])
    m = len(t)
    smoothed = np.empty(m)
    for i in range(m):
        lo = max(0, min(i - 2, m - 5))
        w_t = t[lo:lo + 5]
        w_g = g[lo:lo + 5]
        X = np.stack([np.ones(5), w_t - t[i], (w_t - t[i]) ** 2], axis=1)
        coef, *_ = np.linalg.lstsq(X, w_g, rcond=None)
        smoothed[i] = coef[0]
    ts = t[1:-1]
    dg = (smoothed[2:] - smoothed[:-2]) / (t[2:] - t[:-2])
    gs = smoothed[1:-1]
    if np.any(gs <= 0):
        raise ValueError("smoothed gamma must stay positive")
    r = np.abs(dg) / (gs * (1.0 + np.abs(np.log(gs))))
    return ts, r


def double_exp_envelope(C: float, gamma0: float, ts, method: str = "closed_form"):
    """Envelope gamma(t) solving dgamma/dt = -C gamma log(1/gamma).

    ``closed_form`` evaluates gamma(t) = exp(-e^{C t} log(1/gamma0));
    ``numeric`` integrates the ODE from t=0 with RK4 at a step of
    min(sample gaps)/100, landing exactly on every requested time.
    """
    if not (0.0 < gamma0 < 1.0):
        raise ValueError(f"gamma0 must lie in (0, 1), got {gamma0}")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1 or len(ts) == 0 or np.any(np.diff(ts) <= 0) or ts[0] < 0:
        raise ValueError("ts must be a nonempty increasing list of times >= 0")
    if method == "closed_form":
        return np.exp(-np.exp(C * ts) * np.log(1.0 / gamma0))
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")

    gaps = np.diff(np.concatenate([[0.0], ts]))
    gaps = gaps[gaps > 0]
    dt = gaps.min() / 100.0

    def rhs(gamma):
        return -C * gamma * np.log(1.0 / gamma)

    out = np.empty(len(ts))
    t_cur, g_cur = 0.0, gamma0
    for i, t_target in enumerate(ts):
        span = t_target - t_cur
        if span > 0:
            nsub = max(1, int(np.ceil(span / dt - 1e-12)))
            h = span / nsub
            for _ in range(nsub):
                k1 = rhs(g_cur)
                k2 = rhs(g_cur + 0.5 * h * k1)
                k3 = rhs(g_cur + 0.5 * h * k2)
                k4 = rhs(g_cur + h * k3)
                g_cur += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t_cur = t_target
        out[i] = g_cur
    return out


def fit_ellipse(theta: Field2D, region, t: float = 0.0) -> EllipseFit:
    """Quadratic-form fit of the level sets around an extremum in region.

    Newton-refines the critical points seeded in the rectangle and picks the
    extremum (det H > 0) with the largest |H|.  After principal-axis
    rotation the local model is a*x1^2 + b*x2^2 with a <= b up to a common
    positive scale, reported so aspect = b/a >= 1.  Raises ValueError
    ("not elliptic") when the region holds only saddle-type critical points.
    """
    c1, c2, sup_grad = _candidate_cells(theta)
    keep = [i for i in range(len(c1)) if _in_region(c1[i], c2[i], region)]
    if not keep:
        raise ValueError("no critical point candidates in region")
    x1, x2, derivs, converged = _newton_refine(
        theta, c1[keep], c2[keep])
    hfloor = DEGENERATE_NORM_FACTOR * sup_grad / theta.grid.dx
    best = None
    for i in range(len(x1)):
        if not converged[i] or not _in_region(x1[i], x2[i], region):
            continue
        _, _, t11, t12, t22 = (float(v[i]) for v in derivs)
        det = t11 * t22 - t12 * t12
        hsq = t11 * t11 + 2 * t12 * t12 + t22 * t22
        if np.sqrt(hsq) <= hfloor:
            continue
        if det > DEGENERATE_REL_TOL * max(hsq, 1e-300):
            if best is None or hsq > best[3]:
                best = (float(x1[i]), float(x2[i]), (t11, t12, t22), hsq)
    if best is None:
        raise ValueError("not elliptic: no nondegenerate extremum in region")
    p1, p2, (t11, t12, t22), _ = best
    evals = np.linalg.eigvalsh(np.array([[t11, t12], [t12, t22]]))
    mags = np.sort(np.abs(evals)) / 2.0  # quadratic-form coefficients
    a, b = float(mags[0]), float(mags[1])
    return EllipseFit(t, (p1, p2), a, b, b / a)
