"""Brute-force oracles for small instances.

These searchers share no code with the solvers: they enumerate candidate
designs on dense grids and score them through the water-filling reaction
alone (closed forms for one and two subcarriers, cross-checked against
waterfill in the tests).  They exist to pin expected values for the test
suite, so clarity and independence beat speed.

Per subcarrier the search space is restricted to span{g_i, f_i}: any
component orthogonal to both channels spends transmit power without touching
the harvested power or the interference, so an optimal design never uses one.
Beams are parameterized as

    w_i = alpha_i * ghat_i + beta_i * exp(1j psi_i) * uhat_i,

with ghat the unit g direction and uhat the unit component of f orthogonal
to g (dropped when f is parallel to g).  The direct gain is then
alpha^2 ||g||^2 and the phase psi only steers the interference.
"""

from __future__ import annotations

import numpy as np


def _pair_water_level(a1, a2, p_sum):
    """Water level for two floors, vectorized. a_i = (I_i + sigma2)/h_i."""
    both = 0.5 * (p_sum + a1 + a2)
    single = p_sum + np.minimum(a1, a2)
    return np.where(both > np.maximum(a1, a2), both, single)


def _span_basis(g, f):
    """Orthonormal pair (ghat, uhat) spanning span{g, f}; uhat may be None."""
    ng = np.linalg.norm(g)
    if ng == 0:
        # degenerate: no direct gain possible; align the grid with f instead
        fh = f / np.linalg.norm(f)
        return np.zeros_like(f), fh
    ghat = g / ng
    u = f - ghat * (ghat.conj() @ f)
    nu = np.linalg.norm(u)
    if nu < 1e-12 * np.linalg.norm(f):
        return ghat, None
    return ghat, u / nu


def _subcarrier_grid(g, f, q_cap, amp_points, phase_points):
    """Enumerate span beams for one subcarrier.

    Returns (coef_g, coef_u, power, inter, direct): complex coefficients on
    (ghat, uhat) plus the resulting transmit power, interference |f^H w|^2
    and direct gain |g^H w|^2, flattened over the grid.
    """
    ghat, uhat = _span_basis(g, f)
    amps = np.linspace(0.0, np.sqrt(q_cap), amp_points)
    fg = np.vdot(f, ghat) if np.any(ghat) else 0.0   # f^H ghat
    if uhat is None:
        ca = amps.astype(np.complex128)
        cb = np.zeros_like(ca)
    else:
        fu = np.vdot(f, uhat)
        phases = np.exp(1j * np.linspace(0.0, 2.0 * np.pi, phase_points,
                                         endpoint=False))
        a, b, ph = np.meshgrid(amps, amps, phases, indexing="ij")
        keep = (a ** 2 + b ** 2) <= q_cap * (1.0 + 1e-12)
        ca = a[keep].astype(np.complex128)
        cb = (b[keep] * ph[keep]).astype(np.complex128)
    power = np.abs(ca) ** 2 + np.abs(cb) ** 2
    if uhat is None:
        inter = np.abs(ca * fg) ** 2
    else:
        inter = np.abs(ca * fg + cb * fu) ** 2
    ng2 = float(np.linalg.norm(g) ** 2)
    direct = np.abs(ca) ** 2 * ng2
    return ca, cb, power, inter, direct


def _reduce_candidates(power, inter, direct, i_bins, gamma):
    """Keep, per interference bin, the (power, direct) Pareto front.

    Every kept index is an actual grid point; the reduction only thins points
    that cannot win the joint composition by more than the intra-bin
    interference spread.
    """
    cap = min(float(inter.max()), gamma) if gamma < np.inf else float(inter.max())
    edges = np.linspace(0.0, cap + 1e-300, i_bins)
    bins = np.searchsorted(edges, inter, side="right")
    keep = []
    order = np.lexsort((power, bins))
    prev_bin, best_d = -1, -np.inf
    for idx in order:
        b = bins[idx]
        if b != prev_bin:
            prev_bin, best_d = b, -np.inf
        if direct[idx] > best_d:       # increasing power within a bin must pay off
            best_d = direct[idx]
            keep.append(idx)
    return np.array(keep, dtype=np.intp)


def brute_force_p1(s, amp_points=72, phase_points=48, i_bins=220,
                   chunk=200_000):
    """Exhaustive span-grid search of the full design problem, N <= 2.

    Returns (total, omegas).  Every candidate satisfies the per-subcarrier
    peak, the sum power budget, and the interference-temperature budget, and
    is scored by the exact self-consistent reaction.
    """
    n, m = s.n_subcarriers, s.n_antennas
    if n > 2:
        raise ValueError("brute_force_p1 supports at most two subcarriers")
    q_cap = min(s.q_peak, s.q_sum)
    grids = [_subcarrier_grid(s.g[i], s.f[i], q_cap, amp_points, phase_points)
             for i in range(n)]

    if n == 1:
        ca, cb, power, inter, direct = grids[0]
        ok = (power <= q_cap * (1 + 1e-12)) & (inter <= s.gamma * (1 + 1e-12) + 1e-300)
        if not ok.any():
            return 0.0, np.zeros((1, m), dtype=np.complex128)
        # single subcarrier: the primary pours p_sum regardless, reactive is flat
        total = direct[ok] + s.phi[0] * s.p_sum
        k = int(np.argmax(total))
        idx = np.flatnonzero(ok)[k]
        ghat, uhat = _span_basis(s.g[0], s.f[0])
        w = ca[idx] * ghat + (cb[idx] * uhat if uhat is not None else 0.0)
        return float(total[k]), w.reshape(1, m)

    reduced = []
    for ca, cb, power, inter, direct in grids:
        keep = _reduce_candidates(power, inter, direct, i_bins, s.gamma)
        reduced.append((ca[keep], cb[keep], power[keep], inter[keep], direct[keep]))

    (ca1, cb1, pw1, in1, d1), (ca2, cb2, pw2, in2, d2) = reduced
    best = (-np.inf, 0, 0)
    for lo in range(0, pw1.shape[0], max(1, chunk // max(pw2.shape[0], 1))):
        hi = min(lo + max(1, chunk // max(pw2.shape[0], 1)), pw1.shape[0])
        pw = pw1[lo:hi, None] + pw2[None, :]
        it = in1[lo:hi, None] + in2[None, :]
        ok = (pw <= s.q_sum * (1 + 1e-12)) & (it <= s.gamma * (1 + 1e-12) + 1e-300)
        if not ok.any():
            continue
        a1 = (in1[lo:hi, None] + s.sigma2) / s.h[0] + np.zeros_like(pw)
        a2 = (in2[None, :] + s.sigma2) / s.h[1] + np.zeros_like(pw)
        lam = _pair_water_level(a1, a2, s.p_sum)
        reactive = (s.phi[0] * np.maximum(lam - a1, 0.0)
                    + s.phi[1] * np.maximum(lam - a2, 0.0))
        total = np.where(ok, d1[lo:hi, None] + d2[None, :] + reactive, -np.inf)
        k = int(np.argmax(total))
        i, j = divmod(k, total.shape[1])
        if total[i, j] > best[0]:
            best = (float(total[i, j]), lo + i, j)

    total, i, j = best
    omegas = np.zeros((2, m), dtype=np.complex128)
    for sc, (caj, cbj, idx) in enumerate((( ca1, cb1, i), (ca2, cb2, j))):
        ghat, uhat = _span_basis(s.g[sc], s.f[sc])
        w = caj[idx] * ghat
        if uhat is not None:
            w = w + cbj[idx] * uhat
        omegas[sc] = w
    return total, omegas


def brute_force_p2(s, lam, resolution=400):
    """Grid check: can powers in [0, q_peak]^N hold the water level at lam?

    Aligned interference (c_i = ||f_i||^2 per unit power) as in the level
    range analysis.  The water-filling equality is accepted within a slack
    of half a grid step times N * max(c_i/h_i), the Lipschitz bound of the
    equality residual under rounding each power to the grid; the inequality
    budgets get the matching rounding allowance.  Returns
    (feasible, best_residual, witness_q).
    """
    n = s.n_subcarriers
    if n > 2:
        raise ValueError("brute_force_p2 supports at most two subcarriers")
    c = np.sum(np.abs(s.f) ** 2, axis=1)
    qs = [np.linspace(0.0, s.q_peak, resolution) for _ in range(n)]
    if n == 1:
        q = qs[0][:, None]
    else:
        q1, q2 = np.meshgrid(qs[0], qs[1], indexing="ij")
        q = np.stack([q1.ravel(), q2.ravel()], axis=1)
    spacing = s.q_peak / (resolution - 1) if resolution > 1 else s.q_peak
    slack = 0.5 * spacing * n * float(np.max(c / s.h)) + 1e-12 * s.p_sum
    inter = q @ c
    power = q.sum(axis=1)
    allow_i = 0.5 * spacing * c.sum()
    allow_p = 0.5 * spacing * n
    ok = (inter <= s.gamma + allow_i) & (power <= s.q_sum + allow_p)
    water = np.maximum(lam - (q * c + s.sigma2) / s.h, 0.0).sum(axis=1)
    residual = np.abs(water - s.p_sum)
    residual = np.where(ok, residual, np.inf)
    k = int(np.argmin(residual))
    return bool(residual[k] <= slack), float(residual[k]), q[k].copy()
