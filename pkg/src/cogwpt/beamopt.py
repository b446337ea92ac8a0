"""Joint beam and water-level design by dual decomposition.

For a fixed water level the design problem decouples across subcarriers once
the coupling budgets are priced by multipliers (eta1 for interference, mu1
for sum power, theta1 for the primary power identity).  Each per-subcarrier
piece splits into two cases by the sign of the primary's residual water
depth; both are lifted to small semidefinite programs and the better case
wins.  An ellipsoid loop prices the budgets, and an outer one-dimensional
search over the reachable water levels finishes the job.

Every subproblem is solved in a 2-D subspace: components of a beam outside
span{g_i, f_i} change neither the harvested power nor the interference and
only waste transmit power, so the lifted matrices can be reduced to 2x2
before they reach the interior-point engine, which then handles all
subcarriers in one batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ellipsoid import EllipsoidCollapse, EllipsoidState, OracleResult, \
    ellipsoid_minimize
from .lambda_range import lambda_range
from .sdp import SdpConstraint, SdpInstance, extract_rank_one, solve_sdp_batch
from .waterfill import PowerBreakdown, received_power

_BOUNDARY_BAND = 1e-12


class DualConvergenceError(RuntimeError):
    """Multiplier search ran out of iterations before the gap closed."""

    def __init__(self, message, gap):
        super().__init__(message)
        self.gap = gap


@dataclass
class P3DualPoint:
    eta1: float
    mu1: float
    theta1: float

    def __post_init__(self):
        if not (self.eta1 >= 0 and self.mu1 >= 0):
            raise ValueError("eta1 and mu1 must be nonnegative")


@dataclass
class BeamformingSolution:
    omegas: np.ndarray            # (N, M) complex beams, sqrt(W) units
    lam: float                    # induced water level
    breakdown: PowerBreakdown
    residuals: dict               # signed constraint margins, <= 0 is satisfied
    duals: P3DualPoint
    grid_lam: float               # water-level grid point that won
    skipped: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


class _Bank:
    """Per-subcarrier reduced matrices, built once per scenario."""

    def __init__(self, s):
        n, m = s.n_subcarriers, s.n_antennas
        r = min(m, 2)
        basis = np.empty((n, m, r), dtype=np.complex128)
        for i in range(n):
            span = np.stack([s.g[i], s.f[i]], axis=1)
            q, _ = np.linalg.qr(span)
            basis[i] = q[:, :r]
        gr = np.einsum("nmr,nm->nr", basis.conj(), s.g)
        fr = np.einsum("nmr,nm->nr", basis.conj(), s.f)
        self.r = r
        self.basis = basis
        self.G = gr[:, :, None] * gr[:, None, :].conj()
        self.F = fr[:, :, None] * fr[:, None, :].conj()
        self.fr = fr
        self.f2 = np.sum(np.abs(fr) ** 2, axis=1)


class _LevelProblem:
    """All fixed-level data: branch masks, stacked constraint rows."""

    def __init__(self, bank, s, lam):
        n, r = s.n_subcarriers, bank.r
        self.bank, self.s, self.lam = bank, s, lam
        self.req = s.h * lam - s.sigma2
        cap = s.q_peak * bank.f2
        # floor case: feasible when the interference floor fits under the
        # peak budget; at the boundary the feasible set is a single beam
        self.forced = np.abs(self.req - cap) <= _BOUNDARY_BAND * \
            np.maximum(np.abs(self.req), cap)
        self.idx_a = np.flatnonzero((self.req < cap) & ~self.forced)
        self.idx_b = np.flatnonzero(self.req >= 0.0)
        if not all(((self.req < cap) | self.forced | (self.req >= 0.0))):
            raise AssertionError("subcarrier with both cases infeasible")
        eye = np.eye(r, dtype=np.complex128)
        rows_a = np.stack([-bank.F[self.idx_a], np.broadcast_to(
            eye, (self.idx_a.size, r, r))], axis=1)
        rows_b = np.stack([bank.F[self.idx_b], np.broadcast_to(
            eye, (self.idx_b.size, r, r))], axis=1)
        self.rows = np.concatenate([rows_a, rows_b], axis=0)
        self.bounds = np.concatenate([
            np.stack([-self.req[self.idx_a],
                      np.full(self.idx_a.size, s.q_peak)], axis=1),
            np.stack([self.req[self.idx_b],
                      np.full(self.idx_b.size, s.q_peak)], axis=1)], axis=0)
        self.lam_term = lam - s.sigma2 / s.h
        # forced-case beam and its fixed interference/power
        self.w_forced = np.sqrt(s.q_peak) * bank.fr / \
            np.sqrt(np.maximum(bank.f2, 1e-300))[:, None]

    def objectives(self, eta1, mu1, theta1):
        bank, s = self.bank, self.s
        eye = np.eye(bank.r)
        c_a = bank.G - eta1 * bank.F - mu1 * eye
        coef_b = -eta1 + (theta1 - s.phi) / s.h
        c_b = bank.G + coef_b[:, None, None] * bank.F - mu1 * eye
        const_b = (s.phi - theta1) * self.lam_term
        return c_a, c_b, const_b

    def solve(self, eta1, mu1, theta1):
        bank, s = self.bank, self.s
        n, r = s.n_subcarriers, bank.r
        c_a, c_b, const_b = self.objectives(eta1, mu1, theta1)

        psi_a = np.full(n, -np.inf)
        psi_b = np.full(n, -np.inf)
        w_a = np.zeros((n, r, r), dtype=np.complex128)
        w_b = np.zeros((n, r, r), dtype=np.complex128)
        gap_max = 0.0
        if self.rows.shape[0]:
            cmats = np.concatenate([c_a[self.idx_a], c_b[self.idx_b]], axis=0)
            out = solve_sdp_batch(cmats, self.rows, self.bounds)
            gap_max = float(np.max(out["gap"])) if out["gap"].size else 0.0
            na = self.idx_a.size
            psi_a[self.idx_a] = out["value"][:na]
            w_a[self.idx_a] = out["w"][:na]
            psi_b[self.idx_b] = out["value"][na:] + const_b[self.idx_b]
            w_b[self.idx_b] = out["w"][na:]
        if self.forced.any():
            wf = self.w_forced[self.forced]
            wmat = wf[:, :, None] * wf[:, None, :].conj()
            psi_a[self.forced] = np.einsum(
                "nij,nji->n", c_a[self.forced], wmat).real
            w_a[self.forced] = wmat

        pick_a = psi_a > psi_b
        psi = np.where(pick_a, psi_a, psi_b)
        w = np.where(pick_a[:, None, None], w_a, w_b)
        inter = np.einsum("nij,nji->n", bank.F, w).real
        power = np.einsum("nii->n", w).real
        primary = np.maximum(self.lam - (inter + s.sigma2) / s.h, 0.0)
        return psi, w, pick_a, inter, power, primary, gap_max


def _dual_scales(s):
    phibar = max(float(np.mean(s.phi)), 1e-30)
    hbar = max(float(np.mean(s.h)), 1e-30)
    g2bar = max(float(np.mean(np.sum(np.abs(s.g) ** 2, axis=1))), 1e-30)
    return np.array([phibar / hbar, g2bar, phibar])


def _repair(s, omegas):
    """Uniform down-scalings that make the beams feasible-achievable."""
    if s.gamma == 0.0:
        # exact nulling; only this gives interference at the noise floor
        fn = s.f / np.linalg.norm(s.f, axis=1, keepdims=True)
        omegas = omegas - fn * np.einsum(
            "nm,nm->n", fn.conj(), omegas)[:, None]
    pw = np.sum(np.abs(omegas) ** 2, axis=1)
    over = pw > s.q_peak * (1.0 + 1e-12)
    if over.any():
        omegas = omegas.copy()
        omegas[over] *= np.sqrt(s.q_peak / pw[over])[:, None]
        pw = np.sum(np.abs(omegas) ** 2, axis=1)
    total = float(pw.sum())
    if total > s.q_sum * (1.0 + 1e-12):
        omegas = omegas * np.sqrt(s.q_sum / total)
    if s.gamma > 0.0:
        inter = np.abs(np.einsum("nm,nm->n", s.f.conj(), omegas)) ** 2
        isum = float(inter.sum())
        if isum > s.gamma * (1.0 + 1e-12):
            omegas = omegas * np.sqrt(s.gamma / isum)
    return omegas


def _extract_all(prob, w, pick_a, c_a, c_b):
    """Beams from the winning lifted matrices, with tightness diagnostics."""
    bank, s = prob.bank, prob.s
    n, r = s.n_subcarriers, bank.r
    eye = np.eye(r, dtype=np.complex128)
    omegas = np.zeros((n, s.n_antennas), dtype=np.complex128)
    ratio_max, steps_max = 0.0, 0
    for i in range(n):
        if np.einsum("ii->", w[i]).real <= 1e-15 * s.q_peak:
            continue
        if pick_a[i]:
            cons = [SdpConstraint(bank.F[i], ">=", prob.req[i]),
                    SdpConstraint(eye, "<=", s.q_peak)]
        else:
            cons = [SdpConstraint(bank.F[i], "<=", prob.req[i]),
                    SdpConstraint(eye, "<=", s.q_peak)]
        inst = SdpInstance(objective=c_a[i] if pick_a[i] else c_b[i],
                           constraints=cons)
        vec, info = extract_rank_one(w[i], inst)
        omegas[i] = bank.basis[i] @ vec
        ratio_max = max(ratio_max, info["eig_ratio"])
        steps_max = max(steps_max, info["reduction_steps"])
    return omegas, ratio_max, steps_max


def _p3_impl(s, lam, bank=None, tol_rel=1e-6, max_iter=4000):
    if bank is None:
        bank = _Bank(s)
    if s.q_sum == 0.0 or s.q_peak == 0.0:
        omegas = np.zeros_like(s.g)
        value = float(np.dot(np.maximum(lam - s.sigma2 / s.h, 0.0), s.phi))
        return {"omegas": omegas, "dual": value,
                "duals": P3DualPoint(0.0, 0.0, 0.0),
                "gap_max": 0.0, "ratio_max": 0.0, "iterations": 0}
    prob = _LevelProblem(bank, s, lam)
    scales = _dual_scales(s)
    obj_scale = s.p_sum * scales[2] + min(
        s.q_sum, s.n_subcarriers * s.q_peak) * scales[1]
    gap_seen = [0.0]

    def oracle(x):
        eta1, mu1, theta1 = x
        psi, w, pick_a, inter, power, primary, gmax = prob.solve(
            eta1, mu1, theta1)
        gap_seen[0] = max(gap_seen[0], gmax)
        value = float(psi.sum()) + eta1 * s.gamma + mu1 * s.q_sum \
            + theta1 * s.p_sum
        sub = np.array([s.gamma - inter.sum(),
                        s.q_sum - power.sum(),
                        s.p_sum - primary.sum()])
        return OracleResult(value=value, subgrad=sub,
                            payload=(w, pick_a))

    init = EllipsoidState.ball(np.zeros(3), 100.0 * scales)
    outcome = ellipsoid_minimize(oracle, init, nonneg=[True, True, False],
                                 tol=tol_rel * obj_scale, max_iter=max_iter)
    if outcome.stop_reason == "max_iter":
        raise DualConvergenceError(
            f"multiplier search at level {lam:.6g} stopped after "
            f"{outcome.iterations} cuts with gap bound "
            f"{outcome.final_bound:.3e}", outcome.final_bound)
    w, pick_a = outcome.best_payload
    c_a, c_b, _ = prob.objectives(*outcome.best_x)
    omegas, ratio_max, _ = _extract_all(prob, w, pick_a, c_a, c_b)
    omegas = _repair(s, omegas)
    return {"omegas": omegas, "dual": float(outcome.best_value),
            "duals": P3DualPoint(*outcome.best_x),
            "gap_max": gap_seen[0], "ratio_max": ratio_max,
            "iterations": outcome.iterations}


def p4_solve(sc_index, duals: P3DualPoint, lam, s):
    """Best beam for one subcarrier at fixed level and multipliers.

    Returns (omega, value): the winning case's beam and its contribution to
    the priced objective.
    """
    bank = _Bank(s)
    prob = _LevelProblem(bank, s, lam)
    psi, w, pick_a, *_ = prob.solve(duals.eta1, duals.mu1, duals.theta1)
    i = int(sc_index)
    c_a, c_b, _ = prob.objectives(duals.eta1, duals.mu1, duals.theta1)
    omegas, _, _ = _extract_all(prob, w, pick_a, c_a, c_b)
    return omegas[i], float(psi[i])


def p3_solve(s, lam, tol_rel=1e-6, max_iter=4000):
    """Priced design at a fixed water level.

    Returns (omegas, dual value, multipliers).  The beams are the per-SC
    maximizers at the best multipliers found, scaled back into the feasible
    set if the finite-N duality gap pushed them slightly out.
    """
    out = _p3_impl(s, lam, tol_rel=tol_rel, max_iter=max_iter)
    return out["omegas"], out["dual"], out["duals"]


def _residuals(s, omegas, breakdown):
    pw = np.sum(np.abs(omegas) ** 2, axis=1)
    inter = np.abs(np.einsum("nm,nm->n", s.f.conj(), omegas)) ** 2
    return {
        "interference": float(inter.sum() - s.gamma),
        "sum_power": float(pw.sum() - s.q_sum),
        "peak_power": float(pw.max() - s.q_peak) if pw.size else -s.q_peak,
        "primary_power": float(abs(breakdown.primary_p.sum() - s.p_sum)),
    }


def p1_solve(s, grid_points: int = 50, tol_rel=1e-6, max_iter=4000):
    """Full design: search the reachable water levels, keep the best total."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    if s.q_sum == 0.0:
        omegas = np.zeros_like(s.g)
        bd = received_power(s, omegas)
        return BeamformingSolution(
            omegas=omegas, lam=bd.lam, breakdown=bd,
            residuals=_residuals(s, omegas, bd),
            duals=P3DualPoint(0.0, 0.0, 0.0), grid_lam=bd.lam,
            diagnostics={"sdp_gap_max": 0.0, "eig_ratio_max": 0.0,
                         "levels_solved": 0})
    rng_ = lambda_range(s)
    grid = np.linspace(rng_.lo, rng_.hi, grid_points)
    bank = _Bank(s)
    best = None
    skipped = []
    gap_max, ratio_max, solved = 0.0, 0.0, 0
    for lam in grid:
        try:
            out = _p3_impl(s, float(lam), bank=bank, tol_rel=tol_rel,
                           max_iter=max_iter)
        except (DualConvergenceError, EllipsoidCollapse) as err:
            skipped.append((float(lam), str(err)))
            continue
        solved += 1
        gap_max = max(gap_max, out["gap_max"])
        ratio_max = max(ratio_max, out["ratio_max"])
        bd = received_power(s, out["omegas"])
        if best is None or bd.total > best[0].total:
            best = (bd, out, float(lam))
    if best is None:
        raise DualConvergenceError(
            f"no water-level grid point converged ({len(skipped)} skipped)",
            float("nan"))
    bd, out, lam_star = best
    return BeamformingSolution(
        omegas=out["omegas"], lam=bd.lam, breakdown=bd,
        residuals=_residuals(s, out["omegas"], bd),
        duals=out["duals"], grid_lam=lam_star, skipped=skipped,
        diagnostics={"sdp_gap_max": gap_max, "eig_ratio_max": ratio_max,
                     "levels_solved": solved})
