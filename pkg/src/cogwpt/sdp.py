"""Small dense complex-Hermitian semidefinite programs.

Solves  maximize tr(C W)  s.t.  tr(A_k W) <= / >= b_k,  W >= 0 (PSD),
for one matrix block of modest dimension and a handful of scalar constraints.
The solver is a primal-dual interior-point method with Mehrotra
predictor-corrector steps on the homogeneous self-dual embedding, so
infeasibility and unboundedness come out as certificates rather than
heuristics.  Complex Hermitian matrices are handled natively; there is no
2Mx2M real embedding.

A batch front end solves many same-shape instances in lockstep with
vectorized linear algebra (closed-form 2x2 kernels when M == 2); the
per-subcarrier subproblems upstream arrive in batches of ~2N, which is what
makes full-size sweeps tractable on one core.

Reported gaps and residuals are relative quantities of an internally
normalized copy of the problem (unit objective norm, unit-ish bounds), which
is the scale the stopping tolerances act on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

_TINY = 1e-300


@dataclass
class SdpConstraint:
    matrix: np.ndarray          # (M, M) Hermitian
    sense: str                  # '<=' or '>='
    bound: float


@dataclass
class SdpInstance:
    objective: np.ndarray       # (M, M) Hermitian, maximized
    constraints: List[SdpConstraint] = field(default_factory=list)


@dataclass
class SdpSolution:
    status: str                 # 'optimal' | 'infeasible' | 'unbounded'
    value: float
    w: Optional[np.ndarray]
    y: Optional[np.ndarray]     # multipliers for the normalized '<=' rows
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int


class SdpNumericalError(RuntimeError):
    pass


def _hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _chol2(x):
    """Closed-form Cholesky for a stack of 2x2 Hermitian PD matrices."""
    l11 = np.sqrt(np.maximum(x[..., 0, 0].real, _TINY))
    l21 = x[..., 1, 0] / l11
    l22 = np.sqrt(np.maximum(x[..., 1, 1].real - np.abs(l21) ** 2, _TINY))
    out = np.zeros_like(x)
    out[..., 0, 0] = l11
    out[..., 1, 0] = l21
    out[..., 1, 1] = l22
    return out


def _inv2(x):
    det = x[..., 0, 0] * x[..., 1, 1] - x[..., 0, 1] * x[..., 1, 0]
    out = np.empty_like(x)
    out[..., 0, 0] = x[..., 1, 1]
    out[..., 1, 1] = x[..., 0, 0]
    out[..., 0, 1] = -x[..., 0, 1]
    out[..., 1, 0] = -x[..., 1, 0]
    return out / det[..., None, None]


def _eigvals2_min(x):
    a = x[..., 0, 0].real
    d = x[..., 1, 1].real
    off = np.abs(x[..., 0, 1])
    scale = np.maximum(np.maximum(np.abs(a), np.abs(d)), off)
    scale = np.maximum(scale, _TINY)
    half = 0.5 * (a - d) / scale
    rad = np.sqrt(half ** 2 + (off / scale) ** 2)
    return (0.5 * (a + d) / scale - rad) * scale


def _batch_chol(x):
    if x.shape[-1] == 2:
        return _chol2(x)
    try:
        return np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        tr = np.trace(x, axis1=-2, axis2=-1).real
        jitter = np.maximum(1e-14 * tr, 1e-30)
        bump = jitter[..., None, None] * np.eye(x.shape[-1])
        return np.linalg.cholesky(x + bump)


def _batch_inv(x):
    if x.shape[-1] == 2:
        return _inv2(x)
    return np.linalg.inv(x)


def _psd_max_step(x, dx, chol_x):
    """Largest alpha with x + alpha*dx PSD, per batch entry (inf if any)."""
    if x.shape[-1] == 2:
        li = _inv2(chol_x)
        b = li @ dx @ np.conj(np.swapaxes(li, -1, -2))
        lam_min = _eigvals2_min(b)
    else:
        t = np.linalg.solve(chol_x, dx)
        b = np.conj(np.swapaxes(np.linalg.solve(
            chol_x, np.conj(np.swapaxes(t, -1, -2))), -1, -2))
        lam_min = np.linalg.eigvalsh(_hermitize(b))[..., 0]
    out = np.full(x.shape[:-2], np.inf)
    neg = lam_min < 0
    out[neg] = -1.0 / lam_min[neg]
    return out


def _pos_max_step(v, dv):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dv < 0, -v / np.where(dv < 0, dv, -1.0), np.inf)
    return ratio.min(axis=-1)


def _scalar_max_step(v, dv):
    return np.where(dv < 0, -v / np.where(dv < 0, dv, -1.0), np.inf)


def _rtr(a, b):
    """Re tr(a @ b) over the last two axes."""
    return np.einsum("...ij,...ji->...", a, b).real


def solve_sdp_batch(C, A, b, gap_tol=1e-9, feas_tol=1e-9, max_iter=100,
                    _trace=None):
    """Solve a stack of same-shape instances: max tr(C W), tr(A_k W) <= b_k.

    C: (B, M, M) Hermitian; A: (B, m, M, M) Hermitian rows (all '<=' sense,
    flip signs beforehand for '>='); b: (B, m).  Returns a dict of arrays
    keyed status / value / w / y / gap / pres / dres / iterations; per-entry
    status is 'optimal', 'infeasible', 'unbounded', or 'stalled'.
    """
    C = np.asarray(C, dtype=np.complex128)
    A = np.asarray(A, dtype=np.complex128)
    b = np.asarray(b, dtype=np.float64)
    B, M, _ = C.shape
    m = A.shape[1]

    # Normalize: unit objective norm, unit constraint rows, bounds near one.
    cscale = np.maximum(np.linalg.norm(C, axis=(1, 2)), 1e-30)
    Cs = C / cscale[:, None, None]
    ascale = np.maximum(np.linalg.norm(A, axis=(2, 3)), 1e-30)
    As = A / ascale[:, :, None, None]
    bs = b / ascale
    if m > 0:
        # geometric mean of the bound sizes splits the distortion evenly
        # when the normalized bounds are badly mismatched
        rho = np.exp(np.mean(np.log(np.clip(np.abs(bs), 1e-12, None)), axis=1))
        rho = np.clip(rho, 1e-6, 1e6)
    else:
        rho = np.ones(B)
    bs = bs / rho[:, None]

    eye = np.broadcast_to(np.eye(M, dtype=np.complex128), (B, M, M)).copy()
    X = eye.copy()
    Z = eye.copy()
    y = np.zeros((B, m))
    xl = np.ones((B, m))        # primal slack block
    wl = np.ones((B, m))        # dual partner of the slack block
    tau = np.ones(B)
    kappa = np.ones(B)

    status = np.array(["running"] * B, dtype=object)
    itercount = np.zeros(B, dtype=int)
    mu_hist = np.full((B, 9), np.inf)
    met_hist = np.full((B, 9), np.inf)

    # best-iterate snapshots: steps taken past the conditioning limit of the
    # Schur system can damage an already converged point, so every exit path
    # reports the best point seen rather than the last one
    met_best = np.full(B, np.inf)
    X_best = X.copy()
    y_best = y.copy()
    tau_best = np.ones(B)
    gap_out = np.full(B, np.inf)
    pres_out = np.full(B, np.inf)
    dres_out = np.full(B, np.inf)

    degree = M + m + 1
    eye_k = np.eye(m + 1)

    def record(idx, it, state):
        status[idx] = state
        itercount[idx] = it

    def finish(idx, it):
        # terminal classification at a numerical limit: accept if the best
        # iterate is within a 10x band of the tolerances
        good = gap_out[idx] <= 10 * gap_tol \
            and pres_out[idx] <= 10 * feas_tol \
            and dres_out[idx] <= 10 * feas_tol
        record(idx, it, "optimal" if good else "stalled")

    active = np.ones(B, dtype=bool)
    gap = np.full(B, np.inf)
    pres = np.full(B, np.inf)
    dres = np.full(B, np.inf)
    for it in range(1, max_iter + 1):
        if not active.any():
            break
        AX = _rtr(As, X[:, None]) if m > 0 else np.zeros((B, 0))
        r1 = -AX - xl + bs * tau[:, None]
        if m > 0:
            r2s = np.einsum("bk,bkij->bij", y, As) - Cs * tau[:, None, None] - Z
        else:
            r2s = -Cs * tau[:, None, None] - Z
        r2l = y - wl
        bty = np.einsum("bk,bk->b", bs, y)
        trCX = _rtr(Cs, X)
        r3 = -bty + trCX - kappa
        mu = (_rtr(X, Z) + np.einsum("bk,bk->b", xl, wl) + tau * kappa) / degree

        # -- convergence and certificates ------------------------------------
        # residuals are measured relative to the magnitudes entering each
        # equation, which keeps them meaningful when tau is small
        pobj = trCX / tau
        dobj = bty / tau
        if m > 0:
            pden = tau[:, None] * (1.0 + np.abs(bs)) + np.abs(AX) + np.abs(xl)
            pres = np.max(np.abs(r1) / pden, axis=1)
        else:
            pres = np.zeros(B)
        dden = 2.0 * tau + np.abs(y).sum(axis=1) \
            + np.linalg.norm(Z, axis=(1, 2))
        dres = np.linalg.norm(r2s, axis=(1, 2)) / dden
        gap = np.abs(pobj - dobj) / (1.0 + np.abs(pobj) + np.abs(dobj))

        metric = np.maximum(gap / gap_tol,
                            np.maximum(pres, dres) / feas_tol)
        better = active & (metric < met_best) & np.isfinite(metric)
        if better.any():
            met_best[better] = metric[better]
            X_best[better] = X[better]
            y_best[better] = y[better]
            tau_best[better] = tau[better]
            gap_out[better] = gap[better]
            pres_out[better] = pres[better]
            dres_out[better] = dres[better]

        done = active & (met_best <= 1.0)
        for idx in np.flatnonzero(done):
            record(idx, it, "optimal")
        active &= ~done

        small_tau = active & (tau < 1e-9 * np.maximum(kappa, 1.0))
        for idx in np.flatnonzero(small_tau):
            zsum = np.einsum("k,kij->ij", y[idx], As[idx]) if m > 0 \
                else np.zeros((M, M))
            zres = np.linalg.norm(zsum - Z[idx])
            ctx = trCX[idx]
            ax_norm = np.max(np.abs(AX[idx] + xl[idx])) if m > 0 else 0.0
            if bty[idx] < 0 and zres <= 1e-7 * max(1.0, -bty[idx]):
                record(idx, it, "infeasible")
            elif ctx > 0 and ax_norm <= 1e-7 * ctx:
                record(idx, it, "unbounded")
            else:
                continue
            # report the certificate ray itself, not the best iterate
            X_best[idx] = X[idx]
            y_best[idx] = y[idx]
            tau_best[idx] = 1.0
            gap_out[idx] = gap[idx]
            pres_out[idx] = pres[idx]
            dres_out[idx] = dres[idx]
            active[idx] = False
        if not active.any():
            break

        mu_hist = np.roll(mu_hist, 1, axis=1)
        mu_hist[:, 0] = mu
        met_hist = np.roll(met_hist, 1, axis=1)
        met_hist[:, 0] = metric
        stagnant = active & np.isfinite(mu_hist[:, 8]) & \
            (mu > 0.5 * mu_hist[:, 8]) & (metric > 0.5 * met_hist[:, 8])
        floored = active & (mu < 1e-15)
        for idx in np.flatnonzero(stagnant | floored):
            finish(idx, it)
        active &= ~(stagnant | floored)
        if not active.any():
            break

        # -- Newton step -----------------------------------------------------
        Lz = _batch_chol(Z)
        Zi = _hermitize(_batch_inv(Z))
        Lx = _batch_chol(X)

        CZi = Cs @ Zi
        CX = Cs @ X
        if m > 0:
            T = np.einsum("bkij,bjl->bkil", As, X)        # A_k X
            U = np.einsum("bkij,bjl->bkil", As, Zi)       # A_k Z^-1
            S = np.einsum("bkij,bmji->bkm", T, U).real    # tr(A_k X A_j Z^-1)
            u = np.einsum("bkij,bji->bk", T, CZi).real    # tr(A_k X C Z^-1)
            v = np.einsum("bij,bkji->bk", CX, U).real     # tr(C X A_k Z^-1)
            trAZi = np.einsum("bkij,bji->bk", As, Zi).real
            trAX = np.einsum("bkij,bji->bk", As, X).real
        w0 = _rtr(CX, CZi)
        trCZi = _rtr(Cs, Zi)

        def solve_direction(nu, corr, corr_lp, corr_tk):
            r2sZi = r2s @ Zi
            corrZi = corr @ Zi if corr is not None else None
            if m > 0:
                e = nu[:, None] * trAZi - trAX \
                    - np.einsum("bkij,bji->bk", T, r2sZi).real
                if corrZi is not None:
                    e = e - np.einsum("bkij,bji->bk", As, corrZi).real
                rhs1 = e + nu[:, None] / wl - xl - (xl / wl) * r2l - r1
                if corr_lp is not None:
                    rhs1 = rhs1 - corr_lp / wl
                K = np.zeros((B, m + 1, m + 1))
                K[:, :m, :m] = S + (xl / wl)[:, :, None] * np.eye(m)
                K[:, :m, m] = bs - u
                K[:, m, :m] = -(bs + v)
            else:
                K = np.zeros((B, 1, 1))
                rhs1 = np.zeros((B, 0))
            tcx = nu * trCZi - trCX - _rtr(CX, r2sZi)
            if corrZi is not None:
                tcx = tcx - _rtr(Cs, corrZi)
            rhs2 = -r3 - tcx + nu / tau - kappa
            if corr_tk is not None:
                rhs2 = rhs2 - corr_tk / tau
            K[:, m, m] = w0 + kappa / tau
            rhs = np.concatenate([rhs1, rhs2[:, None]], axis=1)
            # frozen instances get a dummy identity system
            K = np.where(active[:, None, None], K, eye_k)
            rhs = np.where(active[:, None], rhs, 0.0)
            # Jacobi equilibration keeps the huge dynamic range of the
            # endgame Schur system away from the factorization
            dscale = 1.0 / np.sqrt(np.maximum(np.abs(np.einsum(
                "bkk->bk", K)), 1e-30))
            Ke = dscale[:, :, None] * K * dscale[:, None, :]
            re = dscale * rhs
            try:
                sol = np.linalg.solve(Ke, re[..., None])[..., 0]
            except np.linalg.LinAlgError:
                sol = np.zeros_like(re)
                for bi in np.flatnonzero(active):
                    try:
                        sol[bi] = np.linalg.solve(Ke[bi], re[bi])
                    except np.linalg.LinAlgError:
                        try:
                            sol[bi] = np.linalg.solve(
                                Ke[bi] + 1e-13 * eye_k, re[bi])
                        except np.linalg.LinAlgError:
                            sol[bi] = np.nan
            sol = dscale * sol
            dy, dtau = sol[:, :m], sol[:, m]
            dZ = (np.einsum("bk,bkij->bij", dy, As) if m > 0 else 0.0) \
                - Cs * dtau[:, None, None] + r2s
            dX = nu[:, None, None] * Zi - X - X @ dZ @ Zi
            if corrZi is not None:
                dX = dX - corrZi
            dX = _hermitize(dX)
            dw = dy + r2l
            dxl = nu[:, None] / wl - xl - (xl / wl) * dw
            if corr_lp is not None:
                dxl = dxl - corr_lp / wl
            dk = nu / tau - kappa - (kappa / tau) * dtau
            if corr_tk is not None:
                dk = dk - corr_tk / tau
            return dX, dxl, dy, dZ, dw, dtau, dk

        def max_step(dX, dxl, dZ, dw, dtau, dk):
            a = np.minimum(_psd_max_step(X, dX, Lx), _psd_max_step(Z, dZ, Lz))
            if m > 0:
                a = np.minimum(a, _pos_max_step(xl, dxl))
                a = np.minimum(a, _pos_max_step(wl, dw))
            a = np.minimum(a, _scalar_max_step(tau, dtau))
            a = np.minimum(a, _scalar_max_step(kappa, dk))
            return a

        zero = np.zeros(B)
        aff = solve_direction(zero, None, None, None)
        a_aff = np.minimum(max_step(aff[0], aff[1], aff[3], aff[4],
                                    aff[5], aff[6]), 1.0)

        mu_aff = (_rtr(X + a_aff[:, None, None] * aff[0],
                       Z + a_aff[:, None, None] * aff[3])
                  + np.einsum("bk,bk->b", xl + a_aff[:, None] * aff[1],
                              wl + a_aff[:, None] * aff[4])
                  + (tau + a_aff * aff[5]) * (kappa + a_aff * aff[6])) / degree
        sigma = np.clip((np.maximum(mu_aff, 0.0) / np.maximum(mu, _TINY)) ** 3,
                        1e-10, 1.0)
        # once complementarity runs ahead of the equality residuals, switch
        # to pure centering so the residuals can catch up before mu bottoms
        # out at the conditioning limit of the Schur system
        lagging = (mu < 1e-8) & \
            (np.maximum(pres, dres) / feas_tol > 10.0 * gap / gap_tol)
        sigma = np.where(lagging, 1.0, sigma)

        dirs = solve_direction(sigma * mu, aff[0] @ aff[3],
                               aff[1] * aff[4], aff[5] * aff[6])
        # near convergence push the step fraction toward 1 so the equality
        # residuals die as fast as the complementarity gap
        frac = np.clip(1.0 - 100.0 * mu, 0.98, 0.998)
        alpha = frac * max_step(dirs[0], dirs[1], dirs[3], dirs[4],
                                dirs[5], dirs[6])
        alpha = np.minimum(alpha, 1.0)

        # the second-order corrector can overshoot the cone and freeze the
        # step near the end; fall back to a plain centering direction for
        # any instance it jammed, keeping whichever step goes further
        jam = active & (alpha < 0.1)
        if jam.any():
            sig2 = np.where(jam, np.maximum(sigma, 0.5), sigma)
            dirs2 = solve_direction(sig2 * mu, None, None, None)
            a2 = frac * max_step(dirs2[0], dirs2[1], dirs2[3], dirs2[4],
                                 dirs2[5], dirs2[6])
            a2 = np.minimum(a2, 1.0)
            use2 = jam & np.isfinite(a2) & (a2 > alpha)
            if use2.any():
                for cur, alt in zip(dirs, dirs2):
                    cur[use2] = alt[use2]
                alpha[use2] = a2[use2]

        if _trace is not None:
            j = _trace
            print(f"it{it:2d} act={active[j]} tau={tau[j]:.2e} mu={mu[j]:.2e} "
                  f"gap={gap[j]:.2e} pres={pres[j]:.2e} dres={dres[j]:.2e} "
                  f"sig={sigma[j]:.1e} lag={lagging[j]} a_aff={a_aff[j]:.3f} "
                  f"alpha={alpha[j]:.4f}")

        ok = np.isfinite(alpha)
        ok &= np.isfinite(dirs[0]).all(axis=(1, 2))
        ok &= np.isfinite(dirs[3]).all(axis=(1, 2))
        ok &= np.isfinite(dirs[5]) & np.isfinite(dirs[6])
        if m > 0:
            ok &= np.isfinite(dirs[1]).all(axis=1)
            ok &= np.isfinite(dirs[2]).all(axis=1)
            ok &= np.isfinite(dirs[4]).all(axis=1)
        broken = active & ~ok
        for idx in np.flatnonzero(broken):
            finish(idx, it)
        active &= ~broken

        upd = active
        X[upd] += alpha[upd, None, None] * dirs[0][upd]
        xl[upd] += alpha[upd, None] * dirs[1][upd]
        y[upd] += alpha[upd, None] * dirs[2][upd]
        Z[upd] += alpha[upd, None, None] * dirs[3][upd]
        wl[upd] += alpha[upd, None] * dirs[4][upd]
        tau[upd] += alpha[upd] * dirs[5][upd]
        kappa[upd] += alpha[upd] * dirs[6][upd]
        X = _hermitize(X)
        Z = _hermitize(Z)

    for idx in np.flatnonzero(status == "running"):
        finish(idx, max_iter)

    # Undo the normalization.  The PSD iterate is already in original units
    # up to the rho and tau factors; the objective is evaluated directly.
    w_out = (rho / np.maximum(tau_best, _TINY))[:, None, None] * X_best
    value = _rtr(C, w_out)
    y_out = y_best / np.maximum(tau_best, _TINY)[:, None] \
        * (cscale[:, None] / ascale)
    return {
        "status": status,
        "value": value,
        "w": w_out,
        "y": y_out,
        "gap": gap_out,
        "pres": pres_out,
        "dres": dres_out,
        "iterations": itercount,
    }


def _normalized_rows(inst: SdpInstance):
    M = inst.objective.shape[0]
    mats, bounds = [], []
    for c in inst.constraints:
        mat = np.asarray(c.matrix, dtype=np.complex128)
        if mat.shape != (M, M):
            raise ValueError("constraint matrix shape mismatch")
        if c.sense == "<=":
            mats.append(mat)
            bounds.append(float(c.bound))
        elif c.sense == ">=":
            mats.append(-mat)
            bounds.append(-float(c.bound))
        else:
            raise ValueError(f"unknown constraint sense {c.sense!r}")
    return mats, bounds


def solve_sdp(inst: SdpInstance, gap_tol=1e-9, feas_tol=1e-9,
              max_iter=100) -> SdpSolution:
    """Solve one instance; raises SdpNumericalError if the iteration stalls."""
    C = _hermitize(np.asarray(inst.objective, dtype=np.complex128))
    mats, bounds = _normalized_rows(inst)
    m = len(mats)
    A = np.array(mats, dtype=np.complex128).reshape(1, m, *C.shape) if m \
        else np.zeros((1, 0) + C.shape, dtype=np.complex128)
    bvec = np.array(bounds, dtype=np.float64).reshape(1, m)
    out = solve_sdp_batch(C[None], A, bvec, gap_tol=gap_tol,
                          feas_tol=feas_tol, max_iter=max_iter)
    st = str(out["status"][0])
    if st == "stalled":
        raise SdpNumericalError(
            f"interior-point stall: gap={out['gap'][0]:.3e} "
            f"pres={out['pres'][0]:.3e} dres={out['dres'][0]:.3e} "
            f"after {out['iterations'][0]} iterations")
    ok = st == "optimal"
    return SdpSolution(status=st, value=float(out["value"][0]),
                       w=out["w"][0] if ok else None,
                       y=out["y"][0] if ok else None,
                       gap=float(out["gap"][0]),
                       primal_residual=float(out["pres"][0]),
                       dual_residual=float(out["dres"][0]),
                       iterations=int(out["iterations"][0]))


def _herm_basis_apply(p, r):
    """Real vector of length r*r -> Hermitian r x r matrix."""
    d = np.zeros((r, r), dtype=np.complex128)
    idx = 0
    for i in range(r):
        d[i, i] = p[idx]
        idx += 1
    for i in range(r):
        for j in range(i + 1, r):
            d[i, j] = p[idx] + 1j * p[idx + 1]
            d[j, i] = p[idx] - 1j * p[idx + 1]
            idx += 2
    return d


def _herm_row(bmat, r):
    """Row of the real linear map p -> tr(bmat @ Delta(p))."""
    row = np.zeros(r * r)
    idx = 0
    for i in range(r):
        row[idx] = bmat[i, i].real
        idx += 1
    for i in range(r):
        for j in range(i + 1, r):
            row[idx] = 2.0 * bmat[j, i].real
            row[idx + 1] = -2.0 * bmat[j, i].imag
            idx += 2
    return row


def extract_rank_one(w, inst: Optional[SdpInstance] = None, rank_tol=1e-9):
    """Extract a beamforming vector from an optimal PSD matrix.

    If w is numerically rank one, this is just the scaled top eigenvector.
    Otherwise, when the instance is supplied, runs rank reduction: move along
    Hermitian directions of the range-space factor that leave the objective
    and every constraint value unchanged (such a direction exists whenever
    rank r satisfies r^2 > #constraints + 1) and step to the boundary of the
    PSD cone, dropping at least one eigenvalue per step.  Terminates in at
    most M - 1 steps with a rank-one point of the same optimal face.

    The vector is phase-normalized so its largest-magnitude entry is real
    positive.  Returns (omega, info); info carries the residual eigenvalue
    ratio and the number of reduction steps taken.
    """
    w = _hermitize(np.asarray(w, dtype=np.complex128))
    M = w.shape[0]
    vals, vecs = np.linalg.eigh(w)
    vals = np.maximum(vals[::-1], 0.0)
    vecs = vecs[:, ::-1]
    steps = 0
    r = max(int(np.sum(vals > rank_tol * max(vals[0], _TINY))), 1)
    if r > 1 and inst is not None:
        V = vecs[:, :r] * np.sqrt(vals[:r])
        targets = [np.asarray(inst.objective, dtype=np.complex128)]
        targets += [np.asarray(c.matrix, dtype=np.complex128)
                    for c in inst.constraints]
        while V.shape[1] > 1 and steps < M:
            rr = V.shape[1]
            rows = np.array([_herm_row(V.conj().T @ t @ V, rr)
                             for t in targets])
            svd_u, sv, vt = np.linalg.svd(rows)
            cut = int(np.sum(sv > max(sv[0], 1.0) * 1e-12))
            if cut >= rr * rr:
                break            # no null direction left
            delta = _herm_basis_apply(vt[cut], rr)
            dvals, dvecs = np.linalg.eigh(delta)
            k = int(np.argmax(np.abs(dvals)))
            if dvals[k] == 0.0:
                break
            scale = np.maximum(1.0 - dvals / dvals[k], 0.0)
            keep = scale > rank_tol
            if keep.all():
                keep[k] = False  # force progress against rounding
            V = (V @ dvecs) * np.sqrt(scale)
            V = V[:, keep]
            steps += 1
        w = V @ V.conj().T
        vals, vecs = np.linalg.eigh(w)
        vals = np.maximum(vals[::-1], 0.0)
        vecs = vecs[:, ::-1]
    omega = np.sqrt(vals[0]) * vecs[:, 0]
    j = int(np.argmax(np.abs(omega)))
    if np.abs(omega[j]) > 0:
        omega = omega * np.exp(-1j * np.angle(omega[j]))
    ratio = float(vals[1] / vals[0]) if M > 1 and vals[0] > 0 else 0.0
    return omega, {"eig_ratio": ratio, "reduction_steps": steps}
