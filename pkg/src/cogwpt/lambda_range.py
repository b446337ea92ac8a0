"""Range of primary water levels reachable by feasible secondary designs.

The lower end is the zero-interference level.  The upper end is found by
bisection on the feasibility of hitting a target level lam with per-subcarrier
transmit powers Q_i in [0, q_peak] under the worst-case (fully aligned)
interference coefficients: the water-filling equality

    sum_i (lam - (c_i Q_i + sigma2)/h_i)^+  =  p_sum

must be met while sum c_i Q_i <= gamma and sum Q_i <= q_sum.  Feasibility of
that system is probed through its Lagrangian dual, minimized by the ellipsoid
method: the dual is positively homogeneous, so its infimum is 0 exactly when
the system is solvable and -inf otherwise.  Any dual point with a negative
value is a certificate of infeasibility; a converged minimum near 0 certifies
feasibility.

All routines take the per-unit-power interference coefficients c_i as an
optional argument (default ||f_i||^2, the aligned worst case) so that designs
with fixed beam directions can reuse the same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ellipsoid import EllipsoidState, ellipsoid_minimize
from .waterfill import waterfill


@dataclass
class LambdaRange:
    lo: float
    hi: float


@dataclass
class Feasibility:
    feasible: bool
    witness: Optional[np.ndarray]   # dual point with negative value, if infeasible
    best_value: float
    bound: float
    iterations: int


def lambda_min(s) -> float:
    """Water level when the secondary transmitter is silent."""
    return waterfill(np.zeros(s.n_subcarriers), s.h, s.sigma2, s.p_sum).lam


def _aligned_coef(s):
    return np.sum(np.abs(s.f) ** 2, axis=1)


def p2_subproblem(lam, coef, h, sigma2, q_peak, eta, mu, theta):
    """Per-subcarrier maximizer of the dual Lagrangian piece, closed form.

    Maximizes -eta*c*Q - mu*Q - theta*(lam - (c*Q + sigma2)/h)^+ over
    Q in [0, q_peak], elementwise over arrays c, h.  Returns arrays
    (q, value, water_term) where water_term = (lam - (c*q + sigma2)/h)^+
    evaluated at the maximizer (needed for subgradients).

    The objective is piecewise linear in Q with a kink where the water term
    hits zero, at t = (h*lam - sigma2)/c; the three cases are t < 0 (term
    vanishes identically), t > q_peak (term active on the whole box), and the
    interior kink, where the two linear pieces are compared.  Ties at equal
    piece values return the kink t.
    """
    coef = np.asarray(coef, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    base = lam - sigma2 / h                    # water term at Q = 0
    pos = coef > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(pos, h * base / np.where(pos, coef, 1.0),
                     np.where(base >= 0.0, np.inf, -np.inf))
    slope = -eta * coef - mu                   # dObj/dQ on the flat-water piece
    c2 = slope + theta * coef / h              # dObj/dQ on the active-water piece

    # t < 0: water term is zero for every Q, slope <= 0 pins Q at 0.
    q_i = np.zeros_like(h)
    val_i = np.zeros_like(h)
    wat_i = np.zeros_like(h)

    # t > q_peak: water term active on all of [0, q_peak].
    q_ii = np.where(c2 > 0.0, q_peak, 0.0)
    val_ii = c2 * q_ii - theta * base
    wat_ii = base - coef * q_ii / h

    # 0 <= t <= q_peak: compare best of each linear piece.
    psi2 = slope * t                           # value at the kink
    psi1 = np.where(c2 > 0.0, psi2, -theta * base)
    take_kink = psi2 >= psi1
    q_iii = np.where(take_kink, t, 0.0)
    val_iii = np.maximum(psi1, psi2)
    wat_iii = np.where(take_kink, 0.0, base)

    case_i = t < 0.0
    case_ii = t > q_peak
    q = np.select([case_i, case_ii], [q_i, q_ii], default=q_iii)
    val = np.select([case_i, case_ii], [val_i, val_ii], default=val_iii)
    wat = np.select([case_i, case_ii], [wat_i, wat_ii], default=wat_iii)
    return q, val, wat


def p2_dual(s, lam, eta, mu, theta, coef=None):
    """Dual value and subgradient of the level-reachability system at lam."""
    c = _aligned_coef(s) if coef is None else np.asarray(coef, dtype=np.float64)
    q, val, wat = p2_subproblem(lam, c, s.h, s.sigma2, s.q_peak, eta, mu, theta)
    value = val.sum() + eta * s.gamma + mu * s.q_sum + theta * s.p_sum
    subgrad = np.array([s.gamma - np.dot(c, q),
                        s.q_sum - q.sum(),
                        s.p_sum - wat.sum()])
    return float(value), subgrad, q


def default_feasibility_tol(s) -> float:
    return 1e-6 * (s.gamma + s.q_sum + s.p_sum)


def dual_ball_radius(s, coef=None) -> float:
    c = _aligned_coef(s) if coef is None else np.asarray(coef, dtype=np.float64)
    cbar = float(np.mean(c))
    phibar = float(np.mean(s.phi))
    ratio = phibar / cbar if cbar > 0 else 1.0
    return 100.0 * max(ratio, 1.0)


def p2_feasible(s, lam, tol: Optional[float] = None, coef=None,
                max_iter: int = 6000) -> Feasibility:
    """Can feasible secondary powers hold the water level at lam?

    Intended for lam above the silent level (below it the equality cannot be
    met by any interference).  Declares infeasible as soon as a dual point
    with value < -tol appears; declares feasible when the ellipsoid certifies
    the dual minimum is within tol of zero.  Raises if neither happens.
    """
    tol = default_feasibility_tol(s) if tol is None else tol

    def oracle(x):
        value, subgrad, _ = p2_dual(s, lam, x[0], x[1], x[2], coef=coef)
        return value, subgrad

    init = EllipsoidState.ball(np.zeros(3), dual_ball_radius(s, coef))
    out = ellipsoid_minimize(oracle, init, nonneg=[True, True, False],
                             tol=0.5 * tol, max_iter=max_iter,
                             stop=lambda v, x: v < -tol)
    if out.best_value < -tol:
        return Feasibility(feasible=False, witness=out.best_x,
                           best_value=out.best_value, bound=out.final_bound,
                           iterations=out.iterations)
    if out.stop_reason == "max_iter":
        raise RuntimeError(
            f"level feasibility probe inconclusive at lam={lam!r}: "
            f"best dual value {out.best_value:.3e}, bound {out.final_bound:.3e} "
            f"after {out.iterations} cuts")
    return Feasibility(feasible=True, witness=None, best_value=out.best_value,
                       bound=out.final_bound, iterations=out.iterations)


def lambda_max(s, bisect_tol_rel: float = 1e-9, feas_tol: Optional[float] = None,
               coef=None) -> float:
    """Largest reachable water level, by bisection on p2_feasible.

    The bracket top is the level reached when every subcarrier transmits
    q_peak fully aligned; no feasible design exceeds it.  With a zero
    interference budget (or zero transmit budget) the range collapses to the
    silent level.
    """
    lo = lambda_min(s)
    if s.gamma == 0.0 or s.q_sum == 0.0 or s.q_peak == 0.0:
        return lo
    c = _aligned_coef(s) if coef is None else np.asarray(coef, dtype=np.float64)
    hi = waterfill(c * s.q_peak, s.h, s.sigma2, s.p_sum).lam
    if hi <= lo:
        return lo
    if p2_feasible(s, hi, tol=feas_tol, coef=coef).feasible:
        return hi
    tol = bisect_tol_rel * (hi - lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if p2_feasible(s, mid, tol=feas_tol, coef=coef).feasible:
            lo = mid
        else:
            hi = mid
    return lo


def lambda_range(s, **kwargs) -> LambdaRange:
    return LambdaRange(lo=lambda_min(s), hi=lambda_max(s, **kwargs))
