"""Deep-cut ellipsoid method for small nonsmooth convex dual problems.

The dual functions here are piecewise linear in at most three multipliers, so
the ellipsoid method is the right tool: dimension-free of the subcarrier
count, certificate-producing, and immune to nondifferentiability.  Sign
constraints (eta >= 0 style) are handled by deep feasibility cuts at the
center, never by projection; the oracle is only ever evaluated at
sign-feasible centers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np


class EllipsoidCollapse(RuntimeError):
    """Numerical breakdown of the ellipsoid update."""

    def __init__(self, message, iteration):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass
class EllipsoidState:
    """Ellipsoid {z : (z-center)^T shape^-1 (z-center) <= 1}."""

    center: np.ndarray
    shape: np.ndarray

    @classmethod
    def ball(cls, center, radii) -> "EllipsoidState":
        """Axis-aligned ellipsoid from per-coordinate radii (scalar radii ok)."""
        center = np.asarray(center, dtype=np.float64)
        radii = np.broadcast_to(np.asarray(radii, dtype=np.float64),
                                center.shape).copy()
        if np.any(radii <= 0):
            raise ValueError("radii must be > 0")
        return cls(center=center.copy(), shape=np.diag(radii ** 2))


@dataclass
class OracleResult:
    value: float
    subgrad: np.ndarray
    feasibility_cut: bool = False
    payload: Any = None


@dataclass
class EllipsoidOutcome:
    best_x: Optional[np.ndarray]
    best_value: float
    best_payload: Any
    stop_reason: str            # 'tolerance' | 'predicate' | 'max_iter'
    iterations: int
    final_bound: float
    state: EllipsoidState


def ellipsoid_cut(center, shape, g, alpha=0.0):
    """One deep-cut update, keeping {z : g.(z - center) <= -alpha*sqrt(g'Pg)}.

    alpha = 0 is a central cut; alpha in (0, 1) cuts deeper.  Returns the
    updated (center, shape).  The cut vector g need not be normalized.
    """
    n = center.shape[0]
    gPg = float(g @ shape @ g)
    if not np.isfinite(gPg) or gPg <= 0.0:
        raise ValueError("degenerate cut: g'Pg <= 0")
    if not (-1.0 / n <= alpha < 1.0):
        raise ValueError(f"cut depth {alpha} outside [-1/n, 1)")
    gn = g / np.sqrt(gPg)
    pg = shape @ gn                       # satisfies gn'pg = 1
    if n == 1:
        r = np.sqrt(shape[0, 0])
        sign = np.sign(gn[0])
        new_r = 0.5 * r * (1.0 - alpha)
        new_c = center - sign * (alpha + (1.0 - alpha) / 2.0) * r
        return new_c, np.array([[new_r ** 2]])
    tau = (1.0 + n * alpha) / (n + 1.0)
    delta = (n * n / (n * n - 1.0)) * (1.0 - alpha * alpha)
    beta = 2.0 * (1.0 + n * alpha) / ((n + 1.0) * (1.0 + alpha))
    new_c = center - tau * pg
    new_P = delta * (shape - beta * np.outer(pg, pg))
    new_P = 0.5 * (new_P + new_P.T)
    return new_c, new_P


def _as_result(raw) -> OracleResult:
    if isinstance(raw, OracleResult):
        return raw
    value, subgrad = raw[0], np.asarray(raw[1], dtype=np.float64)
    payload = raw[2] if len(raw) > 2 else None
    return OracleResult(value=float(value), subgrad=subgrad, payload=payload)


def ellipsoid_minimize(oracle: Callable,
                       init: EllipsoidState,
                       nonneg: Optional[Sequence[bool]] = None,
                       tol: float = 1e-7,
                       max_iter: int = 2000,
                       stop: Optional[Callable[[float, np.ndarray], bool]] = None,
                       ) -> EllipsoidOutcome:
    """Minimize a convex function given a subgradient oracle.

    oracle(x) returns (value, subgradient[, payload]) or an OracleResult.
    nonneg marks coordinates constrained to be >= 0.  Stops when the value-gap
    bound sqrt(g'Pg) falls below tol, when `stop(value, x)` fires, or after
    max_iter cuts.  Best sign-feasible point and its payload are kept.
    """
    x = np.asarray(init.center, dtype=np.float64).copy()
    P = np.asarray(init.shape, dtype=np.float64).copy()
    n = x.shape[0]
    mask = np.zeros(n, dtype=bool) if nonneg is None else np.asarray(nonneg, bool)

    best_x, best_value, best_payload = None, np.inf, None
    bound = np.inf
    reason = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        diag = np.diag(P)
        if not np.all(np.isfinite(P)) or np.any(diag <= 0):
            raise EllipsoidCollapse("ellipsoid shape lost positivity", it)
        viol = mask & (x < 0.0)
        if viol.any():
            # deepest sign violation first; value is not evaluated here
            depths = np.where(viol, -x / np.sqrt(np.abs(diag)), -np.inf)
            j = int(np.argmax(depths))
            g = np.zeros(n)
            g[j] = -1.0
            alpha = min(float(depths[j]), 1.0 - 1e-12)
            if depths[j] >= 1.0:
                raise EllipsoidCollapse(
                    "sign-feasible region excluded from ellipsoid", it)
            x, P = ellipsoid_cut(x, P, g, alpha)
            continue

        res = _as_result(oracle(x))
        g = np.asarray(res.subgrad, dtype=np.float64)
        if not res.feasibility_cut:
            if res.value < best_value:
                best_x, best_value, best_payload = x.copy(), res.value, res.payload
            gPg = float(g @ P @ g)
            bound = np.sqrt(max(gPg, 0.0))
            if bound <= tol:
                reason = "tolerance"
                break
            if stop is not None and stop(res.value, x):
                reason = "predicate"
                break
        if not np.any(g):
            # zero subgradient: unconstrained minimum hit exactly
            reason = "tolerance"
            bound = 0.0
            break
        x, P = ellipsoid_cut(x, P, g)

    return EllipsoidOutcome(best_x=best_x, best_value=best_value,
                            best_payload=best_payload, stop_reason=reason,
                            iterations=it, final_bound=float(bound),
                            state=EllipsoidState(center=x, shape=P))
