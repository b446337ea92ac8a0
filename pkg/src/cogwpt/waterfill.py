"""Primary-link water-filling and the quantities driven by it.

The primary transmitter reacts to secondary interference by re-solving

    p_i(lam) = (lam - (I_i + sigma2)/h_i)^+ ,   sum_i p_i(lam) = p_sum,

so the water level lam is a function of the interference profile.  Everything
downstream (harvested power, primary rate) is evaluated against this reaction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class WaterfillResult:
    lam: float          # water level
    p: np.ndarray       # (N,) primary powers, p_i = (lam - floor_i)^+ exactly


@dataclass
class PowerBreakdown:
    direct: float       # sum_i |g_i^H w_i|^2
    reactive: float     # sum_i p_i phi_i
    total: float
    lam: float
    primary_p: np.ndarray


def waterfill(interference, h, sigma2: float, p_sum: float,
              tol_rel: float = 1e-12) -> WaterfillResult:
    """Solve the reaction map by bisection on the monotone power sum.

    The bracket [0, p_sum + max floor] always contains the level.  After
    bisection the level is polished on the identified active set so that
    sum(p) matches p_sum to the accuracy of a single division.
    """
    interference = np.asarray(interference, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if interference.shape != h.shape or interference.ndim != 1:
        raise ValueError("interference and h must be 1-D arrays of equal length")
    if np.any(interference < 0):
        raise ValueError("interference entries must be >= 0")
    if np.any(h <= 0):
        raise ValueError("h entries must be > 0")
    if not (sigma2 > 0):
        raise ValueError("sigma2 must be > 0")
    if p_sum < 0:
        raise ValueError("p_sum must be >= 0")

    floor = (interference + sigma2) / h
    if p_sum == 0.0:
        lam = float(floor.min())
        return WaterfillResult(lam=lam, p=np.zeros_like(floor))

    lo, hi = 0.0, p_sum + float(floor.max())
    width = hi - lo
    tol = tol_rel * width
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if np.maximum(mid - floor, 0.0).sum() < p_sum:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)

    # One exact step: with the active set fixed, the level is a mean.
    for _ in range(h.shape[0] + 1):
        active = floor < lam
        if not active.any():
            break
        lam_star = (p_sum + floor[active].sum()) / active.sum()
        if np.array_equal(floor < lam_star, active):
            lam = lam_star
            break
        lam = lam_star
    return WaterfillResult(lam=float(lam), p=np.maximum(lam - floor, 0.0))


def interference_profile(s, omegas) -> np.ndarray:
    """|f_i^H w_i|^2 per subcarrier."""
    omegas = np.asarray(omegas, dtype=np.complex128)
    if omegas.shape != s.f.shape:
        raise ValueError(f"omegas: expected shape {s.f.shape}, got {omegas.shape}")
    return np.abs(np.einsum("nm,nm->n", s.f.conj(), omegas)) ** 2


def received_power(s, omegas) -> PowerBreakdown:
    """Harvested RF power at S-ER under the primary's self-consistent reaction."""
    omegas = np.asarray(omegas, dtype=np.complex128)
    inter = interference_profile(s, omegas)
    wf = waterfill(inter, s.h, s.sigma2, s.p_sum)
    direct = float(np.sum(np.abs(np.einsum("nm,nm->n", s.g.conj(), omegas)) ** 2))
    reactive = float(np.dot(wf.p, s.phi))
    return PowerBreakdown(direct=direct, reactive=reactive,
                          total=direct + reactive, lam=wf.lam, primary_p=wf.p)


def primary_sum_rate(s, omegas) -> float:
    """Achievable primary rate [bps/Hz] summed over subcarriers."""
    inter = interference_profile(s, omegas)
    wf = waterfill(inter, s.h, s.sigma2, s.p_sum)
    snr = s.h * wf.p / (inter + s.sigma2)
    return float(np.log2(1.0 + snr).sum())
