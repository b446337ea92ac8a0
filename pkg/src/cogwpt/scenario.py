"""Scenario model: node layout, channels, budgets, and (de)serialization.

Four nodes on a 2-D plane: a multi-antenna energy transmitter (S-ET) charging
an energy receiver (S-ER) while a single-antenna primary pair (P-IT -> P-IR)
runs rate-adaptive water-filling over the same N subcarriers.  Every link
combines chi*(d/d0)^-kappa path loss with Rayleigh fading: vector links
(S-ET to S-ER, S-ET to P-IR) are CSCG per antenna entry, scalar links enter
as squared envelopes (exponential power fading).

Randomness is Philox (counter based), key = [seed, link code] with link codes
h=1, phi=2, g=3, f=4.  Antenna entries are drawn inside a reserved block of
ANTENNA_SLOTS normal pairs per subcarrier, so vectors are nested: the same
seed at a larger M (or N) extends the channels without changing existing
entries.  Fixtures can be re-derived from this layout alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Reserved normal-pair slots per subcarrier for vector links; M may not exceed it.
ANTENNA_SLOTS = 64

_LINK_H = 1
_LINK_PHI = 2
_LINK_G = 3
_LINK_F = 4

_FORMAT_TAG = "cogwpt-scenario-v1"


@dataclass(frozen=True)
class Geometry:
    """Node positions in meters plus the distance-based gain law."""

    s_et: tuple[float, float] = (0.0, 0.0)
    s_er: tuple[float, float] = (0.0, 5.0)
    p_it: tuple[float, float] = (0.0, 2.5)
    p_ir: tuple[float, float] = (5.0, 0.0)
    ref_gain: float = 1e-3      # chi, linear (corresponds to -30 dB)
    ref_distance: float = 1.0   # d0 [m]
    pathloss_exp: float = 3.0   # kappa

    def __post_init__(self):
        if not (self.ref_gain > 0):
            raise ValueError("geometry field 'ref_gain': must be > 0")
        if not (self.ref_distance > 0):
            raise ValueError("geometry field 'ref_distance': must be > 0")
        if not (self.pathloss_exp > 0):
            raise ValueError("geometry field 'pathloss_exp': must be > 0")
        nodes = {"s_et": self.s_et, "s_er": self.s_er,
                 "p_it": self.p_it, "p_ir": self.p_ir}
        names = list(nodes)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if math.dist(nodes[a], nodes[b]) == 0.0:
                    raise ValueError(
                        f"geometry fields '{a}'/'{b}': coincident nodes")

    def gain(self, a: tuple[float, float], b: tuple[float, float]) -> float:
        """Average power gain of the a -> b link."""
        d = math.dist(a, b)
        return self.ref_gain * (d / self.ref_distance) ** (-self.pathloss_exp)


@dataclass
class Scenario:
    """One channel realization plus its power budgets (all powers in watts)."""

    h: np.ndarray       # (N,) primary link gains, > 0
    phi: np.ndarray     # (N,) P-IT -> S-ER gains, >= 0
    g: np.ndarray       # (N, M) complex, S-ET -> S-ER
    f: np.ndarray       # (N, M) complex, S-ET -> P-IR, nonzero rows
    sigma2: float = 1e-9
    p_sum: float = 3.2
    q_sum: float = 6.4
    q_peak: float = 0.1
    gamma: float = 1.28e-6

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.phi = np.asarray(self.phi, dtype=np.float64)
        self.g = np.asarray(self.g, dtype=np.complex128)
        self.f = np.asarray(self.f, dtype=np.complex128)
        if self.h.ndim != 1 or self.h.size == 0:
            raise ValueError("scenario field 'h': expected nonempty 1-D array")
        n = self.h.shape[0]
        if self.phi.shape != (n,):
            raise ValueError("scenario field 'phi': shape mismatch with 'h'")
        if self.g.ndim != 2 or self.g.shape[0] != n or self.g.shape[1] == 0:
            raise ValueError("scenario field 'g': expected (N, M) with M >= 1")
        if self.f.shape != self.g.shape:
            raise ValueError("scenario field 'f': shape mismatch with 'g'")
        for name in ("h", "phi", "g", "f"):
            if not np.all(np.isfinite(getattr(self, name).view(np.float64))):
                raise ValueError(f"scenario field '{name}': non-finite entries")
        if np.any(self.h <= 0):
            raise ValueError("scenario field 'h': entries must be > 0")
        if np.any(self.phi < 0):
            raise ValueError("scenario field 'phi': entries must be >= 0")
        if np.any(np.linalg.norm(self.f, axis=1) == 0):
            raise ValueError("scenario field 'f': zero row (P-IR channel vanishes)")
        if not (self.sigma2 > 0):
            raise ValueError("scenario field 'sigma2': must be > 0")
        if not (self.p_sum > 0):
            raise ValueError("scenario field 'p_sum': must be > 0")
        for name in ("q_sum", "q_peak", "gamma"):
            if not (getattr(self, name) >= 0):
                raise ValueError(f"scenario field '{name}': must be >= 0")

    @property
    def n_subcarriers(self) -> int:
        return self.h.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.g.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            np.array_equal(self.h, other.h)
            and np.array_equal(self.phi, other.phi)
            and np.array_equal(self.g, other.g)
            and np.array_equal(self.f, other.f)
            and (self.sigma2, self.p_sum, self.q_sum, self.q_peak, self.gamma)
            == (other.sigma2, other.p_sum, other.q_sum, other.q_peak, other.gamma)
        )


def _normal_block(seed: int, link_code: int, shape) -> np.ndarray:
    key = np.array([seed % 2**64, link_code], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal(shape)


def _vector_channel(seed, code, n, m, var):
    block = _normal_block(seed, code, (n, ANTENNA_SLOTS, 2))[:, :m, :]
    return (block[..., 0] + 1j * block[..., 1]) * math.sqrt(var / 2.0)


def _scalar_channel(seed, code, n, var):
    block = _normal_block(seed, code, (n, 2))
    return (block[:, 0] ** 2 + block[:, 1] ** 2) * (var / 2.0)


def generate_scenario(seed: int,
                      n_subcarriers: int = 64,
                      n_antennas: int = 4,
                      geometry: Geometry | None = None,
                      *,
                      sigma2: float = 1e-9,
                      p_sum: float = 3.2,
                      q_sum: float = 6.4,
                      q_peak: float = 0.1,
                      gamma: float = 1.28e-6) -> Scenario:
    """Draw one scenario. Same arguments -> identical realization.

    Growing n_antennas (or n_subcarriers) with the seed fixed extends the
    channel arrays, leaving previously drawn entries untouched.
    """
    geo = Geometry() if geometry is None else geometry
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError("seed: expected a nonnegative integer")
    if n_subcarriers < 1:
        raise ValueError("n_subcarriers: must be >= 1")
    if not (1 <= n_antennas <= ANTENNA_SLOTS):
        raise ValueError(f"n_antennas: must be in [1, {ANTENNA_SLOTS}]")
    n, m = int(n_subcarriers), int(n_antennas)
    h = _scalar_channel(seed, _LINK_H, n, geo.gain(geo.p_it, geo.p_ir))
    phi = _scalar_channel(seed, _LINK_PHI, n, geo.gain(geo.p_it, geo.s_er))
    g = _vector_channel(seed, _LINK_G, n, m, geo.gain(geo.s_et, geo.s_er))
    f = _vector_channel(seed, _LINK_F, n, m, geo.gain(geo.s_et, geo.p_ir))
    return Scenario(h=h, phi=phi, g=g, f=f, sigma2=sigma2, p_sum=p_sum,
                    q_sum=q_sum, q_peak=q_peak, gamma=gamma)


def _complex_pairs(a: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def save_scenario(s: Scenario, path) -> None:
    doc = {
        "format": _FORMAT_TAG,
        "n_subcarriers": s.n_subcarriers,
        "n_antennas": s.n_antennas,
        "sigma2": s.sigma2,
        "p_sum": s.p_sum,
        "q_sum": s.q_sum,
        "q_peak": s.q_peak,
        "gamma": s.gamma,
        "h": [float(x) for x in s.h],
        "phi": [float(x) for x in s.phi],
        "g": _complex_pairs(s.g),
        "f": _complex_pairs(s.f),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _parse_complex(field_name, raw, n, m):
    arr = np.asarray(raw, dtype=np.float64)
    if arr.shape != (n, m, 2):
        raise ValueError(
            f"scenario field '{field_name}': expected {n}x{m} [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"scenario file {path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT_TAG:
        raise ValueError(f"scenario file {path}: missing format tag {_FORMAT_TAG!r}")
    for key in ("n_subcarriers", "n_antennas", "sigma2", "p_sum", "q_sum",
                "q_peak", "gamma", "h", "phi", "g", "f"):
        if key not in doc:
            raise ValueError(f"scenario field '{key}': missing")
    n, m = int(doc["n_subcarriers"]), int(doc["n_antennas"])
    h = np.asarray(doc["h"], dtype=np.float64)
    phi = np.asarray(doc["phi"], dtype=np.float64)
    if h.shape != (n,):
        raise ValueError("scenario field 'h': length disagrees with n_subcarriers")
    if phi.shape != (n,):
        raise ValueError("scenario field 'phi': length disagrees with n_subcarriers")
    g = _parse_complex("g", doc["g"], n, m)
    f = _parse_complex("f", doc["f"], n, m)
    return Scenario(h=h, phi=phi, g=g, f=f,
                    sigma2=float(doc["sigma2"]), p_sum=float(doc["p_sum"]),
                    q_sum=float(doc["q_sum"]), q_peak=float(doc["q_peak"]),
                    gamma=float(doc["gamma"]))
