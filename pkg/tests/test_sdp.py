import numpy as np
import pytest
from scipy.optimize import linprog

from cogwpt.sdp import (
    SdpConstraint,
    SdpInstance,
    extract_rank_one,
    solve_sdp,
    solve_sdp_batch,
)


def rand_herm(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def make_instance(rng, ratio=3.0):
    """Random bounded 2x2 instance: one rank-one row plus a trace cap."""
    C = rand_herm(rng, 2)
    f = rng.normal(size=2) + 1j * rng.normal(size=2)
    A = np.stack([np.outer(f, f.conj()), np.eye(2, dtype=complex)])
    b = np.array([10.0 ** rng.uniform(-ratio, ratio),
                  10.0 ** rng.uniform(-ratio, ratio)])
    return C, A, b


def _grid_values(C, A, b, ts, ph):
    T, P = np.meshgrid(ts, ph, indexing="ij")
    v = np.stack([np.cos(T), np.sin(T) * np.exp(1j * P)], axis=-1)
    cv = np.einsum("tpi,ij,tpj->tp", v.conj(), C, v).real
    q = np.full(cv.shape, np.inf)
    for k in range(A.shape[0]):
        av = np.einsum("tpi,ij,tpj->tp", v.conj(), A[k], v).real
        pos = av > 1e-15
        q = np.minimum(q, np.where(pos, b[k] / np.where(pos, av, 1.0), np.inf))
    q = np.where(np.isfinite(q), q, 0.0)
    return np.maximum(cv, 0.0) * q


def best_rank_one(C, A, b, n=160, seeds=8):
    """Restricted search over W = q vv^H, refined around the top directions.

    The value landscape has kinks where the binding constraint changes, so
    several coarse candidates are polished, not just the best one.
    """
    ts = np.linspace(0.0, np.pi / 2, n)
    ph = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    val = _grid_values(C, A, b, ts, ph)
    best = float(val.max())
    order = np.argsort(val, axis=None)[::-1][:seeds]
    for flat in order:
        i, j = np.unravel_index(flat, val.shape)
        t0, p0, span = ts[i], ph[j], np.pi / 2 / (n - 1)
        for _ in range(3):
            tg = np.clip(np.linspace(t0 - 2 * span, t0 + 2 * span, n),
                         0.0, np.pi / 2)
            pg = np.linspace(p0 - 2 * span, p0 + 2 * span, n)
            local = _grid_values(C, A, b, tg, pg)
            ij = np.unravel_index(np.argmax(local), local.shape)
            best = max(best, float(local[ij]))
            t0, p0 = tg[ij[0]], pg[ij[1]]
            span *= 4.0 / (n - 1)
    return best


def test_diagonal_instances_match_linear_programming():
    # diagonal data never couples the off-diagonal of W, so the exact
    # optimum is the LP over the diagonal
    rng = np.random.default_rng(3)
    for _ in range(25):
        n, m = 3, 2
        c = rng.normal(size=n)
        a = rng.uniform(0.2, 2.0, size=(m, n))
        b = rng.uniform(0.5, 5.0, size=m)
        inst = SdpInstance(
            objective=np.diag(c).astype(complex),
            constraints=[SdpConstraint(np.diag(a[k]).astype(complex),
                                       "<=", b[k]) for k in range(m)])
        sol = solve_sdp(inst)
        assert sol.status == "optimal"
        ref = linprog(-c, A_ub=a, b_ub=b, bounds=[(0, None)] * n,
                      method="highs")
        assert ref.status == 0
        assert sol.value == pytest.approx(-ref.fun, rel=1e-6, abs=1e-8)


def test_strictly_negative_objective_returns_zero():
    rng = np.random.default_rng(5)
    q = rand_herm(rng, 2)
    C = -(q @ q.conj().T) - 0.5 * np.eye(2)
    inst = SdpInstance(
        objective=C,
        constraints=[SdpConstraint(np.eye(2, dtype=complex), "<=", 4.0)])
    sol = solve_sdp(inst)
    assert sol.status == "optimal"
    assert abs(sol.value) < 1e-7
    assert np.linalg.norm(sol.w) < 1e-6


def test_matches_rank_one_direction_search():
    # with two constraint rows the optimum is attained at rank one, so a
    # refined direction search pins down the true value
    rng = np.random.default_rng(11)
    for _ in range(30):
        C, A, b = make_instance(rng)
        out = solve_sdp_batch(C[None], A[None], b[None])
        assert out["status"][0] == "optimal"
        ref = best_rank_one(C, A, b)
        assert out["value"][0] == pytest.approx(ref, rel=2e-4, abs=1e-9)


def test_returned_matrix_is_feasible():
    rng = np.random.default_rng(17)
    for _ in range(40):
        C, A, b = make_instance(rng, ratio=4.0)
        out = solve_sdp_batch(C[None], A[None], b[None])
        if out["status"][0] != "optimal":
            continue
        W = out["w"][0]
        ev = np.linalg.eigvalsh(W)
        assert ev.min() >= -1e-6 * max(1.0, ev.max())
        for k in range(2):
            lhs = np.einsum("ij,ji->", A[k], W).real
            assert lhs <= b[k] * (1 + 1e-6) + 1e-9


def test_duals_certify_the_value():
    # weak duality: returned multipliers must dominate the objective both
    # in the PSD order and in value
    rng = np.random.default_rng(23)
    for _ in range(25):
        C, A, b = make_instance(rng)
        out = solve_sdp_batch(C[None], A[None], b[None])
        assert out["status"][0] == "optimal"
        y = out["y"][0]
        assert np.all(y >= -1e-8)
        slack = np.einsum("k,kij->ij", y, A) - C
        lam = np.linalg.eigvalsh((slack + slack.conj().T) / 2)
        scale = max(1.0, float(np.abs(slack).max()))
        assert lam.min() >= -1e-5 * scale
        gap = float(y @ b) - out["value"][0]
        assert gap >= -1e-5 * max(1.0, abs(out["value"][0]))


def test_infeasible_pair_is_certified():
    inst = SdpInstance(
        objective=np.eye(2, dtype=complex),
        constraints=[SdpConstraint(np.eye(2, dtype=complex), ">=", 1.0),
                     SdpConstraint(np.eye(2, dtype=complex), "<=", 0.5)])
    sol = solve_sdp(inst)
    assert sol.status == "infeasible"
    assert sol.w is None


def test_unbounded_direction_is_certified():
    # the (2,2) block of W is unconstrained and pays into the objective
    inst = SdpInstance(
        objective=np.eye(2, dtype=complex),
        constraints=[SdpConstraint(np.diag([1.0, 0.0]).astype(complex),
                                   "<=", 1.0)])
    sol = solve_sdp(inst)
    assert sol.status == "unbounded"


def test_no_constraints():
    down = SdpInstance(objective=-np.eye(2, dtype=complex), constraints=[])
    sol = solve_sdp(down)
    assert sol.status == "optimal"
    assert abs(sol.value) < 1e-7
    up = SdpInstance(objective=np.diag([1.0, -1.0]).astype(complex),
                     constraints=[])
    assert solve_sdp(up).status == "unbounded"


def test_batch_agrees_with_single_solve():
    rng = np.random.default_rng(31)
    Cs, As, bs = zip(*[make_instance(rng) for _ in range(16)])
    C, A, b = np.array(Cs), np.array(As), np.array(bs)
    out = solve_sdp_batch(C, A, b)
    for i in range(16):
        one = solve_sdp_batch(C[i:i + 1], A[i:i + 1], b[i:i + 1])
        if out["status"][i] == one["status"][0] == "optimal":
            scale = max(1.0, abs(one["value"][0]))
            assert abs(out["value"][i] - one["value"][0]) < 1e-6 * scale


def test_extraction_recovers_pure_vector():
    rng = np.random.default_rng(41)
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    omega, info = extract_rank_one(np.outer(v, v.conj()))
    assert info["eig_ratio"] < 1e-12
    # same matrix back, and the gauge entry is real positive
    assert np.allclose(np.outer(omega, omega.conj()),
                       np.outer(v, v.conj()), atol=1e-9 * np.abs(v).max() ** 2)
    k = int(np.argmax(np.abs(omega)))
    assert omega[k].imag == pytest.approx(0.0, abs=1e-12)
    assert omega[k].real > 0


def test_extraction_purifies_degenerate_optimum():
    # objective and constraint are both the identity, so every W with
    # trace 1 is optimal; a mixed point must reduce to one beam without
    # losing value or feasibility
    inst = SdpInstance(
        objective=np.eye(2, dtype=complex),
        constraints=[SdpConstraint(np.eye(2, dtype=complex), "<=", 1.0)])
    w_mixed = 0.5 * np.eye(2, dtype=complex)
    omega, info = extract_rank_one(w_mixed, inst)
    assert info["reduction_steps"] >= 1
    w1 = np.outer(omega, omega.conj())
    assert np.trace(w1).real == pytest.approx(1.0, abs=1e-9)
    ev = np.linalg.eigvalsh(w1)
    assert ev.min() >= -1e-12


def test_solver_precision_on_beam_shaped_instances():
    # objective is a power pattern minus priced interference and power,
    # with a tight floor row next to a loose cap row, the shape the
    # per-subcarrier subproblems actually take
    rng = np.random.default_rng(47)
    Cs, As, bs = [], [], []
    for _ in range(60):
        g = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 4e-3
        f = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 3e-3
        G = np.outer(g, g.conj())
        F = np.outer(f, f.conj())
        q_peak = 0.1
        eta = rng.uniform(0.0, 3.0) * np.trace(G).real / np.trace(F).real
        mu = rng.uniform(0.0, 3.0) * np.trace(G).real / q_peak
        req = rng.uniform(0.1, 0.9) * q_peak * np.trace(F).real
        if rng.random() < 0.5:
            Cs.append(G - eta * F - mu * np.eye(2))
            As.append(np.stack([-F, np.eye(2, dtype=complex)]))
            bs.append(np.array([-req, q_peak]))
        else:
            Cs.append(G + (rng.uniform(-1.0, 1.0) - eta) * F
                      - mu * np.eye(2))
            As.append(np.stack([F, np.eye(2, dtype=complex)]))
            bs.append(np.array([req, q_peak]))
    out = solve_sdp_batch(np.array(Cs), np.array(As), np.array(bs))
    assert all(s == "optimal" for s in out["status"])
    assert out["gap"].max() <= 1e-8
    assert out["pres"].max() <= 1e-8
    assert out["dres"].max() <= 1e-8
