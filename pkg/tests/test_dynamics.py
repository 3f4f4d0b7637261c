import math

import numpy as np
import pytest
from _support import intertwined_toy, perturbation_growth_oracle
from scipy.integrate import solve_ivp

from clustersync.dynamics import (
    ContinuationIC,
    Numerics,
    OscillatorModel,
    SigmaInterval,
    attractor_samples,
    block_mle,
    integrate,
    interval_from_values,
    owners,
    perturbed_network_state,
    quotient_trajectory,
    sigma_interval,
    simulate_network,
    sweep,
    transverse_mle,
    van_der_pol,
    with_numerics,
)
from clustersync.examples import generate_example, ring_clique_network
from clustersync.netio import shifted_adjacency
from clustersync.partition import Partition, minimum_balanced_coloring, quotient_matrix
from clustersync.spectral import decompose

VDP = van_der_pol()
SHORT = Numerics(horizon=200.0, transient=50.0, window=(150.0, 200.0), widen_factor=1.0)


def linear_model(A0, D):
    """x' = A0 x with coupling through D x; the transverse exponent at ``xi = sigma mu`` is max Re eig(A0 - xi D)."""
    A0, D = np.asarray(A0, float), np.asarray(D, float)
    m = A0.shape[0]

    def const(M):
        return lambda x: np.broadcast_to(M, np.shape(x)[:-1] + (m, m)).copy()

    return OscillatorModel(m, lambda x: x @ A0.T, const(A0), lambda x: x @ D.T, const(D), name="linear")


# stable exactly for 1 < xi < 4
BAND = linear_model(np.diag([1.0, -4.0]), np.diag([1.0, -1.0]))


def _fig2(name):
    At = shifted_adjacency(generate_example(name).network)
    p = minimum_balanced_coloring(At)
    return At, p


# ---------------------------------------------------------------- model and integrator


@pytest.mark.parametrize("which", ["F", "H"])
def test_jacobians_match_finite_differences(which):
    f, J = (VDP.F, VDP.DF) if which == "F" else (VDP.H, VDP.DH)
    rng = np.random.default_rng(3)
    h = 1e-6
    for x in rng.uniform(-3, 3, size=(100, 2)):
        fd = np.column_stack([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(2)])
        Jx = J(x)
        assert np.all(np.abs(fd - Jx) <= 1e-4 * np.maximum(1.0, np.abs(Jx)))


def test_vdp_definition():
    x = np.array([[1.5, -0.5]])
    assert np.allclose(VDP.F(x), [[-0.5, -1.5 + 3 * (1 - 2.25) * -0.5]])
    assert np.allclose(VDP.H(x), [[0.0, -0.5]])


def test_rk4_linear_decay_and_order():
    rhs = lambda y: -y  # noqa: E731
    tr = integrate(rhs, [1.0], (0.0, 1.0), 1e-3)
    assert abs(tr.states[-1, 0] - math.exp(-1)) < 1e-8
    errs = [abs(integrate(rhs, [1.0], (0.0, 1.0), h).states[-1, 0] - math.exp(-1)) for h in (0.1, 0.05)]
    assert 8 <= errs[0] / errs[1] <= 32


def test_zero_vector_field_is_constant():
    zero = OscillatorModel(2, lambda x: np.zeros_like(x), None, None, None)
    tr = integrate(zero, [0.3, -1.2], (0.0, 5.0), 0.01)
    assert np.all(tr.states == [0.3, -1.2]) and not tr.diverged


def test_integrate_errors_and_divergence():
    with pytest.raises(ValueError):
        integrate(lambda y: -y, [1.0], (0, 1), 0.0)
    with pytest.raises(ValueError):
        integrate(lambda y: -y, [np.nan], (0, 1), 0.1)
    tr = integrate(lambda y: y**2, [1.0], (0.0, 2.0), 1e-3)
    assert tr.diverged and tr.times[-1] < 1.01  # exact blow-up at t = 1


def test_vdp_limit_cycle_amplitude():
    tr = integrate(VDP, [0.1, 0.0], (0.0, 100.0), 1e-3, record_every=10)
    amp = np.abs(tr.states[tr.times > 60, 0]).max()
    ref = solve_ivp(lambda t, x: VDP.F(x), (0, 100), [0.1, 0.0], method="DOP853", rtol=1e-11, atol=1e-12,
                    t_eval=np.arange(60, 100, 1e-3))
    assert abs(amp - np.abs(ref.y[0]).max()) < 1e-3
    assert abs(amp - 2.0) < 0.05


# ---------------------------------------------------------------- quotient flow


def test_numerics_validation():
    with pytest.raises(ValueError):
        Numerics(horizon=100.0)  # default window lies beyond the horizon
    with pytest.raises(ValueError):
        Numerics(transient=600.0)
    assert with_numerics(SHORT, dt=2e-3).dt == 2e-3


def test_attractor_samples_lie_on_cycle():
    s = attractor_samples(VDP, 20, np.random.default_rng(0))
    assert s.shape == (20, 2)
    assert np.abs(s[:, 0]).max() < 2.1 and np.abs(s[:, 0]).max() > 1.0


def test_sigma_zero_gives_independent_copies():
    At, p = _fig2("fig2-case-a")
    ic = ContinuationIC(VDP, 2, seed=5, numerics=SHORT)
    s0 = ic.current()
    tr = quotient_trajectory(quotient_matrix(At, p), VDP, 0.0, ic, SHORT, sample_every=1.0)
    for k in range(2):
        alone = integrate(VDP, s0[k], (0.0, SHORT.horizon), SHORT.dt, record_every=1000)
        assert np.allclose(tr.states[:, k], alone.states, atol=1e-9)
    # the continuation chain now starts from the final state
    assert np.array_equal(ic.current(), tr.s_final)


def test_quotient_bounded_at_moderate_sigma_and_diverges_at_huge_sigma():
    At, p = _fig2("fig2-case-a")
    Q = quotient_matrix(At, p)
    tr = quotient_trajectory(Q, VDP, 0.3, ContinuationIC(VDP, 2, 0, SHORT), SHORT)
    assert not tr.diverged and np.all(np.isfinite(tr.states)) and np.abs(tr.states).max() < 50
    ic = ContinuationIC(VDP, 2, 0, SHORT)
    before = ic.current()
    tr = quotient_trajectory(Q, VDP, 1e3, ic, SHORT)
    assert tr.diverged
    assert np.array_equal(ic.current(), before)  # divergent runs do not advance the chain


# ---------------------------------------------------------------- Lyapunov exponents


def test_mle_at_zero_coupling_is_neutral():
    At, p = _fig2("fig2-case-a")
    tr = quotient_trajectory(quotient_matrix(At, p), VDP, 0.0, ContinuationIC(VDP, 2, 1))
    r = transverse_mle(tr, 0, 5.0)
    assert abs(r.value) <= 0.01
    with pytest.raises(ValueError):
        transverse_mle(tr, 0, -1.0)


def test_block_mle_reduces_to_transverse_mle():
    At, p = _fig2("fig2-case-a")
    d = decompose(At, p)
    tr = quotient_trajectory(d.Q, VDP, 0.4, ContinuationIC(VDP, 2, 2, SHORT), SHORT)
    blk = d.blocks[0]
    assert blk.dim == 1
    a = block_mle(tr, blk).value
    b = transverse_mle(tr, blk.row_cluster[0], -float(blk.matrix[0, 0])).value
    assert abs(a - b) <= 1e-9


def test_duplicated_block_has_same_mle():
    At, p = _fig2("fig2-case-b")
    tr = quotient_trajectory(quotient_matrix(At, p), VDP, 0.2, ContinuationIC(VDP, 2, 0, SHORT), SHORT)
    one = block_mle(tr, (np.array([[-12.0]]), (0,))).value
    two = block_mle(tr, (np.array([[-12.0, 0.0], [0.0, -12.0]]), (0, 0))).value
    assert abs(one - two) <= 1e-9


@pytest.mark.parametrize("sigma", [0.3, 1.5])
def test_intertwined_block_matches_full_perturbation_oracle(sigma):
    A = intertwined_toy()
    At = A - 3.0 * np.eye(5)
    p = minimum_balanced_coloring(At)
    d = decompose(At, p)
    assert len(d.multi_cluster_blocks) == 1
    num = Numerics(horizon=120.0, transient=20.0, window=(100.0, 120.0), widen_factor=1.0)
    s0 = attractor_samples(VDP, p.K, np.random.default_rng(4))
    tr = quotient_trajectory(d.Q, VDP, sigma, s0, num)
    ours = max(block_mle(tr, b).value for b in d.blocks)
    ref = perturbation_growth_oracle(At, p, VDP, sigma, s0, t_transient=20, t_total=120,
                                     rng=np.random.default_rng(0))
    assert abs(ours - ref) <= 0.02


def test_case_a_clique_stable_at_unit_coupling():
    At, p = _fig2("fig2-case-a")
    tr = quotient_trajectory(quotient_matrix(At, p), VDP, 1.0, ContinuationIC(VDP, 2, 0))
    assert transverse_mle(tr, 1, 15.0).value < 0


@pytest.mark.xfail(strict=True, reason="measured exponent stays negative here; see the decisions ledger")
def test_case_c_clique_unstable_at_sigma_02():
    At, p = _fig2("fig2-case-c")
    tr = quotient_trajectory(quotient_matrix(At, p), VDP, 0.2, ContinuationIC(VDP, 2, 0))
    assert transverse_mle(tr, 1, 22.0).value > 0


# ---------------------------------------------------------------- intervals


def test_interval_from_values_windows():
    grid = np.arange(1, 11) * 0.1
    vals = np.array([1, -1, -1, 1, 1, -1, -1, -1, -1, 1.0])

    def st(s, _):
        return bool(np.interp(s, grid, vals) < 0)

    iv = interval_from_values(grid, vals, st, refine_tol=1e-4, owner="C0")
    assert iv.status == "bounded" and len(iv.windows) == 2
    assert iv.lo == pytest.approx(0.55, abs=1e-4) and iv.hi == pytest.approx(0.95, abs=1e-4)
    assert interval_from_values(grid, np.ones(10), st).empty
    assert interval_from_values([], [], st).empty
    top = interval_from_values(grid, -np.ones(10), lambda s, _: True, refine_tol=1e-4)
    assert top.status == "unbounded" and top.hi == math.inf and top.lo < 1e-4
    near = interval_from_values(grid, -0.01 * np.ones(10), lambda s, _: s > 0.05, refine_tol=1e-4)
    assert near.status == "scan-limited" and near.hi == pytest.approx(1.0)
    assert near.lo == pytest.approx(0.05, abs=1e-4)
    with pytest.raises(ValueError):
        interval_from_values([0.2, 0.1], [1, 1], st)
    with pytest.raises(ValueError):
        SigmaInterval(0.5, 0.2)


def test_synthetic_band_interval_ratio():
    """sigma_max / sigma_min = (b2 / b1) (mu_min / mu_max) for a band-stable exponent."""
    mu_min, mu_max = 2.0, 3.0
    num = Numerics(dt=0.05, horizon=40.0, transient=10.0, window=(30.0, 40.0), widen_factor=1.0)

    def mle(sigma):
        tr = quotient_trajectory(np.zeros((1, 1)), BAND, sigma, np.zeros((1, 2)), num)
        return max(transverse_mle(tr, 0, mu).value for mu in (mu_min, mu_max))

    iv = sigma_interval(mle, np.arange(0.1, 2.0, 0.2), refine_tol=1e-4)
    assert iv.status == "bounded"
    assert iv.lo == pytest.approx(1 / mu_min, rel=0.01) and iv.hi == pytest.approx(4 / mu_max, rel=0.01)
    assert iv.hi / iv.lo == pytest.approx(4.0 * mu_min / mu_max, rel=0.01)


# ---------------------------------------------------------------- network simulation


def test_sync_manifold_is_invariant():
    At, p = _fig2("fig2-case-a")
    s = attractor_samples(VDP, 2, np.random.default_rng(0))
    num = Numerics(horizon=20.0, transient=5.0, window=(10.0, 20.0))
    x0 = s[np.asarray(p.cluster_of)]
    assert np.all(simulate_network(At, p, VDP, 0.0, x0, num).E == 0)
    # with coupling, summation order differs between nodes of a cluster
    res = simulate_network(At, p, VDP, 0.3, x0, num)
    assert np.all(res.E <= 1e-12) and np.all(res.synchronized)


def test_perturbed_state():
    p = Partition.from_clusters([[0, 2], [1]])
    x = perturbed_network_state(p, np.array([[1.0, 2.0], [3.0, 4.0]]), 1e-4, np.random.default_rng(0))
    base = np.array([[1, 2], [3, 4], [1, 2.0]])
    assert np.allclose(np.abs(x - base), 1e-4)


def test_case_a_synchronizes_inside_interval():
    At, p = _fig2("fig2-case-a")
    d = decompose(At, p)
    row = sweep(At, p, d, VDP, [0.3]).rows[0]
    assert max(row["mle"]) < 0
    assert all(e < 1e-3 * n for e, n in zip(row["E"], p.sizes))


@pytest.mark.xfail(strict=True, reason="ring cluster measured synchronized at this coupling; see the decisions ledger")
def test_case_c_ring_not_synchronized_at_sigma_005():
    At, p = _fig2("fig2-case-c")
    row = sweep(At, p, decompose(At, p), VDP, [0.05]).rows[0]
    assert row["E"][1] < 1e-3 * 5 and row["E"][0] >= 1e-3 * 10


def test_unstable_transverse_direction_desynchronizes():
    # negative ring weights give the ring cluster positive transverse eigenvalues
    At = shifted_adjacency(ring_clique_network(-2.0, 3.0, 0.1, -12.0))
    p = minimum_balanced_coloring(At)
    d = decompose(At, p)
    assert d.lambda_R[0].max() > 0
    row = sweep(At, p, d, VDP, [0.3]).rows[0]
    assert not (row["E"][0] < 1e-3 * 10)


def test_band_model_syncs_inside_and_not_beyond_bounds():
    # cliques {0,1} and {2,3}: transverse mu = 11, 12; quotient mu = 9.62, 7.38 (kappa = 10)
    A = np.array([[0, 1, .5, .5], [1, 0, .5, .5], [.5, .5, 0, 2], [.5, .5, 2, 0]])
    At = A - 10 * np.eye(4)
    p = minimum_balanced_coloring(At)
    d = decompose(At, p)
    num = Numerics(dt=0.05, horizon=60.0, transient=10.0, window=(50.0, 60.0), widen_factor=1.0)
    grid = np.arange(0.05, 0.6, 0.05)

    def interval(k):
        def mle(sigma):
            tr = quotient_trajectory(np.zeros((1, 1)), BAND, sigma, np.zeros((1, 2)), num)
            return max(transverse_mle(tr, 0, mu).value for mu in d.mu[k])
        return sigma_interval(mle, grid, refine_tol=1e-4)

    ivs = [interval(0), interval(1)]
    assert ivs[0].hi == pytest.approx(4 / 11, rel=0.01) and ivs[1].lo == pytest.approx(1 / 12, rel=0.01)
    rng = np.random.default_rng(0)
    x0 = rng.normal(scale=1e-4, size=(4, 2))
    inside = simulate_network(At, p, BAND, 0.25, x0, num)
    assert np.all(inside.synchronized)
    for k, iv in enumerate(ivs):
        for sigma in (0.8 * iv.lo, 1.2 * iv.hi):
            res = simulate_network(At, p, BAND, sigma, x0, num)
            assert not res.synchronized[k]


def test_sweep_empty_grid_and_csv():
    At, p = _fig2("fig2-case-a")
    d = decompose(At, p)
    t = sweep(At, p, d, VDP, [], numerics=SHORT)
    assert t.rows == [] and t.to_csv() == "sigma,E_1,E_2,mle_1,mle_2,diverged\n"
    t = sweep(At, p, d, VDP, [0.3, 1e3], numerics=SHORT)
    lines = t.to_csv().splitlines()
    assert len(lines) == 3 and lines[2].endswith("nan,nan,nan,nan,1")
    assert [o.label for o in owners(d)] == ["C0", "C1"]
