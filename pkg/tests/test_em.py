import numpy as np
import pytest

from salmix.em import SalFamily, e_step, fit_em, handle_mu_degeneracy, m_step, sal_m_step
from salmix.engine import (
    AitkenState,
    AnnealingSchedule,
    FitConfig,
    anneal,
    annealing_cap,
    repair_covariance,
    responsibilities,
    run_em,
)
from salmix.exceptions import AtShiftPoint, CovarianceRepairFailed, EmptyComponent
from salmix.gmm import GaussianFamily, gaussian_m_step
from salmix.sal import SalComponent, SalMixture, evaluation_terms, posterior_w_params, sample_sal
from salmix.simulate import generate_from_weights
from salmix.special import gig_expectations

FAST = AnnealingSchedule.linear(10, restarts=2)


def two_cluster_data(n=200, seed=0):
    comps = [SalComponent([0.0, 0.0], [1.0, 0.5], np.eye(2)),
             SalComponent([6.0, 6.0], [-0.5, 1.0], [[1.0, 0.3], [0.3, 0.7]])]
    ds, z = generate_from_weights([0.5, 0.5], comps, n, seed)
    return ds.rows, z


def expected_complete_loglik(X, tau, e_w, e_inv_w, m):
    """Q up to parameter-free terms."""
    out = 0.0
    for g, (w, c) in enumerate(zip(m.weights, m.components)):
        t = evaluation_terms(X, c)
        out += np.sum(tau[:, g] * (np.log(w) - 0.5 * c.log_det_sigma + t.dot_term
                                   - 0.5 * e_inv_w[:, g] * t.delta - 0.5 * e_w[:, g] * t.quad_alpha))
    return out


# E-step ----------------------------------------------------------------------

def test_single_component_tau_is_one():
    X, _ = two_cluster_data(50)
    e = e_step(X, SalMixture([1.0], [SalComponent([1.0, 1.0], [0.2, 0.1], np.eye(2))]))
    np.testing.assert_array_equal(e.tau, 1.0)


def test_identical_components_split_evenly():
    X, _ = two_cluster_data(50)
    c = SalComponent([1.0, 1.0], [0.2, 0.1], np.eye(2))
    e = e_step(X, SalMixture([0.5, 0.5], [c, c]))
    np.testing.assert_allclose(e.tau, 0.5, rtol=1e-14)


def test_moments_match_posterior_gig():
    X, _ = two_cluster_data(30)
    m = SalMixture([0.3, 0.7], [SalComponent([0.0, 0.0], [1.0, 0.5], np.eye(2)),
                                SalComponent([5.0, 5.0], [0.0, 1.0], 2 * np.eye(2))])
    e = e_step(X, m)
    for i in (0, 7, 29):
        for g, c in enumerate(m.components):
            ew, eiw = gig_expectations(*posterior_w_params(X[i], c))
            assert e.e_w[i, g] == pytest.approx(ew, rel=1e-12)
            assert e.e_inv_w[i, g] == pytest.approx(eiw, rel=1e-12)
    np.testing.assert_allclose(e.tau.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(e.e_w * e.e_inv_w >= 1.0 - 1e-12)


def test_row_on_shift_raises():
    X, _ = two_cluster_data(30)
    m = SalMixture([1.0], [SalComponent(X[3], [0.0, 0.0], np.eye(2))])
    with pytest.raises(AtShiftPoint):
        e_step(X, m)


# M-step ----------------------------------------------------------------------

def test_unit_scales_with_zero_skew_give_gaussian_update():
    X, z = two_cluster_data(100)
    tau = np.eye(2)[z - 1] * 0.9 + 0.05
    ones = np.ones_like(tau)
    sal = sal_m_step(X, tau, ones, ones, zero_skew=True)
    gau = gaussian_m_step(X, tau)
    for g, c in enumerate(sal.components):
        np.testing.assert_allclose(c.alpha, 0.0)
        np.testing.assert_allclose(c.mu, gau.means[g], rtol=1e-12)
        np.testing.assert_allclose(c.sigma, gau.covariances[g], rtol=1e-12)
    np.testing.assert_allclose(sal.weights, gau.weights)


def test_m_step_maximizes_expected_complete_loglik():
    X, _ = two_cluster_data(150, seed=3)
    m0 = SalMixture([0.5, 0.5], [SalComponent([0.5, 0.5], [0.5, 0.5], np.eye(2)),
                                 SalComponent([5.5, 6.5], [0.0, 0.5], np.eye(2))])
    e = e_step(X, m0)
    m1 = m_step(X, e)
    best = expected_complete_loglik(X, e.tau, e.e_w, e.e_inv_w, m1)
    rng = np.random.default_rng(0)
    for _ in range(30):
        comps = []
        for c in m1.components:
            B = 0.02 * rng.normal(size=(2, 2))
            comps.append(SalComponent(c.mu + 0.02 * rng.normal(size=2), c.alpha + 0.02 * rng.normal(size=2),
                                      c.sigma + B @ B.T + 0.01 * (B + B.T)))
        assert expected_complete_loglik(X, e.tau, e.e_w, e.e_inv_w, SalMixture(m1.weights, comps)) <= best


def test_frozen_component_keeps_location():
    X, _ = two_cluster_data(100)
    m0 = SalMixture([0.5, 0.5], [SalComponent([0.5, 0.5], [0.5, 0.5], np.eye(2)),
                                 SalComponent([5.5, 6.5], [0.0, 0.5], np.eye(2))])
    e = e_step(X, m0)
    m1 = m_step(X, e, prev=m0, frozen={1})
    np.testing.assert_array_equal(m1.components[1].mu, m0.components[1].mu)
    t, ew = e.tau[:, 1], e.e_w[:, 1]
    expected = (t @ X - t.sum() * m0.components[1].mu) / (t @ ew)
    np.testing.assert_allclose(m1.components[1].alpha, expected, rtol=1e-12)


def test_empty_component_is_reported():
    X, _ = two_cluster_data(50)
    tau = np.column_stack([np.ones(50), np.zeros(50)])
    with pytest.raises(EmptyComponent) as info:
        sal_m_step(X, tau, np.ones((50, 2)), np.ones((50, 2)))
    assert info.value.component == 2


def test_covariance_repair():
    fixed = repair_covariance(np.array([[1.0, 2.0], [2.0, 1.0]]))
    np.linalg.cholesky(fixed)
    ok = np.array([[2.0, 0.1], [0.1, 1.0]])
    np.testing.assert_array_equal(repair_covariance(ok), ok)
    with pytest.raises(CovarianceRepairFailed):
        repair_covariance(np.array([[-1.0, 0.0], [0.0, -1.0]]))


# stopping, annealing ------------------------------------------------------------

def test_aitken_rule():
    s = AitkenState().push(-100.0).push(-50.0)
    assert not s.converged(1e-5)
    s = s.push(-25.0)
    assert s.a_k == pytest.approx(0.5)
    assert s.l_inf == pytest.approx(0.0)
    assert not s.converged(1e-5)
    s = AitkenState().push(-10.0).push(-10.0 + 1e-3).push(-10.0 + 1e-3 + 1e-7)
    assert s.converged(1e-5)


def test_aitken_falls_back_outside_unit_interval():
    # a_k > 1: use the plain difference
    s = AitkenState().push(0.0).push(1e-7).push(3e-7)
    assert s.a_k > 1
    assert s.converged(1e-5)


def test_annealing_cap_values():
    assert annealing_cap(1.0) == pytest.approx(-np.log(1e-10), rel=1e-6)
    assert annealing_cap(1.0) == pytest.approx(23.03, abs=0.01)
    assert annealing_cap(0.5) == pytest.approx(np.log(2.0))
    assert annealing_cap(0.5, floor=10.0) == 10.0


def test_zero_temperature_is_uniform():
    L = np.log(np.array([[0.2, 0.8], [0.9, 0.1]]))
    tau, _ = responsibilities(L, np.full(2, -1), v=0.0)
    np.testing.assert_allclose(tau, 0.5)


def test_schedule_validation():
    with pytest.raises(ValueError):
        AnnealingSchedule((0.5, 0.4))
    with pytest.raises(ValueError):
        AnnealingSchedule(())
    assert AnnealingSchedule.linear(25).v_values[0] == pytest.approx(0.04)


def test_config_validation():
    with pytest.raises(ValueError):
        FitConfig(g=0)
    with pytest.raises(ValueError):
        FitConfig(g=1, epsilon=0.0)
    with pytest.raises(ValueError):
        FitConfig(g=1, max_iter=0)


# full fits -----------------------------------------------------------------------

def test_fit_recovers_two_clusters():
    X, z = two_cluster_data(300, seed=1)
    r = fit_em(X, FitConfig(g=2, seed=0))
    from salmix.selection import rand_and_ari

    assert rand_and_ari(z, r.map_labels)[1] > 0.95
    trace = np.array(r.log_lik_trace)
    assert np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1]))


def test_fit_is_deterministic():
    X, _ = two_cluster_data(120)
    cfg = FitConfig(g=2, seed=4, annealing=FAST)
    assert fit_em(X, cfg) == fit_em(X, cfg)


def test_max_iter_counts_e_steps():
    X, _ = two_cluster_data(120)
    r = fit_em(X, FitConfig(g=2, seed=4, max_iter=3, annealing=FAST))
    assert r.n_iter == 3
    assert r.status in ("max_iter", "converged", "degenerate-frozen")


def test_permutation_equivariance():
    X, _ = two_cluster_data(150, seed=2)
    c1 = SalComponent([0.5, 0.5], [0.5, 0.5], np.eye(2))
    c2 = SalComponent([5.5, 6.5], [0.0, 0.5], np.eye(2))
    cfg = FitConfig(g=2, max_iter=50)
    a = fit_em(X, cfg, init=SalMixture([0.4, 0.6], [c1, c2]))
    b = fit_em(X, cfg, init=SalMixture([0.6, 0.4], [c2, c1]))
    np.testing.assert_allclose(a.responsibilities, b.responsibilities[:, ::-1], atol=1e-10)
    np.testing.assert_allclose(a.log_lik_trace, b.log_lik_trace, rtol=1e-12)
    for ca, cb in zip(a.parameters.components, b.parameters.components[::-1]):
        np.testing.assert_allclose(ca.mu, cb.mu, atol=1e-9)


def test_fixed_point_after_convergence():
    X, _ = two_cluster_data(150, seed=2)
    r = fit_em(X, FitConfig(g=2, seed=0, epsilon=1e-12, max_iter=5000, annealing=FAST))
    m = r.parameters
    frozen = {g - 1 for g in r.frozen_components}
    again = m_step(X, e_step(X, m), prev=m, frozen=frozen)
    for c0, c1 in zip(m.components, again.components):
        np.testing.assert_allclose(c1.mu, c0.mu, atol=1e-6)
        np.testing.assert_allclose(c1.sigma, c0.sigma, atol=1e-6)


# degeneracy --------------------------------------------------------------------

def laplace_line(seed):
    return sample_sal(SalComponent([0.0], [0.5], [[1.0]]), 101, seed=seed)


def test_location_walking_onto_datum_is_frozen():
    X = laplace_line(0)
    init = SalMixture([1.0], [SalComponent([np.median(X) + 0.3], [0.0], [[1.0]])])
    r = fit_em(X, FitConfig(g=1), init=init)
    assert r.status == "degenerate-frozen"
    assert r.frozen_components == [1]
    assert np.all(np.isfinite(r.log_lik_trace))
    c = r.parameters.components[0]
    e = e_step(X, r.parameters)
    closed = (X.sum() - X.shape[0] * c.mu[0]) / e.e_w.sum()
    assert c.alpha[0] == pytest.approx(closed, rel=1e-3)


def test_handle_mu_degeneracy_freezes_and_refits():
    X = laplace_line(1)
    m0 = SalMixture([1.0], [SalComponent([0.1], [0.3], [[1.0]])])
    e = e_step(X, m0)
    on_datum = SalMixture([1.0], [SalComponent(X[5], [0.3], [[1.0]])])
    out, frozen = handle_mu_degeneracy(X, e, m0, on_datum)
    assert frozen == {0}
    assert out.components[0].mu[0] == pytest.approx(0.1)
    same, none = handle_mu_degeneracy(X, e, m0, m0)
    assert same is m0 and not none


# shared engine ---------------------------------------------------------------------

class RecordingFamily(GaussianFamily):
    kind = "gaussian"

    def __init__(self):
        self.initial_draws = []
        self.temperatures = 0

    def initial(self, X, g, rng):
        m = super().initial(X, g, rng)
        self.initial_draws.append(m.means.copy())
        return m

    def log_joint(self, X, model, annealing=False):
        self.temperatures += annealing
        return super().log_joint(X, model, annealing)


def test_annealing_restarts_and_steps_are_shared():
    X, _ = two_cluster_data(80)
    fam = RecordingFamily()
    cfg = FitConfig(g=2, seed=9, annealing=AnnealingSchedule.linear(5, restarts=3))
    anneal(X, fam, cfg)
    assert len(fam.initial_draws) == 3
    assert fam.temperatures == 15
    # both families draw identical starting locations from the same stream
    rng_a, rng_b = (np.random.default_rng(np.random.SeedSequence(9).spawn(1)[0]) for _ in range(2))
    sal0 = SalFamily().initial(X, 2, rng_a)
    gau0 = GaussianFamily().initial(X, 2, rng_b)
    np.testing.assert_array_equal([c.mu for c in sal0.components], gau0.means)
    np.testing.assert_array_equal(sal0.weights, gau0.weights)
    np.testing.assert_array_equal(fam.initial_draws[0], gau0.means)


def test_stopping_rule_is_shared():
    class Stationary(GaussianFamily):
        def m_step(self, X, tau, e_w, e_inv_w, prev, frozen):
            return prev

    X, _ = two_cluster_data(80)
    init = GaussianFamily().initial(X, 2, np.random.default_rng(0))
    r = run_em(X, Stationary(), init, FitConfig(g=2))
    assert r.n_iter == 3 and r.status == "converged"
