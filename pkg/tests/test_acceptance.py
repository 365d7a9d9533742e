"""
Acceptance suite. Each test records one PASS/FAIL line, printed in the
pytest terminal summary under "acceptance criteria".
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from conftest import ACCEPTANCE_RESULTS
from oracles import gig_moments_quad, log_bessel_k_quad, sal_density_quad
from salmix.data import DataSet, read_csv
from salmix.em import e_step, fit_em
from salmix.engine import FitConfig
from salmix.gmm import fit_gmm
from salmix.sal import SalComponent, SalMixture, sal_log_density, sample_sal
from salmix.selection import rand_and_ari, rand_and_ari_from_table
from salmix.semi import ClassificationTask, fit_classifier
from salmix.simulate import generate, generate_from_weights, paper_sim_spec

FAITHFUL = Path(__file__).parent / "data" / "faithful.csv"


def record(key, passed, line):
    ACCEPTANCE_RESULTS[key] = (bool(passed), line)
    assert passed, line


def monotone(trace, rel=1e-8):
    t = np.asarray(trace)
    return bool(np.all(np.diff(t) >= -rel * np.abs(t[:-1])))


def random_component(rng, p):
    A = rng.normal(size=(p, p))
    return SalComponent(rng.normal(size=p), rng.normal(size=p), A @ A.T + 0.5 * p * np.eye(p))


def test_01_special_functions():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_k = 0.0
    for nu, x in zip(rng.uniform(-10, 10, 500), 10 ** rng.uniform(-6, np.log10(700), 500)):
        from salmix.special import log_bessel_k

        got, ref = log_bessel_k(nu, x), log_bessel_k_quad(nu, x)
        worst_k = max(worst_k, abs(got - ref) / max(abs(ref), 1e-300))
    from salmix.special import gig_expectations

    worst_g = 0.0
    for _ in range(100):
        a, b = 10 ** rng.uniform(-2, 2, 2)
        nu = rng.uniform(-5, 5)
        got = np.array(gig_expectations(a, b, nu))
        ref = np.array(gig_moments_quad(a, b, nu))
        worst_g = max(worst_g, float(np.max(np.abs(got - ref) / ref)))
    elapsed = time.perf_counter() - start
    record("01 special functions", worst_k < 1e-10 and worst_g < 1e-7 and elapsed < 60,
           f"log K worst rel err {worst_k:.1e} (< 1e-10), GIG worst rel err {worst_g:.1e} (< 1e-7), "
           f"{elapsed:.1f}s")


def test_02_density():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for p in (1, 2, 3):
        for _ in range(50):
            c = random_component(rng, p)
            x = c.mu + c.alpha + 1.5 * rng.normal(size=p)
            ref = sal_density_quad(x, c.mu, c.alpha, c.sigma)
            worst = max(worst, abs(math.exp(sal_log_density(x, c)) - ref) / ref)
    c1 = SalComponent([0.3], [1.2], [[0.8]])
    mass1 = sum(integrate.quad(lambda t: math.exp(sal_log_density(t, c1)), a, b, epsabs=1e-12)[0]
                for a, b in ((-60, 0.3), (0.3, 120)))
    c2 = SalComponent([0.0, 0.0], [1.0, -0.5], [[1.0, 0.3], [0.3, 0.8]])
    # the 2-D density has an integrable log singularity at the shift; a fine midpoint
    # grid never samples it exactly
    h = 0.02
    xs = np.arange(-20, 40, h) + h / 2
    ys = np.arange(-25, 20, h) + h / 2
    mass2 = 0.0
    for x0 in np.array_split(xs, 30):
        gx, gy = np.meshgrid(x0, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        mass2 += float(np.exp(sal_log_density(pts, c2)).sum()) * h * h
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and abs(mass1 - 1) < 1e-3 and abs(mass2 - 1) < 1e-3 and elapsed < 120
    record("02 density", ok, f"worst rel err {worst:.1e} over 150 points (< 1e-6), "
           f"1-D mass {mass1:.6f}, 2-D mass {mass2:.6f} (1 +- 1e-3), {elapsed:.1f}s")


def test_03_em_monotone():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    bad, chol_fail, errors = 0, 0, []
    for trial in range(50):
        p = int(rng.integers(1, 4))
        g = int(rng.integers(1, 4))
        n = int(rng.integers(50, 301))
        comps = [random_component(rng, p) for _ in range(g)]
        for k, c in enumerate(comps):
            comps[k] = SalComponent(c.mu + 6.0 * k, c.alpha, c.sigma)
        ds, _ = generate_from_weights(np.full(g, 1.0 / g), comps, n, seed=trial)
        try:
            r = fit_em(ds, FitConfig(g=g, seed=trial))
        except Exception as exc:
            errors.append(f"trial {trial}: {type(exc).__name__}")
            continue
        bad += not monotone(r.log_lik_trace)
        for c in r.parameters.components:
            try:
                np.linalg.cholesky(c.sigma)
            except np.linalg.LinAlgError:
                chol_fail += 1
    elapsed = time.perf_counter() - start
    ok = bad == 0 and chol_fail == 0 and not errors and elapsed < 300
    record("03 EM monotonicity", ok, f"{50 - len(errors)} fits, {bad} non-monotone traces, "
           f"{chol_fail} Cholesky failures, errors {errors or 'none'}, {elapsed:.1f}s")


def test_04_simulation_study():
    start = time.perf_counter()
    sets = generate(paper_sim_spec(seed=7))
    picks = {"sal": [], "gaussian": []}
    for k, (ds, z) in enumerate(sets):
        for kind, fit in (("sal", fit_em), ("gaussian", fit_gmm)):
            best = None
            for g in range(1, 8):
                try:
                    r = fit(ds, FitConfig(g=g, seed=k))
                except Exception:
                    continue
                if best is None or r.score.icl > best.score.icl:
                    best = r
            picks[kind].append((best.g, rand_and_ari(z, best.map_labels)[1]))
    elapsed = time.perf_counter() - start
    sal_g2 = np.mean([g == 2 for g, _ in picks["sal"]])
    sal_ari = np.mean([a for _, a in picks["sal"]])
    gau_g3 = np.mean([g >= 3 for g, _ in picks["gaussian"]])
    gau_ari = np.mean([a for _, a in picks["gaussian"]])
    ok = sal_g2 >= 0.9 and sal_ari >= 0.95 and gau_ari <= 0.70 and gau_g3 >= 0.7 and elapsed <= 1800
    record("04 simulation study", ok,
           f"SAL G=2 in {sal_g2:.0%} (>= 90%), mean ARI {sal_ari:.4f} (>= 0.95); "
           f"Gaussian G>=3 in {gau_g3:.0%} (>= 70%), mean ARI {gau_ari:.4f} (<= 0.70); {elapsed:.0f}s")


def test_05_published_tables():
    sal = rand_and_ari_from_table([[448, 15], [14, 149]])[1]
    gmm2 = rand_and_ari_from_table([[106, 357], [1, 162]])[1]
    gmm3 = rand_and_ari_from_table([[379, 12, 72], [13, 11, 139]])[1]
    ok = abs(sal - 0.81) <= 0.01 and abs(gmm2 + 0.088) <= 0.005 and abs(gmm3 - 0.56) <= 0.01
    record("05 table ARIs", ok, f"SAL table {sal:.4f} (0.81 +- 0.01), two-column Gaussian table "
           f"{gmm2:.4f} (-0.088 +- 0.005), three-column Gaussian table {gmm3:.4f} (0.56 +- 0.01)")


def test_06_old_faithful():
    if not FAITHFUL.exists():
        ACCEPTANCE_RESULTS["06 Old Faithful"] = (True, "skipped: tests/data/faithful.csv absent")
        pytest.skip("Old Faithful data file absent")
    start = time.perf_counter()
    ds = read_csv(FAITHFUL)
    sal = fit_em(ds, FitConfig(g=2, seed=1))
    gau = fit_gmm(ds, FitConfig(g=2, seed=1))
    ari = rand_and_ari(sal.map_labels, gau.map_labels)[1]
    elapsed = time.perf_counter() - start
    finite = bool(np.all(np.isfinite(sal.log_lik_trace)))
    ok = ari == 1.0 and sal.converged and finite and elapsed < 60
    record("06 Old Faithful", ok, f"ARI(SAL, Gaussian) = {ari:.4f} (= 1), SAL converged={sal.converged} "
           f"status={sal.status}, finite trace={finite}, {elapsed:.1f}s")


def test_07_semi_supervised():
    start = time.perf_counter()
    ds, z = generate(paper_sim_spec(seed=3))[0]
    plain = DataSet(ds.rows)
    cfg = FitConfig(g=2, seed=5)
    k0 = fit_classifier(ClassificationTask(plain, [], g=2), cfg) == fit_em(plain, cfg)
    full = fit_classifier(ClassificationTask(plain, z, g=2), cfg)
    kn = bool(np.array_equal(full.map_labels, z))
    rng = np.random.default_rng(17)
    bad = 0
    for t in range(20):
        p = int(rng.integers(1, 4))
        comps = [random_component(rng, p) for _ in range(2)]
        comps[1] = SalComponent(comps[1].mu + 5.0, comps[1].alpha, comps[1].sigma)
        sim, labels = generate_from_weights([0.5, 0.5], comps, int(rng.integers(80, 200)), seed=t)
        k = int(rng.integers(10, sim.n // 2))
        rows = rng.choice(sim.n, size=k, replace=False)
        if len(set(labels[rows])) < 2:
            rows = np.concatenate([rows[:-2], [np.flatnonzero(labels == 1)[0], np.flatnonzero(labels == 2)[0]]])
            rows = np.unique(rows)
        task = ClassificationTask(DataSet(sim.rows), labels[rows], g=2, labelled_rows=rows)
        r = fit_classifier(task, FitConfig(g=2, seed=t))
        pinned = np.array_equal(r.map_labels[rows], labels[rows])
        bad += not (monotone(r.log_lik_trace) and pinned)
    elapsed = time.perf_counter() - start
    ok = k0 and kn and bad == 0 and elapsed < 120
    record("07 semi-supervised", ok, f"k=0 identical to clustering={k0}, k=n echoes labels={kn}, "
           f"{bad}/20 tasks non-monotone or unpinned, {elapsed:.1f}s")


def test_08_degeneracy():
    start = time.perf_counter()
    X = sample_sal(SalComponent([0.0], [0.5], [[1.0]]), 101, seed=0)
    init = SalMixture([1.0], [SalComponent([np.median(X) + 0.3], [0.0], [[1.0]])])
    r = fit_em(X, FitConfig(g=1), init=init)
    c = r.parameters.components[0]
    e = e_step(X, r.parameters)
    # all rows belong to the one component, so alpha* = (sum x - n mu*) / sum E[W]
    closed = (X.sum() - X.shape[0] * c.mu[0]) / e.e_w.sum()
    rel = abs(c.alpha[0] - closed) / abs(closed)
    finite = bool(np.all(np.isfinite(r.log_lik_trace)))
    elapsed = time.perf_counter() - start
    ok = r.status == "degenerate-frozen" and finite and rel < 1e-3 and elapsed < 10
    record("08 degeneracy safeguard", ok, f"status={r.status}, finite trace={finite}, "
           f"alpha* rel diff to closed form {rel:.1e}, {elapsed:.1f}s")
