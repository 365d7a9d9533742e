"""
EM fitting for mixtures of shifted asymmetric Laplace distributions.

The E-step needs, for each observation and component, the responsibility and
the two moments ``E[W | x]`` and ``E[1/W | x]`` of the GIG posterior of the
latent scale. The M-step is closed form. Locations that run onto an
observation (where the likelihood is unbounded) are frozen, after which the
skewness is updated with the location held fixed.
"""

from typing import FrozenSet, Iterable, Optional

import numpy as np

from .data import DataSet
from .engine import (
    AitkenState,
    AnnealingSchedule,
    EStepQuantities,
    FitConfig,
    anneal,
    check_soft_counts,
    e_step_generic,
    median_pairwise_sq_distance,
    random_start,
    repair_covariance,
    run_em,
)
from .report import FitReport
from .sal import SalComponent, SalMixture, evaluation_terms
from .special import log_bessel_k_orders

__all__ = [
    "AitkenState",
    "AnnealingSchedule",
    "EStepQuantities",
    "FitConfig",
    "SalFamily",
    "anneal_init",
    "e_step",
    "fit_em",
    "handle_mu_degeneracy",
    "m_step",
]

_LOG_2 = np.log(2.0)
_LOG_2PI = np.log(2.0 * np.pi)

# Mahalanobis floor used only while annealing, where starting locations are observations
ANNEAL_DELTA_FLOOR = 1e-10
# below this relative size of A*B - n_g^2 the joint (mu, alpha) update is not a maximum
SKEW_DENOM_RTOL = 1e-10


class SalFamily:
    kind = "sal"

    def initial(self, X, g, rng):
        weights, means, covs = random_start(X, g, rng)
        p = X.shape[1]
        return SalMixture(weights, [SalComponent(m, np.zeros(p), s) for m, s in zip(means, covs)])

    def log_joint(self, X, model: SalMixture, annealing=False):
        # the posterior moments share the Bessel evaluations with the density
        n = X.shape[0]
        nu = (2.0 - model.p) / 2.0
        L = np.empty((n, model.g))
        e_w = np.empty((n, model.g))
        e_inv_w = np.empty((n, model.g))
        for g, (w, c) in enumerate(zip(model.weights, model.components)):
            t = evaluation_terms(X, c)
            delta = t.delta
            if annealing:
                delta = np.maximum(delta, ANNEAL_DELTA_FLOOR)
            else:
                _raise_at_shift(delta, g)
            a = 2.0 + t.quad_alpha
            lk, lk_up, lk_down = log_bessel_k_orders((nu, nu + 1.0, nu - 1.0), np.sqrt(a * delta))
            L[:, g] = (np.log(w) + _LOG_2 + t.dot_term - 0.5 * c.p * _LOG_2PI - 0.5 * c.log_det_sigma
                       + 0.5 * nu * np.log(delta / a) + lk)
            e_w[:, g] = np.sqrt(delta / a) * np.exp(lk_up - lk)
            e_inv_w[:, g] = np.sqrt(a / delta) * np.exp(lk_down - lk)
        return L, (e_w, e_inv_w)

    def expectations(self, aux, cap=None):
        e_w, e_inv_w = aux
        if cap is not None:
            e_inv_w = np.minimum(e_inv_w, cap)
        return e_w, e_inv_w

    def m_step(self, X, tau, e_w, e_inv_w, prev, frozen):
        return sal_m_step(X, tau, e_w, e_inv_w, prev=prev, frozen=frozen)

    def near_datum(self, X, model, tol, skip):
        hits = set()
        for g, c in enumerate(model.components):
            if g in skip:
                continue
            if np.min(np.sum((X - c.mu) ** 2, axis=1)) < tol:
                hits.add(g)
        return hits


def _raise_at_shift(delta, g):
    from .exceptions import AtShiftPoint
    from .sal import SHIFT_TOL

    bad = np.flatnonzero(delta < SHIFT_TOL)
    if bad.size:
        raise AtShiftPoint(f"component {g + 1}: {bad.size} observation(s) at its shift", rows=bad)


def sal_m_step(X, tau, e_w, e_inv_w, prev: Optional[SalMixture] = None,
               frozen: Iterable[int] = (), zero_skew: bool = False) -> SalMixture:
    """
    Closed-form M-step.

    With ``A = sum tau E[W]``, ``B = sum tau E[1/W]``, ``T = sum tau x`` and
    ``U = sum tau E[1/W] x`` (per component), the joint maximiser is
    ``mu = (A U - n_g T) / (A B - n_g^2)`` and ``alpha = (B T - n_g U) / (A B - n_g^2)``.
    Frozen components keep ``prev``'s location and take ``alpha = (T - n_g mu) / A``.
    ``zero_skew`` (also used when ``A B - n_g^2`` is not positive, which only
    happens under the annealing cap) sets ``alpha = 0`` and ``mu = U / B``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    frozen = set(frozen)
    n_g = tau.sum(axis=0)
    check_soft_counts(n_g, p)
    comps = []
    for g in range(tau.shape[1]):
        t = tau[:, g]
        ng = n_g[g]
        tw = t * e_w[:, g]
        tv = t * e_inv_w[:, g]
        A, B = tw.sum(), tv.sum()
        T, U = t @ X, tv @ X
        if g in frozen:
            mu = prev.components[g].mu
            alpha = (T - ng * mu) / A
        else:
            denom = A * B - ng * ng
            if zero_skew or denom <= SKEW_DENOM_RTOL * A * B:
                alpha = np.zeros(p)
                mu = U / B
            else:
                mu = (A * U - ng * T) / denom
                alpha = (B * T - ng * U) / denom
        D = X - mu
        r = (T - ng * mu) / ng
        S = (D * tv[:, None]).T @ D / ng
        sigma = S - np.outer(alpha, r) - np.outer(r, alpha) + (A / ng) * np.outer(alpha, alpha)
        comps.append(SalComponent(mu, alpha, repair_covariance(sigma)))
    return SalMixture(n_g / n_g.sum(), comps)


def _rows(data):
    return data.rows if isinstance(data, DataSet) else np.asarray(data, dtype=float)


def e_step(data, m: SalMixture, known=None) -> EStepQuantities:
    from .engine import normalize_known

    X = _rows(data)
    return e_step_generic(X, SalFamily(), m, normalize_known(known, X.shape[0], m.g))


def m_step(data, e: EStepQuantities, prev: Optional[SalMixture] = None,
           frozen: Iterable[int] = (), zero_skew: bool = False) -> SalMixture:
    return sal_m_step(_rows(data), e.tau, e.e_w, e.e_inv_w, prev=prev, frozen=frozen,
                      zero_skew=zero_skew)


def handle_mu_degeneracy(data, e: EStepQuantities, prev: SalMixture, proposed: SalMixture,
                         frozen: FrozenSet[int] = frozenset(), degeneracy_tol: float = 1e-8):
    """
    Apply the location freeze to a proposed M-step result.

    Components of ``proposed`` whose location lies within
    ``degeneracy_tol * median squared pairwise distance`` of an observation are
    frozen at ``prev``'s location and refitted. Returns ``(mixture, frozen)``;
    the input is returned unchanged when nothing triggers.
    """
    X = _rows(data)
    fam = SalFamily()
    tol = degeneracy_tol * median_pairwise_sq_distance(X)
    hit = fam.near_datum(X, proposed, tol, frozen)
    if not hit:
        return proposed, frozenset(frozen)
    frozen = frozenset(frozen) | frozenset(hit)
    return sal_m_step(X, e.tau, e.e_w, e.e_inv_w, prev=prev, frozen=frozen), frozen


def anneal_init(data, cfg: FitConfig, known=None) -> SalMixture:
    model, _ = anneal(_rows(data), SalFamily(), cfg, known)
    return model


def fit_em(data, cfg: FitConfig, init: Optional[SalMixture] = None, known=None) -> FitReport:
    """Fit a G-component SAL mixture; annealing supplies ``init`` when it is omitted."""
    X = _rows(data)
    if init is None:
        init, _ = anneal(X, SalFamily(), cfg, known)
    elif init.g != cfg.g:
        raise ValueError("init has a different number of components than cfg.g")
    return run_em(X, SalFamily(), init, cfg, known)
