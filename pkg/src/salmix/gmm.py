"""Gaussian mixture baseline fitted with the same annealing and stopping machinery."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .data import DataSet
from .engine import (
    FitConfig,
    anneal,
    check_soft_counts,
    normalize_known,
    random_start,
    repair_covariance,
    responsibilities,
    run_em,
)
from .report import FitReport

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        mu = np.atleast_2d(np.asarray(self.means, dtype=float)).copy()
        cov = np.asarray(self.covariances, dtype=float).copy()
        if cov.ndim == 2:
            cov = cov[None]
        g, p = mu.shape
        if w.shape != (g,) or cov.shape != (g, p, p):
            raise ValueError("inconsistent Gaussian mixture shapes")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be strictly positive and sum to 1")
        chols = np.array([cholesky(s, lower=True) for s in cov])
        for name, value in (("weights", w), ("means", mu), ("covariances", cov)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "_chols", chols)

    @property
    def g(self) -> int:
        return self.means.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]

    def component_log_densities(self, X) -> np.ndarray:
        """``n x G`` matrix of ``log pi_g + log phi(x_i | mu_g, Sigma_g)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p and X.shape[0] == self.p and X.shape[1] == 1:
            X = X.T
        out = np.empty((X.shape[0], self.g))
        for g in range(self.g):
            L = self._chols[g]
            z = solve_triangular(L, (X - self.means[g]).T, lower=True)
            out[:, g] = (np.log(self.weights[g]) - 0.5 * self.p * _LOG_2PI
                         - np.sum(np.log(np.diag(L))) - 0.5 * np.einsum("ij,ij->j", z, z))
        return out


class GaussianFamily:
    kind = "gaussian"

    def initial(self, X, g, rng):
        return GaussianMixture(*random_start(X, g, rng))

    def log_joint(self, X, model, annealing=False):
        return model.component_log_densities(X), None

    def expectations(self, aux, cap=None):
        return None, None

    def m_step(self, X, tau, e_w, e_inv_w, prev, frozen):
        return gaussian_m_step(X, tau)

    def near_datum(self, X, model, tol, skip):
        return set()


def gaussian_m_step(X, tau) -> GaussianMixture:
    """Weighted proportions, means and covariances."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    n_g = tau.sum(axis=0)
    check_soft_counts(n_g, p)
    means = (tau.T @ X) / n_g[:, None]
    covs = []
    for g in range(tau.shape[1]):
        D = X - means[g]
        covs.append(repair_covariance((D * tau[:, g, None]).T @ D / n_g[g]))
    return GaussianMixture(n_g / n_g.sum(), means, np.array(covs))


def _rows(data):
    return data.rows if isinstance(data, DataSet) else np.asarray(data, dtype=float)


def fit_gmm(data, cfg: FitConfig, init: Optional[GaussianMixture] = None, known=None,
            start: str = "sal") -> FitReport:
    """
    Fit a G-component Gaussian mixture.

    Without ``init`` the starting values come from :func:`anneal_init_gmm`;
    ``start`` selects which annealing run supplies them.
    """
    X = _rows(data)
    if init is None:
        init = anneal_init_gmm(X, cfg, known, start)
    elif init.g != cfg.g:
        raise ValueError("init has a different number of components than cfg.g")
    return run_em(X, GaussianFamily(), init, cfg, known)


def anneal_init_gmm(data, cfg: FitConfig, known=None, start: str = "sal") -> GaussianMixture:
    """
    Annealed starting values for a Gaussian mixture.

    ``start="sal"`` (default) runs the SAL annealing with the same
    configuration and converts its responsibilities with one Gaussian M-step,
    so both mixture types start from the same partition. ``start="gaussian"``
    tempers the Gaussian density itself; with full covariances its components
    tend to merge at small ``v`` and often stay merged.
    """
    from .em import SalFamily

    X = _rows(data)
    if start == "gaussian":
        model, _ = anneal(X, GaussianFamily(), cfg, known)
        return model
    if start != "sal":
        raise ValueError(f"unknown start {start!r}; expected 'sal' or 'gaussian'")
    known = normalize_known(known, X.shape[0], cfg.g)
    sal, _ = anneal(X, SalFamily(), cfg, known)
    L, _ = SalFamily().log_joint(X, sal, annealing=True)
    tau, _ = responsibilities(L, known)
    return gaussian_m_step(X, tau)
