r"""
Shifted asymmetric Laplace (SAL) distribution and SAL mixtures.

A SAL vector can be written as ``X = mu + W alpha + sqrt(W) Y`` with
``W ~ Exp(1)`` and ``Y ~ N(0, Sigma)``, so ``X | W=w ~ N(mu + w alpha, w Sigma)``.
Its density is

.. math::
    \xi(x) = \frac{2 \exp\{(x-\mu)'\Sigma^{-1}\alpha\}}{(2\pi)^{p/2}|\Sigma|^{1/2}}
             \left(\frac{\delta}{2 + \alpha'\Sigma^{-1}\alpha}\right)^{\nu/2} K_\nu(u)

with ``delta = (x-mu)' Sigma^{-1} (x-mu)``, ``u = sqrt((2 + alpha' Sigma^{-1} alpha) delta)``
and ``nu = (2 - p) / 2``.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import cholesky, solve_triangular
from scipy.special import logsumexp

from .exceptions import AtShiftPoint
from .special import GigParams, log_bessel_k

SHIFT_TOL = 1e-300
_LOG_2PI = np.log(2.0 * np.pi)


def _as_matrix(x: ArrayLike, p: int) -> NDArray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    if x.ndim == 1:
        x = x.reshape(1, -1) if x.size == p else x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] != p:
        raise ValueError(f"expected observations of dimension {p}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class SalComponent:
    """One SAL component ``(mu, alpha, sigma)`` with cached Cholesky factor, inverse and log-determinant."""

    mu: NDArray
    alpha: NDArray
    sigma: NDArray
    sigma_chol: NDArray = field(init=False, repr=False)
    sigma_inv: NDArray = field(init=False, repr=False)
    log_det_sigma: float = field(init=False, repr=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).copy()
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float)).copy()
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float)).copy()
        p = mu.size
        if alpha.shape != (p,) or sigma.shape != (p, p):
            raise ValueError("mu, alpha and sigma dimensions disagree")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
            raise ValueError("sigma must be symmetric")
        try:
            chol = cholesky(sigma, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ValueError("sigma must be positive definite") from exc
        inv = solve_triangular(chol, np.eye(p), lower=True)
        for name, value in (("mu", mu), ("alpha", alpha), ("sigma", sigma)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "sigma_chol", chol)
        object.__setattr__(self, "sigma_inv", inv.T @ inv)
        object.__setattr__(self, "log_det_sigma", 2.0 * float(np.sum(np.log(np.diag(chol)))))

    @property
    def p(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class EvaluationTerms:
    """Quadratic forms entering the SAL density, one entry per observation."""

    delta: NDArray
    quad_alpha: float
    dot_term: NDArray
    nu: float

    @property
    def u(self) -> NDArray:
        return np.sqrt((2.0 + self.quad_alpha) * self.delta)


def evaluation_terms(x: ArrayLike, c: SalComponent) -> EvaluationTerms:
    X = _as_matrix(x, c.p)
    z = solve_triangular(c.sigma_chol, (X - c.mu).T, lower=True)
    w = solve_triangular(c.sigma_chol, c.alpha, lower=True)
    return EvaluationTerms(
        delta=np.einsum("ij,ij->j", z, z),
        quad_alpha=float(w @ w),
        dot_term=z.T @ w,
        nu=(2.0 - c.p) / 2.0,
    )


def _log_density_from_terms(t: EvaluationTerms, c: SalComponent, delta: NDArray) -> NDArray:
    a = 2.0 + t.quad_alpha
    return (
        np.log(2.0)
        + t.dot_term
        - 0.5 * c.p * _LOG_2PI
        - 0.5 * c.log_det_sigma
        + 0.5 * t.nu * np.log(delta / a)
        + log_bessel_k(t.nu, np.sqrt(a * delta))
    )


def sal_log_density(x: ArrayLike, c: SalComponent, delta_floor: Optional[float] = None):
    """
    Log SAL density at one observation (1-D ``x``) or at each row of ``x``.

    Raises :class:`AtShiftPoint` when an observation sits on the shift ``mu``
    (``delta < 1e-300``) unless ``delta_floor`` is given, in which case
    ``delta`` is clamped from below to that value instead.
    """
    single = np.ndim(x) == 1 and np.size(x) == c.p or np.ndim(x) == 0
    t = evaluation_terms(x, c)
    delta = t.delta
    if delta_floor is not None:
        delta = np.maximum(delta, delta_floor)
    else:
        bad = np.flatnonzero(delta < SHIFT_TOL)
        if bad.size:
            raise AtShiftPoint(f"{bad.size} observation(s) at the component shift", rows=bad)
    out = _log_density_from_terms(t, c, delta)
    return float(out[0]) if single else out


def posterior_w_params(x: ArrayLike, c: SalComponent) -> GigParams:
    """GIG parameters of ``W | X = x``: ``a = 2 + alpha' Sigma^-1 alpha``, ``b = delta``, ``nu = (2-p)/2``."""
    t = evaluation_terms(x, c)
    if t.delta.size != 1:
        raise ValueError("posterior_w_params takes a single observation")
    b = float(t.delta[0])
    if b < SHIFT_TOL:
        raise AtShiftPoint("observation at the component shift", rows=np.array([0]))
    return GigParams(2.0 + t.quad_alpha, b, t.nu)


def sample_sal(c: SalComponent, n: int, seed=None) -> NDArray:
    """
    Draw ``n`` rows ``mu + W alpha + sqrt(W) Y``.

    The generator stream is consumed in a fixed order: ``n`` uniforms for the
    exponential scales (inverse CDF), then ``n * p`` standard normals.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    w = -np.log1p(-rng.random(n))
    y = rng.standard_normal((n, c.p)) @ c.sigma_chol.T
    return c.mu + w[:, None] * c.alpha + np.sqrt(w)[:, None] * y


@dataclass(frozen=True, eq=False)
class SalMixture:
    weights: NDArray
    components: List[SalComponent]

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).copy()
        comps = list(self.components)
        if weights.ndim != 1 or weights.size != len(comps) or not comps:
            raise ValueError("need one weight per component")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be strictly positive and sum to 1")
        if len({c.p for c in comps}) != 1:
            raise ValueError("components must share the same dimension")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", comps)

    @property
    def g(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0].p

    @classmethod
    def from_arrays(cls, weights, mus, alphas, sigmas) -> "SalMixture":
        comps = [SalComponent(m, a, s) for m, a, s in zip(mus, alphas, sigmas)]
        return cls(np.asarray(weights, dtype=float), comps)


def component_log_densities(x: ArrayLike, m: SalMixture, delta_floor=None) -> NDArray:
    """``n x G`` matrix of ``log pi_g + log xi_g(x_i)``."""
    X = _as_matrix(x, m.p)
    cols = [np.log(w) + sal_log_density(X, c, delta_floor=delta_floor)
            for w, c in zip(m.weights, m.components)]
    return np.column_stack(cols)


def sal_mixture_log_density(x: ArrayLike, m: SalMixture, delta_floor=None):
    """Log density of a SAL mixture, via log-sum-exp over components."""
    single = np.ndim(x) == 1 and np.size(x) == m.p or np.ndim(x) == 0
    out = logsumexp(component_log_densities(x, m, delta_floor), axis=1)
    return float(out[0]) if single else out


def sample_mixture_rows(weights: Sequence[float], samplers, n: int, rng: np.random.Generator):
    """Multinomial component counts, rows from each sampler, then a joint shuffle."""
    counts = rng.multinomial(n, np.asarray(weights, dtype=float))
    blocks, labels = [], []
    for g, (k, draw) in enumerate(zip(counts, samplers)):
        if k:
            blocks.append(draw(k, rng))
            labels.append(np.full(k, g + 1))
    X = np.vstack(blocks)
    z = np.concatenate(labels)
    order = rng.permutation(n)
    return X[order], z[order]
