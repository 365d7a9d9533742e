"""
Model-agnostic EM machinery shared by the SAL and Gaussian mixtures.

A *family* object supplies the density-specific parts:

- ``kind``: ``"sal"`` or ``"gaussian"``
- ``initial(X, g, rng)``: a random starting model built from :func:`random_start`
- ``log_joint(X, model, annealing=False)``: ``(L, aux)`` where ``L[i, g] = log pi_g + log f_g(x_i)``
- ``expectations(aux, cap=None)``: latent-scale moments ``(e_w, e_inv_w)`` or ``(None, None)``
- ``m_step(X, tau, e_w, e_inv_w, prev, frozen)``: the updated model
- ``near_datum(X, model, tol, skip)``: components whose location sits on an observation

Everything else (annealing, stopping, degeneracy bookkeeping, scoring) lives
here so that the two mixture types differ only in their component density.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import FrozenSet, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cholesky, eigvalsh
from scipy.spatial.distance import pdist

from . import selection
from .exceptions import (
    AtShiftPoint,
    BesselRangeError,
    CovarianceRepairFailed,
    DomainError,
    EmptyComponent,
)
from .report import FitReport

log = logging.getLogger(__name__)

CAP_V_MAX = 1.0 - 1e-10


@dataclass(frozen=True)
class AnnealingSchedule:
    v_values: Tuple[float, ...]
    restarts: int = 10

    def __post_init__(self):
        v = tuple(float(x) for x in self.v_values)
        if not v:
            raise ValueError("annealing schedule must be nonempty")
        if v[0] < 0 or v[-1] > 1 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("annealing values must increase strictly within [0, 1]")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        object.__setattr__(self, "v_values", v)

    @classmethod
    def linear(cls, steps: int = 25, restarts: int = 10) -> "AnnealingSchedule":
        return cls(tuple(np.arange(1, steps + 1) / steps), restarts)


@dataclass(frozen=True)
class FitConfig:
    g: int
    epsilon: float = 1e-5
    max_iter: int = 1000
    annealing: AnnealingSchedule = field(default_factory=AnnealingSchedule.linear)
    seed: int = 0
    degeneracy_tol: float = 1e-8
    # lower bound on the annealing cap for E[1/W]; the bare -log(1 - v) cuts off
    # typical rows at small v and the joint (mu, alpha) update then diverges
    anneal_cap_floor: float = 10.0

    def __post_init__(self):
        if self.g < 1:
            raise ValueError("g must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.degeneracy_tol > 0:
            raise ValueError("degeneracy_tol must be > 0")
        if not self.anneal_cap_floor >= 0:
            raise ValueError("anneal_cap_floor must be >= 0")

    def echo(self) -> dict:
        d = asdict(self)
        d["annealing"] = {"v_values": list(self.annealing.v_values), "restarts": self.annealing.restarts}
        return d


@dataclass(frozen=True)
class EStepQuantities:
    """Responsibilities and latent-scale moments; the moments are ``None`` for Gaussian mixtures."""

    tau: np.ndarray
    e_w: Optional[np.ndarray]
    e_inv_w: Optional[np.ndarray]
    log_lik: float


@dataclass(frozen=True)
class AitkenState:
    l_prev2: float = np.nan
    l_prev: float = np.nan
    l_curr: float = np.nan

    def push(self, value: float) -> "AitkenState":
        return AitkenState(self.l_prev, self.l_curr, float(value))

    @property
    def ready(self) -> bool:
        return not np.isnan(self.l_prev2)

    @property
    def a_k(self) -> float:
        den = self.l_prev - self.l_prev2
        return (self.l_curr - self.l_prev) / den if den != 0 else np.nan

    @property
    def l_inf(self) -> float:
        a = self.a_k
        if not a < 1:
            return np.nan
        return self.l_prev + (self.l_curr - self.l_prev) / (1.0 - a)

    def converged(self, epsilon: float) -> bool:
        """Lindsay's variant ``l_inf - l_prev < epsilon`` when ``0 < a_k < 1``, else ``|l_curr - l_prev| < epsilon``."""
        if not self.ready:
            return False
        a = self.a_k
        if 0 < a < 1:
            return self.l_inf - self.l_prev < epsilon
        return abs(self.l_curr - self.l_prev) < epsilon


def random_start(X: np.ndarray, g: int, rng: np.random.Generator):
    """Dirichlet(1) weights, ``g`` distinct observations as locations, diagonal sample covariance."""
    n, p = X.shape
    if g > n:
        raise ValueError("more components than observations")
    weights = rng.dirichlet(np.ones(g))
    means = X[rng.choice(n, size=g, replace=False)].copy()
    var = X.var(axis=0, ddof=1) if n > 1 else np.ones(p)
    var = np.where(var > 0, var, 1.0)
    return weights, means, np.repeat(np.diag(var)[None], g, axis=0)


def repair_covariance(sigma: np.ndarray) -> np.ndarray:
    """Symmetrise; if not positive definite add ``(|lambda_min| + 1e-8 trace/p) I`` once."""
    sigma = 0.5 * (sigma + sigma.T)
    p = sigma.shape[0]
    if not np.all(np.isfinite(sigma)):
        raise CovarianceRepairFailed("covariance update is not finite")
    lam_min = eigvalsh(sigma)[0]
    needs = lam_min <= 0
    if not needs:
        try:
            cholesky(sigma, lower=True)
        except np.linalg.LinAlgError:
            needs = True
    if needs:
        trace = float(np.trace(sigma))
        if not trace > 0:
            raise CovarianceRepairFailed("covariance has nonpositive trace")
        sigma = sigma + (abs(lam_min) + 1e-8 * trace / p) * np.eye(p)
        try:
            cholesky(sigma, lower=True)
        except np.linalg.LinAlgError as exc:
            raise CovarianceRepairFailed("ridge repair did not restore positive definiteness") from exc
    return sigma


def check_soft_counts(n_g: np.ndarray, p: int) -> None:
    floor = max(p + 1, 2)
    for g, c in enumerate(n_g):
        if not c >= floor:
            raise EmptyComponent(
                f"component {g + 1} has soft count {c:.3g} below the floor {floor}", g + 1, float(c)
            )


def median_pairwise_sq_distance(X: np.ndarray, max_rows: int = 2000) -> float:
    if X.shape[0] > max_rows:
        # fixed stride keeps this deterministic
        X = X[np.linspace(0, X.shape[0] - 1, max_rows).astype(int)]
    d = pdist(X, "sqeuclidean")
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


def logsumexp(a, axis=1):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def normalize_known(known, n: int, h: int) -> np.ndarray:
    """Per-row 0-based component index for labelled rows, -1 elsewhere."""
    if known is None:
        return np.full(n, -1, dtype=int)
    known = np.asarray(known, dtype=int)
    if known.shape != (n,) or np.any(known >= h) or np.any(known < -1):
        raise ValueError("known component indices out of range")
    return known


def responsibilities(L: np.ndarray, known: np.ndarray, v: float = 1.0):
    """
    Tempered responsibilities and the (joint) log-likelihood.

    Unlabelled rows get ``softmax(v * L)``; labelled rows are one-hot at their
    component. The log-likelihood is always the untempered one: log-sum-exp
    for unlabelled rows plus ``L[i, known_i]`` for labelled rows.
    """
    free = known < 0
    lse = logsumexp(L, axis=1)
    if v == 1.0:
        tau = np.exp(L - lse[:, None])
    else:
        vl = v * L
        tau = np.exp(vl - logsumexp(vl, axis=1)[:, None])
    idx = np.flatnonzero(~free)
    if idx.size:
        tau[idx] = 0.0
        tau[idx, known[idx]] = 1.0
    ll = float(lse[free].sum() + L[idx, known[idx]].sum())
    return tau, ll


def e_step_generic(X, family, model, known, v=1.0, annealing=False, cap=None) -> EStepQuantities:
    L, aux = family.log_joint(X, model, annealing=annealing)
    tau, ll = responsibilities(L, known, v)
    e_w, e_inv_w = family.expectations(aux, cap=cap)
    return EStepQuantities(tau, e_w, e_inv_w, ll)


def run_em(X, family, init, cfg: FitConfig, known=None) -> FitReport:
    """
    Iterate E- and M-steps from ``init`` until the Aitken rule fires or ``cfg.max_iter`` E-steps.

    The returned parameters are always the ones whose E-step produced the
    final trace entry, so responsibilities and likelihood are consistent.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    known = normalize_known(known, n, init.g)
    tol = cfg.degeneracy_tol * median_pairwise_sq_distance(X)
    model = init
    frozen: FrozenSet[int] = frozenset(family.near_datum(X, model, tol, frozenset()))
    trace = []
    aitken = AitkenState()
    converged = False
    e = None
    for it in range(cfg.max_iter):
        e = e_step_generic(X, family, model, known)
        trace.append(e.log_lik)
        aitken = aitken.push(e.log_lik)
        if aitken.converged(cfg.epsilon):
            converged = True
            break
        if it == cfg.max_iter - 1:
            break
        new = family.m_step(X, e.tau, e.e_w, e.e_inv_w, model, frozen)
        hit = family.near_datum(X, new, tol, frozen)
        if hit:
            log.info("freezing location of component(s) %s at iteration %d",
                     sorted(h + 1 for h in hit), it + 1)
            frozen = frozen | frozenset(hit)
            new = family.m_step(X, e.tau, e.e_w, e.e_inv_w, model, frozen)
        model = new
    return build_report(family, model, X, e, trace, converged, frozen, cfg, known)


def build_report(family, model, X, e, trace, converged, frozen, cfg, known) -> FitReport:
    n, p = X.shape
    mask = known >= 0
    score = selection.icl(
        trace[-1], selection.count_free_params(family.kind, model.g, p), n, e.tau,
        mask if mask.any() else None,
    )
    if frozen:
        status = "degenerate-frozen"
    else:
        status = "converged" if converged else "max_iter"
    return FitReport(
        model_kind=family.kind,
        g=model.g,
        parameters=model,
        log_lik_trace=[float(v) for v in trace],
        score=score,
        map_labels=selection.map_labels(e.tau),
        responsibilities=e.tau,
        status=status,
        converged=converged,
        n_iter=len(trace),
        seed=cfg.seed,
        frozen_components=sorted(g + 1 for g in frozen),
        config=cfg.echo(),
        known_mask=mask if mask.any() else None,
    )


# failures that discard a single annealing restart
RESTART_ERRORS = (
    EmptyComponent,
    CovarianceRepairFailed,
    AtShiftPoint,
    BesselRangeError,
    DomainError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


def annealing_cap(v: float, floor: float = 0.0) -> float:
    """Cap on ``E[1/W]`` at annealing level ``v``: ``max(-log(1 - v), floor)``, ``v`` clamped below 1."""
    return max(-np.log1p(-min(v, CAP_V_MAX)), floor)


def anneal_once(X, family, g, schedule: AnnealingSchedule, rng, known, cap_floor=0.0):
    """One deterministic-annealing pass; returns ``(model, observed log-likelihood)``."""
    model = family.initial(X, g, rng)
    for v in schedule.v_values:
        cap = annealing_cap(v, cap_floor)
        e = e_step_generic(X, family, model, known, v=v, annealing=True, cap=cap)
        model = family.m_step(X, e.tau, e.e_w, e.e_inv_w, model, frozenset())
    L, _ = family.log_joint(X, model)
    _, ll = responsibilities(L, known)
    if not np.isfinite(ll):
        raise FloatingPointError("non-finite log-likelihood after annealing")
    return model, ll


def anneal(X, family, cfg: FitConfig, known=None):
    """
    Run ``cfg.annealing.restarts`` independent annealing passes and keep the best.

    Restart ``r`` draws from the ``r``-th child of ``SeedSequence(cfg.seed)``.
    Raises the last restart error if every restart failed.
    """
    X = np.asarray(X, dtype=float)
    known = normalize_known(known, X.shape[0], cfg.g)
    best, best_ll, last_err = None, -np.inf, None
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.annealing.restarts)
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                model, ll = anneal_once(X, family, cfg.g, cfg.annealing, rng, known,
                                        cfg.anneal_cap_floor)
        except RESTART_ERRORS as exc:
            log.info("annealing restart %d discarded: %s", r + 1, exc)
            last_err = exc
            continue
        if ll > best_ll:
            best, best_ll = model, ll
    if best is None:
        raise last_err
    return best, best_ll
