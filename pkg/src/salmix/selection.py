"""Model selection criteria, MAP labelling and partition agreement."""

from dataclasses import dataclass

import numpy as np
from scipy.special import comb


@dataclass(frozen=True)
class ModelScore:
    log_lik: float
    free_params: int
    n: int
    bic: float
    icl: float
    entropy_term: float


def count_free_params(model_kind: str, g: int, p: int) -> int:
    """Weights, locations, (skewness,) covariances."""
    base = (g - 1) + g * p + g * p * (p + 1) // 2
    if model_kind == "sal":
        return base + g * p
    if model_kind == "gaussian":
        return base
    raise ValueError(f"unknown model kind {model_kind!r}")


def bic(log_lik: float, free_params: int, n: int) -> float:
    return 2.0 * log_lik - free_params * np.log(n)


def map_labels(tau) -> np.ndarray:
    """1-based argmax per row; the lowest index wins exact ties."""
    return np.argmax(np.asarray(tau), axis=1) + 1


def icl(log_lik: float, free_params: int, n: int, tau, known_mask=None) -> ModelScore:
    """
    BIC plus the sum over unlabelled rows of ``log`` of the MAP responsibility.

    ``known_mask`` flags labelled rows, which are left out of the entropy term.
    """
    tau = np.asarray(tau, dtype=float)
    rows = np.arange(tau.shape[0])
    if known_mask is not None:
        rows = rows[~np.asarray(known_mask, dtype=bool)]
    best = tau[rows, map_labels(tau[rows]) - 1] if rows.size else np.empty(0)
    entropy = float(np.sum(np.log(best)))
    b = bic(log_lik, free_params, n)
    return ModelScore(float(log_lik), int(free_params), int(n), float(b), float(b + entropy), entropy)


def contingency_table(labels_a, labels_b) -> np.ndarray:
    _, a = np.unique(np.asarray(labels_a), return_inverse=True)
    _, b = np.unique(np.asarray(labels_b), return_inverse=True)
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def rand_and_ari(labels_a, labels_b):
    """
    Rand index and Hubert-Arabie adjusted Rand index from pair counts.

    Returns
    -------
    (float, float)
        ``(rand, ari)``. Two single-block partitions give ``ari = 1``.
    """
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape or labels_a.ndim != 1 or labels_a.size < 2:
        raise ValueError("need two partitions of the same n >= 2 items")
    return rand_and_ari_from_table(contingency_table(labels_a, labels_b))


def rand_and_ari_from_table(table):
    table = np.asarray(table, dtype=np.int64)
    n = int(table.sum())
    total = comb(n, 2, exact=True)
    both = sum(comb(int(v), 2, exact=True) for v in table.ravel())
    rows = sum(comb(int(v), 2, exact=True) for v in table.sum(axis=1))
    cols = sum(comb(int(v), 2, exact=True) for v in table.sum(axis=0))
    # agreements: together in both, plus apart in both
    rand = (total + 2 * both - rows - cols) / total
    expected = rows * cols / total
    max_index = 0.5 * (rows + cols)
    if max_index == expected:
        return float(rand), 1.0
    return float(rand), float((both - expected) / (max_index - expected))
