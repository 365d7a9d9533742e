"""Synthetic SAL and Gaussian mixture data, including the two-component benchmark design."""

from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from .data import DataSet
from .gmm import GaussianMixture
from .sal import SalComponent, SalMixture, sample_mixture_rows, sample_sal


@dataclass(frozen=True)
class SimulationSpec:
    mixture: Union[SalMixture, GaussianMixture]
    n: int
    datasets: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.datasets < 1:
            raise ValueError("n and datasets must be >= 1")


def paper_sim_spec(seed: int = 0) -> SimulationSpec:
    """Two well-separated skewed components in 2-D; 25 sets of 500 rows, equal weights."""
    mixture = SalMixture.from_arrays(
        [0.5, 0.5],
        mus=[[0.0, -2.0], [0.0, 5.0]],
        alphas=[[2.0, 1.0], [2.0, 2.0]],
        sigmas=[[[1.0, 0.5], [0.5, 1.0]], np.eye(2)],
    )
    return SimulationSpec(mixture, n=500, datasets=25, seed=seed)


def _samplers(mixture):
    if isinstance(mixture, SalMixture):
        return [lambda k, rng, c=c: sample_sal(c, k, rng) for c in mixture.components]
    return [
        lambda k, rng, m=m, L=L: m + rng.standard_normal((k, m.size)) @ L.T
        for m, L in zip(mixture.means, mixture._chols)
    ]


def generate(spec: SimulationSpec) -> List[Tuple[DataSet, np.ndarray]]:
    """
    One ``(DataSet, true_labels)`` pair per requested dataset.

    Dataset ``k`` uses the ``k``-th child of ``SeedSequence(spec.seed)``, so
    any single dataset can be regenerated on its own.
    """
    out = []
    p = spec.mixture.p
    names = [f"x{j + 1}" for j in range(p)]
    for child in np.random.SeedSequence(spec.seed).spawn(spec.datasets):
        rng = np.random.default_rng(child)
        X, z = sample_mixture_rows(spec.mixture.weights, _samplers(spec.mixture), spec.n, rng)
        out.append((DataSet(X, names, labels=z), z))
    return out


def generate_from_weights(weights, components, n: int, seed: int = 0):
    """Like :func:`generate` for one dataset, but ``weights`` may contain zeros."""
    rng = np.random.default_rng(seed)
    comps = [c if isinstance(c, SalComponent) else SalComponent(*c) for c in components]
    samplers = [lambda k, rng, c=c: sample_sal(c, k, rng) for c in comps]
    X, z = sample_mixture_rows(np.asarray(weights, dtype=float), samplers, n, rng)
    return DataSet(X, labels=z), z
