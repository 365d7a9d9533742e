"""
Model-based classification with partially labelled data.

Labelled rows are pinned to their class component for the whole fit, while
unlabelled rows receive ordinary responsibilities over all ``H >= G``
components. The likelihood being maximised is the joint one: labelled rows
contribute ``log pi_c + log f_c(x)`` for their class ``c`` and unlabelled rows
contribute the mixture log-density.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .data import DataSet
from .em import SalFamily
from .engine import FitConfig, anneal, run_em
from .exceptions import MissingClassExamples
from .gmm import GaussianFamily, anneal_init_gmm
from .report import FitReport

ENGINES = {"sal": SalFamily, "gaussian": GaussianFamily}


@dataclass(frozen=True, eq=False)
class ClassificationTask:
    """
    A data set plus known class labels.

    Parameters
    ----------
    data : DataSet
    known_labels : sequence of int
        Class labels in ``1..g``. By default they belong to the first
        ``len(known_labels)`` rows; pass ``labelled_rows`` to place them elsewhere.
    g : int
        Number of classes.
    h : int, optional
        Number of mixture components, ``h >= g``. Components ``g+1..h`` are
        only available to unlabelled rows. Defaults to ``g``.
    labelled_rows : sequence of int, optional
        0-based row indices matching ``known_labels``.
    """

    data: DataSet
    known_labels: Sequence[int]
    g: int
    h: Optional[int] = None
    labelled_rows: Optional[Sequence[int]] = None

    def __post_init__(self):
        labels = np.asarray(self.known_labels, dtype=int).reshape(-1)
        k = labels.size
        h = self.g if self.h is None else int(self.h)
        if self.g < 1 or h < self.g:
            raise ValueError("need g >= 1 and h >= g")
        if k > self.data.n:
            raise ValueError("more known labels than rows")
        if k and (labels.min() < 1 or labels.max() > self.g):
            raise ValueError(f"known labels must lie in 1..{self.g}")
        if self.labelled_rows is None:
            rows = np.arange(k)
        else:
            rows = np.asarray(self.labelled_rows, dtype=int).reshape(-1)
            if rows.shape != (k,) or len(set(rows.tolist())) != k:
                raise ValueError("labelled_rows must list k distinct rows")
            if k and (rows.min() < 0 or rows.max() >= self.data.n):
                raise ValueError("labelled_rows out of range")
        object.__setattr__(self, "known_labels", labels)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "labelled_rows", rows)

    @property
    def k(self) -> int:
        return self.known_labels.size

    @classmethod
    def from_dataset(cls, data: DataSet, g: Optional[int] = None, h: Optional[int] = None,
                     classes: Optional[Sequence] = None) -> "ClassificationTask":
        """Build a task from ``data.labels`` restricted to ``data.known_mask``.

        Classes are numbered in the order of ``classes`` (default: sorted
        distinct labels of the known rows).
        """
        if data.labels is None or data.known_mask is None:
            raise ValueError("data set has no labels or no known mask")
        rows = np.flatnonzero(data.known_mask)
        known = data.labels[rows]
        if classes is None:
            classes = sorted(set(known.tolist()))
        index = {c: i + 1 for i, c in enumerate(classes)}
        try:
            codes = [index[c] for c in known.tolist()]
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} is not among the classes") from None
        return cls(data, codes, len(classes) if g is None else g, h, rows)

    def known_vector(self) -> np.ndarray:
        """Per-row 0-based class index, -1 for unlabelled rows."""
        known = np.full(self.data.n, -1, dtype=int)
        known[self.labelled_rows] = self.known_labels - 1
        return known


def fit_classifier(task: ClassificationTask, cfg: FitConfig, engine: str = "sal",
                   init=None) -> FitReport:
    """
    Fit a ``task.h``-component mixture with the labelled rows pinned.

    ``cfg.g`` is overridden by ``task.h``. With no labelled rows this is the
    unsupervised fit with the same seed. Raises :class:`MissingClassExamples`
    when labels are given but some class in ``1..g`` has none.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {sorted(ENGINES)}")
    if task.k:
        missing = sorted(set(range(1, task.g + 1)) - set(task.known_labels.tolist()))
        if missing:
            raise MissingClassExamples(f"no labelled rows for class(es) {missing}")
    family = ENGINES[engine]()
    cfg = replace(cfg, g=task.h)
    X = task.data.rows
    known = task.known_vector()
    if init is None and engine == "gaussian":
        init = anneal_init_gmm(X, cfg, known)
    elif init is None:
        init, _ = anneal(X, family, cfg, known)
    elif init.g != task.h:
        raise ValueError("init must have h components")
    return run_em(X, family, init, cfg, known)
