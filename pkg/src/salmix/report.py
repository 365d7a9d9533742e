"""Fit results and their JSON form."""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .selection import ModelScore

SCHEMA_VERSION = 1


def _matrix(a) -> Dict[str, Any]:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return {"rows": a.shape[0], "cols": a.shape[1], "data": [float(v) for v in a.ravel()]}


def _unmatrix(d) -> np.ndarray:
    return np.array(d["data"], dtype=float).reshape(d["rows"], d["cols"])


def mixture_to_dict(model) -> Dict[str, Any]:
    from .gmm import GaussianMixture

    if isinstance(model, GaussianMixture):
        comps = [{"mu": [float(v) for v in m], "sigma": _matrix(s)}
                 for m, s in zip(model.means, model.covariances)]
        kind = "gaussian"
    else:
        comps = [{"mu": [float(v) for v in c.mu], "alpha": [float(v) for v in c.alpha],
                  "sigma": _matrix(c.sigma)} for c in model.components]
        kind = "sal"
    return {"kind": kind, "weights": [float(w) for w in model.weights], "components": comps}


def mixture_from_dict(d):
    from .gmm import GaussianMixture
    from .sal import SalComponent, SalMixture

    if d["kind"] == "gaussian":
        return GaussianMixture(
            np.array(d["weights"]),
            np.array([c["mu"] for c in d["components"]], dtype=float),
            np.array([_unmatrix(c["sigma"]) for c in d["components"]]),
        )
    comps = [SalComponent(c["mu"], c["alpha"], _unmatrix(c["sigma"])) for c in d["components"]]
    return SalMixture(np.array(d["weights"]), comps)


@dataclass(eq=False)
class FitReport:
    """Everything a single (model, G) fit produces.

    ``status`` is ``"converged"``, ``"max_iter"`` or ``"degenerate-frozen"``;
    the last one is used whenever any component shift was frozen, with the
    component numbers (1-based) in ``frozen_components``.
    """

    model_kind: str
    g: int
    parameters: Any
    log_lik_trace: List[float]
    score: ModelScore
    map_labels: np.ndarray
    responsibilities: np.ndarray
    status: str
    converged: bool
    n_iter: int
    seed: Optional[int] = None
    frozen_components: List[int] = field(default_factory=list)
    ari: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)
    known_mask: Optional[np.ndarray] = None

    @property
    def log_lik(self) -> float:
        return self.log_lik_trace[-1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "model_kind": self.model_kind,
            "g": self.g,
            "parameters": mixture_to_dict(self.parameters),
            "log_lik_trace": [float(v) for v in self.log_lik_trace],
            "score": {
                "log_lik": self.score.log_lik,
                "free_params": self.score.free_params,
                "n": self.score.n,
                "bic": self.score.bic,
                "icl": self.score.icl,
                "entropy_term": self.score.entropy_term,
            },
            "map_labels": [int(v) for v in self.map_labels],
            "responsibilities": _matrix(self.responsibilities),
            "status": self.status,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "seed": self.seed,
            "frozen_components": list(self.frozen_components),
            "ari": self.ari,
            "config": self.config,
            "known_mask": None if self.known_mask is None else [bool(v) for v in self.known_mask],
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "FitReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        km = d.get("known_mask")
        return cls(
            model_kind=d["model_kind"],
            g=d["g"],
            parameters=mixture_from_dict(d["parameters"]),
            log_lik_trace=list(d["log_lik_trace"]),
            score=ModelScore(**d["score"]),
            map_labels=np.array(d["map_labels"], dtype=int),
            responsibilities=_unmatrix(d["responsibilities"]),
            status=d["status"],
            converged=d["converged"],
            n_iter=d["n_iter"],
            seed=d["seed"],
            frozen_components=list(d["frozen_components"]),
            ari=d["ari"],
            config=d["config"],
            known_mask=None if km is None else np.array(km, dtype=bool),
        )

    def to_json(self, path=None, indent=1) -> str:
        text = json.dumps(self.to_dict(), indent=indent)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, path) -> "FitReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def __eq__(self, other):
        if not isinstance(other, FitReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()
