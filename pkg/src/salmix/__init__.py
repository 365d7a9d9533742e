"""Mixtures of shifted asymmetric Laplace distributions for clustering and classification."""

from .data import DataSet, read_csv, write_csv
from .em import e_step, fit_em, m_step
from .engine import AnnealingSchedule, EStepQuantities, FitConfig
from .exceptions import (
    AtShiftPoint,
    BesselRangeError,
    CovarianceRepairFailed,
    CsvFormatError,
    DomainError,
    EmptyComponent,
    MissingClassExamples,
    UnsupportedDimension,
)
from .gmm import GaussianMixture, fit_gmm
from .report import FitReport
from .sal import SalComponent, SalMixture, sal_log_density, sal_mixture_log_density, sample_sal
from .selection import ModelScore, bic, icl, map_labels, rand_and_ari
from .semi import ClassificationTask, fit_classifier
from .simulate import SimulationSpec, generate, paper_sim_spec
from .special import gig_expectations, log_bessel_k

__version__ = "0.1.0"
