from irtcoresets.experiment import ExperimentConfig
from irtcoresets.experiment import compare_methods
from irtcoresets.experiment import run_experiment
from irtcoresets.io import read_parameters
from irtcoresets.io import read_responses
from irtcoresets.io import write_parameters
from irtcoresets.io import write_responses
from irtcoresets.leverage import leverage_l1
from irtcoresets.leverage import leverage_l2
from irtcoresets.leverage import leverage_l2_sketched
from irtcoresets.leverage import lewis_weights_l1
from irtcoresets.metrics import FitReport
from irtcoresets.metrics import gain
from irtcoresets.metrics import metrics
from irtcoresets.model import AbilityParameters
from irtcoresets.model import ItemParameters
from irtcoresets.model import LossKind
from irtcoresets.model import ModelKind
from irtcoresets.model import ResponseMatrix
from irtcoresets.model import SignedDesign
from irtcoresets.model import build_signed_design
from irtcoresets.model import conditional_nll
from irtcoresets.model import full_nll
from irtcoresets.model import icc_probability
from irtcoresets.model import pointwise_loss
from irtcoresets.mu import mu_estimate
from irtcoresets.mu import mu_exact_2d
from irtcoresets.mu import mu_heuristic
from irtcoresets.mu import mu_table
from irtcoresets.mu import sigma1_min_2d
from irtcoresets.samplers.coreset import CoresetOptions
from irtcoresets.samplers.coreset import build_coreset
from irtcoresets.samplers.coreset import coreset_deviation
from irtcoresets.samplers.coreset import eta_grid
from irtcoresets.samplers.coreset import quality_bound
from irtcoresets.samplers.coreset import scores_2pl
from irtcoresets.samplers.coreset import scores_3pl
from irtcoresets.samplers.distance import distance_sampling_coreset
from irtcoresets.samplers.scores import BaselineKind
from irtcoresets.samplers.scores import score_based_coreset
from irtcoresets.samplers.uniform import uniform_coreset
from irtcoresets.samplers.weighted import WeightedCoreset
from irtcoresets.samplers.weighted import sample_weighted
from irtcoresets.solver import Bounds
from irtcoresets.solver import CoresetContext
from irtcoresets.solver import CoresetSchedule
from irtcoresets.solver import FitConfig
from irtcoresets.solver import alternate_fit
from irtcoresets.solver import conditional_gradient
from irtcoresets.solver import fit_conditional
from irtcoresets.solver import standardize
from irtcoresets.synth import GenConfig
from irtcoresets.synth import generate_synthetic

__all__ = (
    "ResponseMatrix",
    "ItemParameters",
    "AbilityParameters",
    "ModelKind",
    "LossKind",
    "SignedDesign",
    "build_signed_design",
    "icc_probability",
    "pointwise_loss",
    "conditional_nll",
    "full_nll",
    "Bounds",
    "FitConfig",
    "CoresetContext",
    "CoresetSchedule",
    "conditional_gradient",
    "fit_conditional",
    "alternate_fit",
    "standardize",
    "leverage_l2",
    "leverage_l2_sketched",
    "leverage_l1",
    "lewis_weights_l1",
    "mu_exact_2d",
    "mu_heuristic",
    "mu_estimate",
    "mu_table",
    "sigma1_min_2d",
    "WeightedCoreset",
    "sample_weighted",
    "CoresetOptions",
    "scores_2pl",
    "scores_3pl",
    "build_coreset",
    "coreset_deviation",
    "quality_bound",
    "eta_grid",
    "BaselineKind",
    "uniform_coreset",
    "distance_sampling_coreset",
    "score_based_coreset",
    "GenConfig",
    "generate_synthetic",
    "read_responses",
    "write_responses",
    "read_parameters",
    "write_parameters",
    "FitReport",
    "metrics",
    "gain",
    "ExperimentConfig",
    "run_experiment",
    "compare_methods",
)
