"""Multilevel thresholding of gray-level images by fitting a Gaussian mixture to
the histogram with a team of continuous-action learning automata, plus EM and
Levenberg-Marquardt baselines."""

from ._backend import NAME as KERNEL_BACKEND
from .baselines import EmConfig, LmConfig, fit_em, fit_lm
from .carla import (
    ActionBounds,
    Automaton,
    DensityTable,
    DiscreteAutomaton,
    ReferenceWindow,
    compute_beta,
    discrete_lri_update,
    init_uniform,
    neighborhood,
    push_cost,
    select_action,
    update_density,
)
from .gmm import CostConfig, GaussianComponent, Mixture, classify, cost_j, mixture_pdf, thresholds
from .histogram import NormalizedHistogram, compute_histogram, synth_histogram
from .imageio import GrayImage, PgmError, read_pgm, render_segmentation, write_pgm
from .segmenter import FitReport, LaConfig, action_to_mixture, fit_la

__version__ = "0.1.0"
