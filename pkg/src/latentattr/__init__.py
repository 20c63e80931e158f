"""Integrated-Jacobian attribution and feature heat maps for latent states of time-series models."""

from ._backend import BACKEND
from .attribution import (
    ImpactMatrix,
    PairAttribution,
    PointwiseModel,
    impact_measure,
    integrated_jacobian,
    integrated_jacobian_ncde,
    pair_rows,
    projected_jacobian,
)
from .features import augment, fill_missing, fit_minmax, minmax_shift
from .heatmap import (
    HeatMap,
    SelectionParams,
    balanced_subset,
    generate_heatmap,
    generate_heatmaps,
    merge_heatmaps,
    top_dissimilar_samples,
    top_impactful_features,
)
from .latent_rank import ReadoutSpec, explanation_chain, linear_readout_attribution, permutation_importance
from .model import MlpSpec, jacobian_fd, mlp_forward, mlp_jacobian
from .ncde import NcdeModel, VectorFieldSpec, eval_path, fit_natural_cubic, ncde_state_jacobian, solve_cde
from .samples import Dataset, TimeSeriesSample

__version__ = "0.1.0"
