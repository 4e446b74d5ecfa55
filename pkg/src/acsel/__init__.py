"""AcSel: reliability scores for variable selection under correlated predictors.

Each predictor is perturbed by a von Mises-Fisher draw fitted to its group of
correlated predictors, a base selector is rerun on the perturbed design, and
selection frequencies over many rounds tell which picks are robust.
"""

__version__ = "0.1.0"

from .core import (REAL_DATA_GRID, SweepResult, ZetaVector, acsel_run, acsel_sweep, confidence_indicators,
                   naive_acsel, select_at_threshold)
from .errors import AcselError, NumericalError, ValidationError
from .geometry import Dataset, StandardizedDesign, embed_columns, phi_forward, phi_inverse, standardize
from .grouping import GroupMap, correlation, make_groups
from .selectors import Criterion, LassoPath, Selector, fit_lasso, lasso_path, select_lasso, select_stepwise
from .baselines import stability_selection
from .vmf import VmfParams, sample_vmf

__all__ = [
    "__version__", "REAL_DATA_GRID", "SweepResult", "ZetaVector", "acsel_run", "acsel_sweep",
    "confidence_indicators", "naive_acsel", "select_at_threshold", "AcselError", "NumericalError",
    "ValidationError", "Dataset", "StandardizedDesign", "embed_columns", "phi_forward", "phi_inverse",
    "standardize", "GroupMap", "correlation", "make_groups", "Criterion", "LassoPath", "Selector",
    "fit_lasso", "lasso_path", "select_lasso", "select_stepwise", "stability_selection", "VmfParams",
    "sample_vmf",
]
