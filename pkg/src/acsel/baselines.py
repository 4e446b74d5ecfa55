"""Stability selection: selection frequencies over half-size observation subsamples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SubsampleTooSmall, ValidationError
from .geometry import Dataset, StandardizedDesign, standardize
from .seeding import rng_for

DEFAULT_B_SUB = 100
DEFAULT_FRAC = 0.5
DEFAULT_PI = 0.6


@dataclass(frozen=True)
class StabilityResult:
    probs: np.ndarray
    mask: np.ndarray
    counts: np.ndarray
    b_sub: int


def _restandardize(sd: StandardizedDesign, rows: np.ndarray) -> StandardizedDesign:
    # columns that are constant on the subsample become zero and cannot be selected
    return standardize(Dataset(sd.xs[rows], sd.ys[rows], sd.names), allow_constant=True)


def stability_selection(sd: StandardizedDesign, selector, b_sub: int = DEFAULT_B_SUB,
                        frac: float = DEFAULT_FRAC, pi_thr: float = DEFAULT_PI, seed=0) -> StabilityResult:
    """Fraction of subsamples (drawn without replacement) on which each variable is selected.

    Subsample b uses the stream derived from (seed, b).
    """
    if not 0.0 < frac < 1.0:
        raise ValidationError("frac must lie in (0, 1)")
    if not 0.5 < pi_thr <= 1.0:
        raise ValidationError("pi_thr must lie in (0.5, 1]")
    size = int(np.floor(frac * sd.n_obs))
    if size < 3:
        raise SubsampleTooSmall(f"subsample of {size} rows is too small (need at least 3)")
    counts = np.zeros(sd.n_vars, dtype=np.int64)
    for b in range(b_sub):
        rows = np.sort(rng_for(seed, b).choice(sd.n_obs, size=size, replace=False))
        counts += selector(_restandardize(sd, rows))
    probs = counts / b_sub
    return StabilityResult(probs, counts >= np.ceil(pi_thr * b_sub - 1e-9), counts, b_sub)
