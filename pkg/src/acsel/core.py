"""The AcSel resampling loop, the c0 sweep, confidence indicators, and naive AcSel.

For a fixed c0, every variable is replaced by a von Mises-Fisher draw fitted
to its (sign-aligned) correlation group, the base selector is rerun on the
perturbed design, and the selection frequencies over B rounds form zeta.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AcselError, ValidationError
from .geometry import SphereEmbedding, StandardizedDesign, embed_columns, phi_inverse
from .grouping import GroupMap, correlation, make_groups
from .seeding import derive, rng_for
from .vmf import kappa_from_rbar, sample_vmf_columns

log = logging.getLogger(__name__)

#: c0 grid of the real-data protocol: 1.0, 0.95, ..., 0.35
REAL_DATA_GRID = tuple(np.round(np.arange(1.0, 0.35 - 1e-9, -0.05), 2))


@dataclass(frozen=True)
class GroupFit:
    """Per-variable vMF parameters of the sign-aligned group around each variable."""

    mu: np.ndarray  # D x P
    kappa: np.ndarray  # P
    degenerate: np.ndarray  # P, True where the draw is a point mass at the original column


@dataclass(frozen=True)
class ZetaVector:
    zeta: np.ndarray
    b_used: int
    counts: np.ndarray


@dataclass(frozen=True)
class SweepResult:
    grid: np.ndarray
    zeta: np.ndarray  # G x P
    masks: np.ndarray  # G x P bool
    threshold: float
    b_used: int
    meta: dict = field(default_factory=dict)

    def selected_counts(self) -> np.ndarray:
        return self.masks.sum(axis=1)


def fit_groups(emb: SphereEmbedding, gm: GroupMap, corr: np.ndarray | None = None) -> GroupFit:
    """Estimate (mu, kappa) for every variable's group in one pass.

    Members are sign-flipped to agree with the seed variable before the
    resultant is formed, so perfectly anti-correlated columns reinforce rather
    than cancel.
    """
    z = emb.z
    dim = z.shape[0]
    if corr is None:
        corr = z.T @ z
    signs = np.where(corr < 0, -1.0, 1.0)
    member = gm.membership()
    resultant = z @ (member * signs)
    sizes = member.sum(axis=0)
    norms = np.linalg.norm(resultant, axis=0)
    cancelled = norms < 1e-12
    if np.any(cancelled):
        log.warning("zero resultant for variables %s; keeping their original columns",
                    np.flatnonzero(cancelled).tolist())
    safe = np.where(cancelled, 1.0, norms)
    kappa = kappa_from_rbar(np.minimum(norms / sizes, 1.0), dim)
    kappa = np.atleast_1d(kappa)
    degenerate = (sizes == 1) | np.isinf(kappa) | cancelled
    return GroupFit(resultant / safe, kappa, degenerate)


def resample_design(sd: StandardizedDesign, emb: SphereEmbedding, gm: GroupMap,
                    rng: np.random.Generator, fit: GroupFit | None = None) -> StandardizedDesign:
    """One perturbed design: each non-degenerate column replaced by a vMF draw."""
    if fit is None:
        fit = fit_groups(emb, gm)
    live = ~fit.degenerate
    if not live.any():
        return sd
    draws = sample_vmf_columns(fit.mu[:, live], fit.kappa[live], rng)
    xs = np.array(sd.xs, order="F", copy=True)
    xs[:, live] = phi_inverse(draws)
    return sd.with_design(xs)


def acsel_run(sd: StandardizedDesign, selector, gm: GroupMap, n_boot: int, seed,
              emb: SphereEmbedding | None = None) -> ZetaVector:
    """Selection frequencies over ``n_boot`` perturbed designs at one c0.

    Round b draws from the stream derived from (seed, b), so the result does
    not depend on evaluation order.  A failing round is retried once on the
    stream (seed, b, 1); a second failure propagates.
    """
    if n_boot < 1:
        raise ValidationError("B must be at least 1")
    emb = embed_columns(sd) if emb is None else emb
    fit = fit_groups(emb, gm)
    if fit.degenerate.all():
        # every draw is the original column: the selector sees the input B times
        counts = selector(sd).astype(np.int64) * n_boot
        return ZetaVector(counts / n_boot, n_boot, counts)

    counts = np.zeros(sd.n_vars, dtype=np.int64)
    for b in range(n_boot):
        try:
            mask = selector(resample_design(sd, emb, gm, rng_for(seed, b), fit))
        except AcselError as exc:
            log.warning("round %d failed (%s); retrying on a fresh stream", b, exc)
            mask = selector(resample_design(sd, emb, gm, rng_for(seed, b, 1), fit))
        counts += mask
    return ZetaVector(counts / n_boot, n_boot, counts)


def select_at_threshold(z: ZetaVector | np.ndarray, thr: float = 1.0) -> np.ndarray:
    if not 0.0 < thr <= 1.0:
        raise ValidationError(f"threshold must lie in (0, 1], got {thr}")
    if isinstance(z, ZetaVector):
        # compare integer counts so that k/B versus thr is not at the mercy of rounding
        return z.counts >= np.ceil(thr * z.b_used - 1e-9)
    return np.asarray(z) >= thr - 1e-12


def check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("c0 grid must be a nonempty list")
    if grid[0] != 1.0:
        raise ValidationError("c0 grid must start at 1")
    if np.any(np.diff(grid) >= 0) or grid[-1] < 0:
        raise ValidationError("c0 grid must be strictly decreasing within [0, 1]")
    return grid


def acsel_sweep(sd: StandardizedDesign, selector, grid, n_boot: int, thr: float, seed,
                grouping: str = "naive") -> SweepResult:
    """Run AcSel at every c0 of ``grid``; grid point i uses the stream (seed, i)."""
    grid = check_grid(grid)
    emb = embed_columns(sd)
    corr = correlation(sd)
    zetas, masks = [], []
    for i, c0 in enumerate(grid):
        z = acsel_run(sd, selector, make_groups(corr, c0, grouping), n_boot, derive(seed, i), emb=emb)
        zetas.append(z.zeta)
        masks.append(select_at_threshold(z, thr))
    return SweepResult(grid, np.array(zetas), np.array(masks, dtype=bool), float(thr), n_boot,
                       {"grouping": grouping})


def confidence_from_masks(grid, masks) -> np.ndarray:
    """gamma_p = 1 - (smallest c0 at which p is selected), 0 if never selected."""
    grid = np.asarray(grid, dtype=float)
    masks = np.asarray(masks, dtype=bool)
    lowest = np.where(masks, grid[:, None], np.inf).min(axis=0)
    return np.where(np.isfinite(lowest), 1.0 - lowest, 0.0)


def confidence_indicators(sr: SweepResult) -> np.ndarray:
    return confidence_from_masks(sr.grid, sr.masks)


def naive_acsel(sd: StandardizedDesign, selector, gm: GroupMap, base_mask=None) -> np.ndarray:
    """Base selection with every variable from a non-singleton group dropped."""
    mask = selector(sd) if base_mask is None else np.asarray(base_mask, dtype=bool)
    return mask & (gm.sizes == 1)
