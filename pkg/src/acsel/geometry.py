"""Standardization and the isometry between the centered hyperplane of R^N and R^(N-1).

Centered, unit-norm columns live on the unit sphere of the hyperplane
orthogonal to the all-ones vector.  ``basis_h`` gives an explicit orthonormal
basis H of that hyperplane, so ``phi_forward(v) = H.T @ v`` and
``phi_inverse(w) = H @ w`` move between the two representations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConstantColumn, NotInHyperplane, TooFewRows, ValidationError


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim != 2:
            raise ValidationError("design matrix must be two-dimensional")
        if x.shape[0] != y.shape[0]:
            raise ValidationError(f"x has {x.shape[0]} rows but y has {y.shape[0]} entries")
        if x.shape[0] < 3:
            raise TooFewRows(x.shape[0])
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("data contains non-finite values")
        names = tuple(self.names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise ValidationError(f"{len(names)} names for {x.shape[1]} columns")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "names", names)

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]

    @property
    def n_vars(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class StandardizedDesign:
    """Centered unit-norm design with what is needed to undo the scaling.

    ``xs`` is stored Fortran-ordered so each column is contiguous for the
    coordinate-descent kernels.
    """

    xs: np.ndarray
    ys: np.ndarray
    col_means: np.ndarray
    col_scales: np.ndarray
    y_mean: float
    names: tuple[str, ...] = ()

    @property
    def n_obs(self) -> int:
        return self.xs.shape[0]

    @property
    def n_vars(self) -> int:
        return self.xs.shape[1]

    def with_design(self, xs: np.ndarray) -> "StandardizedDesign":
        """Same response and metadata, different (already standardized) columns."""
        return StandardizedDesign(np.asfortranarray(xs), self.ys, self.col_means,
                                  self.col_scales, self.y_mean, self.names)

    def original_coefficients(self, coef: np.ndarray) -> tuple[float, np.ndarray]:
        """Map standardized-scale coefficients back to (intercept, slopes) on the input scale."""
        scales = np.where(self.col_scales > 0, self.col_scales, 1.0)
        slopes = np.where(self.col_scales > 0, coef / scales, 0.0)
        intercept = self.y_mean - float(slopes @ self.col_means)
        return intercept, slopes


@dataclass(frozen=True)
class SphereEmbedding:
    z: np.ndarray


def standardize(d: Dataset, allow_constant: bool = False) -> StandardizedDesign:
    """Center every column and the response; rescale columns to unit Euclidean norm.

    Constant columns raise ``ConstantColumn`` unless ``allow_constant`` is set,
    in which case they become all-zero columns with scale 0 (they can then
    never enter a model).
    """
    x, y = d.x, d.y
    if x.shape[0] < 3:
        raise TooFewRows(x.shape[0])
    means = x.mean(axis=0)
    xc = x - means
    scales = np.sqrt(np.einsum("ij,ij->j", xc, xc))
    # relative test so that tiny-magnitude but genuinely varying columns survive
    ref = np.maximum(np.abs(means), np.max(np.abs(x), axis=0, initial=0.0))
    constant = scales <= 1e-12 * np.maximum(ref, 1e-300) * np.sqrt(x.shape[0])
    if np.any(constant) and not allow_constant:
        j = int(np.flatnonzero(constant)[0])
        raise ConstantColumn(j, d.names[j] if d.names else None)
    scales = np.where(constant, 0.0, scales)
    xs = np.where(constant, 0.0, xc / np.where(constant, 1.0, scales))
    y_mean = float(y.mean())
    return StandardizedDesign(np.asfortranarray(xs), y - y_mean, means, scales, y_mean, d.names)


def standardize_array(x: np.ndarray) -> np.ndarray:
    """Center and unit-normalize columns of a raw array (no validation)."""
    xc = x - x.mean(axis=0)
    return xc / np.linalg.norm(xc, axis=0)


@lru_cache(maxsize=64)
def _basis(n_obs: int) -> np.ndarray:
    h = np.zeros((n_obs, n_obs - 1))
    for n in range(1, n_obs):
        h[:n, n - 1] = 1.0
        h[n, n - 1] = -float(n)
        h[:, n - 1] /= np.sqrt(n * (n + 1.0))
    h.setflags(write=False)
    return h


def basis_h(n_obs: int) -> np.ndarray:
    """Orthonormal basis (N x (N-1)) of the hyperplane orthogonal to the ones vector.

    Column n (1-based) is proportional to ``e_1 + ... + e_n - n e_{n+1}``.
    """
    if n_obs < 3:
        raise TooFewRows(n_obs)
    return _basis(int(n_obs))


def phi_forward(v: np.ndarray) -> np.ndarray:
    """Coordinates of centered vector(s) ``v`` in the h-basis.

    Accepts a vector of length N or an N x m matrix (one vector per column).
    """
    v = np.asarray(v, dtype=float)
    total = v.sum(axis=0)
    norm = np.linalg.norm(v, axis=0)
    if np.any(np.abs(total) > 1e-8 * np.maximum(norm, 1e-300)):
        raise NotInHyperplane("vector is not orthogonal to the ones vector")
    return basis_h(v.shape[0]).T @ v


def phi_inverse(w: np.ndarray) -> np.ndarray:
    """Map coordinates in R^(N-1) back to the centered hyperplane of R^N."""
    w = np.asarray(w, dtype=float)
    return basis_h(w.shape[0] + 1) @ w


def embed_columns(sd: StandardizedDesign) -> SphereEmbedding:
    return SphereEmbedding(phi_forward(sd.xs))
