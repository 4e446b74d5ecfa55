"""von Mises-Fisher distribution on the unit sphere of R^D: fitting, density, sampling.

Points are stored column-wise (a D x m matrix).  The concentration may be
``np.inf``, a point mass at the mean direction; ``0`` is the uniform law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateKappa, ValidationError, ZeroResultant

#: mean resultant length above which a sample is treated as a point mass
RBAR_DEGENERATE = 1.0 - 1e-9


@dataclass(frozen=True)
class VmfParams:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        if abs(np.linalg.norm(mu) - 1.0) > 1e-10:
            raise ValidationError("mean direction must have unit norm")
        if not self.kappa >= 0:
            raise ValidationError("concentration must be nonnegative")
        object.__setattr__(self, "mu", mu)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] < 1:
        raise ValidationError("need at least one point")
    return pts


def estimate_mu(points) -> np.ndarray:
    """Normalized resultant direction of the columns of ``points``."""
    total = _as_points(points).sum(axis=1)
    norm = np.linalg.norm(total)
    if norm < 1e-12:
        raise ZeroResultant("points cancel out; mean direction undefined")
    return total / norm


def kappa_from_rbar(rbar, dim: int):
    """Approximate ML concentration ``rbar (D - rbar^2) / (1 - rbar^2)``.

    Works elementwise; returns ``inf`` where ``rbar`` exceeds ``RBAR_DEGENERATE``.
    """
    rbar = np.asarray(rbar, dtype=float)
    degenerate = rbar > RBAR_DEGENERATE
    r = np.where(degenerate, 0.0, rbar)
    kappa = np.where(degenerate, np.inf, r * (dim - r * r) / (1.0 - r * r))
    return kappa if kappa.ndim else float(kappa)


def estimate_kappa(points) -> float:
    pts = _as_points(points)
    rbar = np.linalg.norm(pts.mean(axis=1))
    return kappa_from_rbar(rbar, pts.shape[0])


def log_bessel_iv(order: float, x: float) -> float:
    """log I_order(x) for x > 0, robust to overflow and underflow.

    Uses the exponentially scaled ``ive``; where that under/overflows, falls
    back to the ascending series summed in log space.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    scaled = special.ive(order, x)
    if np.isfinite(scaled) and scaled > 0:
        return float(np.log(scaled) + x)
    # ascending series: sum_k (x/2)^(2k+v) / (k! Gamma(v+k+1))
    log_half = np.log(0.5 * x)
    k = np.arange(0, 2000)
    terms = (2 * k + order) * log_half - special.gammaln(k + 1) - special.gammaln(order + k + 1)
    return float(special.logsumexp(terms))


def vmf_log_norm_const(kappa: float, dim: int) -> float:
    v = dim / 2.0 - 1.0
    return (v * np.log(kappa) - (dim / 2.0) * np.log(2.0 * np.pi)
            - log_bessel_iv(v, kappa))


def vmf_log_density(x, params: VmfParams) -> float:
    kappa = params.kappa
    if not (0 < kappa < np.inf):
        raise DegenerateKappa(f"density needs finite positive kappa, got {kappa}")
    x = np.asarray(x, dtype=float)
    return vmf_log_norm_const(kappa, params.dim) + kappa * (params.mu @ x)


def _wood_cosines(kappa: np.ndarray, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection sampler for the cosine t = mu'x, one draw per entry of ``kappa``."""
    dm1 = dim - 1.0
    b = dm1 / (2.0 * kappa + np.sqrt(4.0 * kappa * kappa + dm1 * dm1))
    x0 = (1.0 - b) / (1.0 + b)
    # 1 - x0^2 = 4b / (1+b)^2, kept in log form for large kappa
    c = kappa * x0 + dm1 * (np.log(4.0 * b) - 2.0 * np.log1p(b))
    out = np.empty_like(kappa)
    pending = np.arange(kappa.shape[0])
    while pending.size:
        bp, x0p = b[pending], x0[pending]
        z = rng.beta(dm1 / 2.0, dm1 / 2.0, size=pending.size)
        u = rng.uniform(size=pending.size)
        w = (1.0 - (1.0 + bp) * z) / (1.0 - (1.0 - bp) * z)
        with np.errstate(divide="ignore"):
            accept = (kappa[pending] * w + dm1 * np.log1p(-x0p * w) - c[pending]) >= np.log(u)
        out[pending[accept]] = w[accept]
        pending = pending[~accept]
    return out


def _rotate_from_pole(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Householder reflection mapping e_1 to ``mu``, applied column-wise.

    ``x`` and ``mu`` are D x m; column j of ``x`` is rotated by column j of ``mu``.
    """
    u = -mu.copy()
    u[0] += 1.0
    unorm2 = np.einsum("ij,ij->j", u, u)
    safe = unorm2 > 1e-30
    coef = np.where(safe, 2.0 * np.einsum("ij,ij->j", u, x) / np.where(safe, unorm2, 1.0), 0.0)
    return x - u * coef


def sample_vmf_columns(mus: np.ndarray, kappas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per column: column j ~ vMF(mus[:, j], kappas[j])."""
    mus = np.asarray(mus, dtype=float)
    kappas = np.asarray(kappas, dtype=float)
    dim, m = mus.shape
    out = np.empty((dim, m))

    point = np.isinf(kappas)
    out[:, point] = mus[:, point]

    uniform = kappas == 0
    if uniform.any():
        g = rng.standard_normal((dim, int(uniform.sum())))
        out[:, uniform] = g / np.linalg.norm(g, axis=0)

    sel = ~(point | uniform)
    if sel.any():
        k = kappas[sel]
        w = _wood_cosines(k, dim, rng)
        v = rng.standard_normal((dim - 1, k.shape[0]))
        v /= np.linalg.norm(v, axis=0)
        x = np.empty((dim, k.shape[0]))
        x[0] = w
        x[1:] = v * np.sqrt(np.maximum(1.0 - w * w, 0.0))
        x = _rotate_from_pole(x, mus[:, sel])
        out[:, sel] = x / np.linalg.norm(x, axis=0)
    return out


def sample_vmf(params: VmfParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent draws from vMF(mu, kappa) as a D x count matrix."""
    mus = np.repeat(params.mu[:, None], count, axis=1)
    return sample_vmf_columns(mus, np.full(count, float(params.kappa)), rng)
