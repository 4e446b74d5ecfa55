"""Base selectors: Lasso with information-criterion tuning and forward stepwise.

All selectors operate on a ``StandardizedDesign`` (centered, unit-norm columns,
centered response) and return a boolean support mask of length P.

Lasso objective: ``||y - X b||^2 + lam * sum_j |b_j|``.  Under this scaling the
smallest lambda giving the all-zero solution is ``2 * max_j |x_j' y|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NoConvergence, SingularGram, ValidationError
from .geometry import StandardizedDesign
from .kernels import cd_path

N_LAMBDA = 100
LAMBDA_RATIO = 1e-3
CD_TOL = 1e-7
MAX_SWEEPS = 100_000
# soft-threshold dead zone beyond lam/2, relative to ||y||; absorbs round-off only
ZERO_BAND = 1e-12


class Criterion(str, Enum):
    BIC = "bic"
    BIC2 = "bic2"
    AICC = "aicc"
    GCV = "gcv"


@dataclass(frozen=True)
class LassoPath:
    lambdas: np.ndarray
    coefs: np.ndarray  # P x L
    df: np.ndarray
    rss: np.ndarray

    def __len__(self):
        return self.lambdas.shape[0]


@dataclass(frozen=True)
class SelectionFit:
    """Support mask plus standardized-scale coefficients of the chosen model."""

    mask: np.ndarray
    coef: np.ndarray
    info: dict = field(default_factory=dict)


def lambda_max(sd: StandardizedDesign) -> float:
    return 2.0 * float(np.max(np.abs(sd.xs.T @ sd.ys)))


def default_lambdas(sd: StandardizedDesign, n: int = N_LAMBDA, ratio: float = LAMBDA_RATIO) -> np.ndarray:
    top = lambda_max(sd)
    if top <= 0:
        raise ValidationError("response is orthogonal to every column; lambda grid is empty")
    return np.geomspace(top, ratio * top, n)


def _distinct_columns(x: np.ndarray) -> np.ndarray:
    """Indices of the first occurrence of each column, identifying x and -x.

    Duplicates make the Lasso solution non-unique; solving on one representative
    gives the whole coefficient to the first copy.
    """
    lead = np.argmax(np.abs(x) > 1e-8, axis=0)
    signs = np.sign(x[lead, np.arange(x.shape[1])])
    signs[signs == 0] = 1.0
    keys = np.rint(x * signs * 1e10).astype(np.int64)
    # integer hash is exact, so equal columns always collide; only then sort columns
    hashes = np.arange(1, x.shape[0] + 1, dtype=np.int64) @ keys
    if np.unique(hashes).size == x.shape[1]:
        return np.arange(x.shape[1])
    _, first = np.unique(keys, axis=1, return_index=True)
    return np.sort(first)


def lasso_path(sd: StandardizedDesign, lambdas=None, tol: float = CD_TOL,
               max_sweeps: int = MAX_SWEEPS, max_df: int | None = None) -> LassoPath:
    """Warm-started cyclic coordinate descent over a decreasing lambda grid.

    With ``max_df`` set, the path ends before the first grid point whose active
    set reaches that size; the returned path is then shorter than the grid.
    """
    lambdas = default_lambdas(sd) if lambdas is None else np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0 or np.any(lambdas <= 0) or np.any(np.diff(lambdas) >= 0):
        raise ValidationError("lambda grid must be positive and strictly decreasing")
    x = np.asfortranarray(sd.xs, dtype=float)
    y = np.ascontiguousarray(sd.ys, dtype=float)
    keep = _distinct_columns(x)
    xk = x if keep.size == x.shape[1] else np.asfortranarray(x[:, keep])
    sub = np.zeros((keep.size, lambdas.size))
    limit = x.shape[1] + 1 if max_df is None else int(max_df)
    band = ZERO_BAND * float(np.linalg.norm(y))
    n_done, status = cd_path(xk, y, lambdas, tol, max_sweeps, limit, band, sub)
    if status:
        raise NoConvergence(float(lambdas[n_done]), max_sweeps)
    coefs = np.zeros((x.shape[1], n_done))
    coefs[keep] = sub[:, :n_done]
    resid = y[:, None] - x @ coefs
    return LassoPath(lambdas[:n_done].copy(), coefs,
                     np.count_nonzero(coefs, axis=0), np.einsum("ij,ij->j", resid, resid))


def _bic2_sigma2(df: np.ndarray, rss: np.ndarray, n_obs: int) -> float:
    """Residual variance anchored at the first model with two variables.

    Falls back to the first model whose size is closest to two.
    """
    anchor = int(np.argmin(np.abs(df - 2)))
    dof = max(n_obs - int(df[anchor]) - 1, 1)
    return max(float(rss[anchor]) / dof, 1e-300)


def criterion_values(df, rss, crit: Criterion | str, n_obs: int) -> np.ndarray:
    """Score every model described by (df, rss); lower is better.

    Points outside a criterion's domain score ``+inf`` (AICc for df >= N-1,
    GCV for df >= N).
    """
    crit = Criterion(crit)
    df = np.asarray(df, dtype=float)
    rss = np.asarray(rss, dtype=float)
    n = float(n_obs)
    with np.errstate(divide="ignore", invalid="ignore"):
        if crit is Criterion.BIC:
            score = n * np.log(rss / n) + np.log(n) * df
        elif crit is Criterion.AICC:
            denom = n - df - 1.0
            score = n * np.log(rss / n) + 2 * df + 2 * df * (df + 1) / denom
            score = np.where(denom > 0, score, np.inf)
        elif crit is Criterion.GCV:
            score = rss / (n * (1.0 - df / n) ** 2)
            score = np.where(df < n, score, np.inf)
        else:
            sigma2 = _bic2_sigma2(df, rss, n_obs)
            score = rss / sigma2 + np.log(n) * df
    return np.where(np.isnan(score), np.inf, score)


def criterion_score(path: LassoPath, at: int, crit: Criterion | str, n_obs: int) -> float:
    return float(criterion_values(path.df, path.rss, crit, n_obs)[at])


def fit_lasso(sd: StandardizedDesign, crit: Criterion | str, lambdas=None) -> SelectionFit:
    """Lasso support at the criterion-minimizing grid point (ties go to larger lambda).

    The path is cut before the active set reaches N - 1 (the rank of a
    centered design), where fits interpolate the response.
    """
    if lambdas is None and lambda_max(sd) <= 0:
        zero = np.zeros(sd.n_vars)
        return SelectionFit(zero != 0, zero, {"lambda": 0.0, "index": 0, "score": np.inf})
    saturation = sd.n_obs - 1
    path = lasso_path(sd, lambdas, max_df=saturation)
    scores = criterion_values(path.df, path.rss, crit, sd.n_obs)
    best = int(np.argmin(scores))
    coef = path.coefs[:, best].copy()
    return SelectionFit(coef != 0, coef, {"lambda": float(path.lambdas[best]), "index": best,
                                          "score": float(scores[best]), "path": path})


def select_lasso(sd: StandardizedDesign, crit: Criterion | str) -> np.ndarray:
    return fit_lasso(sd, crit).mask


def _greedy_steps(xs: np.ndarray, ys: np.ndarray, max_steps: int, tol: float = 1e-10):
    """Forward selection by largest RSS decrease; yields (index, rss) per step.

    Candidates whose residualized norm falls below ``tol`` (rank deficient given
    the current active set) are skipped.
    """
    resid_cols = np.array(xs, dtype=float, copy=True)
    r = np.array(ys, dtype=float, copy=True)
    available = np.ones(xs.shape[1], dtype=bool)
    base = np.maximum(np.einsum("ij,ij->j", xs, xs), 1e-300)
    for _ in range(max_steps):
        norms2 = np.einsum("ij,ij->j", resid_cols, resid_cols)
        ok = available & (norms2 > tol * base)
        if not ok.any():
            return
        gain = np.where(ok, (resid_cols.T @ r) ** 2 / np.where(ok, norms2, 1.0), -np.inf)
        j = int(np.argmax(gain))
        q = resid_cols[:, j] / np.sqrt(norms2[j])
        r -= q * (q @ r)
        resid_cols -= np.outer(q, q @ resid_cols)
        available[j] = False
        yield j, float(r @ r)


def _stepwise_score(rss: list[float], k: int, crit: Criterion, n_obs: int) -> float:
    if crit is Criterion.BIC2:
        anchor = min(2, len(rss) - 1)
        sigma2 = max(rss[anchor] / max(n_obs - anchor - 1, 1), 1e-300)
        return rss[k] / sigma2 + np.log(n_obs) * k
    return float(criterion_values([k], [rss[k]], crit, n_obs)[0])


def fit_stepwise(sd: StandardizedDesign, crit: Criterion | str) -> SelectionFit:
    """Greedy forward selection, stopping at the first criterion increase.

    The model size is capped at min(N - 2, P).  For BIC2 the residual variance
    comes from the two-variable model on the greedy path.
    """
    crit = Criterion(crit)
    n_obs, n_vars = sd.xs.shape
    steps = _greedy_steps(sd.xs, sd.ys, min(n_obs - 2, n_vars))
    order: list[int] = []
    rss = [float(sd.ys @ sd.ys)]
    if crit is Criterion.BIC2:
        for j, value in steps:
            order.append(j)
            rss.append(value)
            if len(order) == 2:
                break

    chosen = 0
    current = _stepwise_score(rss, 0, crit, n_obs)
    while True:
        if chosen + 1 >= len(rss):
            nxt = next(steps, None)
            if nxt is None:
                break
            order.append(nxt[0])
            rss.append(nxt[1])
        candidate = _stepwise_score(rss, chosen + 1, crit, n_obs)
        if not candidate < current:
            break
        current, chosen = candidate, chosen + 1

    active = np.array(order[:chosen], dtype=np.int64)
    coef = np.zeros(n_vars)
    if chosen:
        sol, *_ = np.linalg.lstsq(sd.xs[:, active], sd.ys, rcond=None)
        coef[active] = sol
    mask = np.zeros(n_vars, dtype=bool)
    mask[active] = True
    return SelectionFit(mask, coef, {"order": order, "rss": rss, "score": current})


def select_stepwise(sd: StandardizedDesign, crit: Criterion | str) -> np.ndarray:
    return fit_stepwise(sd, crit).mask


def irrepresentable_check(sd: StandardizedDesign, support, signs) -> tuple[bool, float]:
    """Irrepresentable condition for Lasso sign consistency.

    Returns ``(holds, margin)`` where margin is one minus the largest entry of
    ``|X_out' X_S (X_S' X_S)^-1 sgn(beta_S)|``.  Entries within 1e-10 of one
    count as violations.
    """
    support = np.asarray(support, dtype=np.int64)
    if support.size == 0:
        raise ValidationError("support must be nonempty")
    signs = np.sign(np.asarray(signs, dtype=float))
    xs_in = sd.xs[:, support]
    gram = xs_in.T @ xs_in
    if np.linalg.matrix_rank(gram, tol=1e-10 * max(1.0, np.abs(gram).max())) < support.size:
        raise SingularGram("X_S' X_S is singular")
    w = np.linalg.solve(gram, signs)
    out = np.setdiff1d(np.arange(sd.n_vars), support)
    if out.size == 0:
        return True, 1.0
    v = np.abs(sd.xs[:, out].T @ (xs_in @ w))
    top = float(v.max())
    return bool(top < 1.0 - 1e-10), 1.0 - top


@dataclass(frozen=True)
class Selector:
    """A named base selector, e.g. ``Selector.parse("lasso:bic2")``."""

    method: str
    criterion: Criterion

    @classmethod
    def parse(cls, spec: str) -> "Selector":
        method, _, crit = spec.strip().lower().partition(":")
        if method not in ("lasso", "stepwise"):
            raise ValidationError(f"unknown selector {spec!r}; expected lasso:<crit> or stepwise:<crit>")
        try:
            criterion = Criterion(crit or "bic")
        except ValueError:
            raise ValidationError(f"unknown criterion {crit!r}; choose from bic, bic2, aicc, gcv") from None
        return cls(method, criterion)

    @property
    def name(self) -> str:
        return f"{self.method}:{self.criterion.value}"

    def fit(self, sd: StandardizedDesign) -> SelectionFit:
        if self.method == "lasso":
            return fit_lasso(sd, self.criterion)
        return fit_stepwise(sd, self.criterion)

    def __call__(self, sd: StandardizedDesign) -> np.ndarray:
        return self.fit(sd).mask
