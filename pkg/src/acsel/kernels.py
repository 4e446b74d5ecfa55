"""Hot numeric kernels: cyclic coordinate descent along a Lasso path.

Two interchangeable implementations live here.  ``cd_path_loops`` is written as
explicit scalar loops and is compiled with numba; ``cd_path_numpy`` runs the
same algorithm with vectorized column operations and is used when numba is
disabled (``ACSEL_DISABLE_NUMBA=1``).  Both fill ``coefs`` in place and return
``(n_done, status)`` where status is 0 on success and 1 when the sweep budget
was exhausted at grid index ``n_done``.

Objective at each grid point: ``||y - X b||^2 + lam * sum |b_j|`` with columns
of unit Euclidean norm, so the coordinate update is a soft-threshold at lam/2.

Each grid point alternates full sweeps with sweeps over the ever-active set.
Inside the active phase the kernel periodically tries the closed-form solution
for the current sign pattern, ``b_A = (X_A'X_A)^-1 (X_A'y - lam/2 s_A)``.  A
coefficient that would change sign is stopped at zero and dropped before the
solve is repeated, and the next full sweep must still see no coordinate move
by more than ``tol``.  ``band`` widens the soft-threshold
dead zone so that round-off cannot activate an exact copy of an active column.

The path ends early (``n_done < len(lambdas)``, status 0) as soon as a full
sweep leaves ``max_df`` or more nonzero coefficients: beyond the rank of the
design the solution is no longer unique and coordinate descent only creeps.
"""

import numpy as np

from ._jit import USE_NUMBA, njit

EXACT_EVERY = 4
# exact solves allowed per grid point before falling back to plain sweeps
EXACT_BUDGET = 8
GRAM_CACHE_MAX = 2048


@njit
def _cholesky_solve(gram, rhs, k):
    """Solve gram[:k, :k] x = rhs[:k] in place; False if not numerically SPD."""
    for j in range(k):
        s = gram[j, j]
        for t in range(j):
            s -= gram[j, t] * gram[j, t]
        if s <= 1e-10:
            return False
        d = np.sqrt(s)
        gram[j, j] = d
        for i in range(j + 1, k):
            s = gram[i, j]
            for t in range(j):
                s -= gram[i, t] * gram[j, t]
            gram[i, j] = s / d
    for i in range(k):
        s = rhs[i]
        for t in range(i):
            s -= gram[i, t] * rhs[t]
        rhs[i] = s / gram[i, i]
    for i in range(k - 1, -1, -1):
        s = rhs[i]
        for t in range(i + 1, k):
            s -= gram[t, i] * rhs[t]
        rhs[i] = s / gram[i, i]
    return True


@njit
def _exact_step(X, y, beta, r, half, act, gram, rhs, xty, gfull, gdone):
    """Active-set solve on the current sign pattern.

    Solves for the nonzero coefficients with their signs held fixed.  If some
    coefficient would change sign, moves along the segment until the first one
    reaches zero (the objective decreases along it), drops that coefficient
    and solves again on the smaller set.  Returns True once a sign-consistent
    solution is reached, False if the Gram matrix is not numerically SPD.
    """
    n_obs, n_vars = X.shape
    cached = gfull.shape[0] == n_vars
    done = False
    moved = False
    while True:
        k = 0
        for j in range(n_vars):
            if beta[j] != 0.0:
                act[k] = j
                k += 1
        if k == 0 or k >= n_obs:
            break
        for a in range(k):
            ja = act[a]
            if cached and not gdone[ja]:
                for j in range(n_vars):
                    s = 0.0
                    for i in range(n_obs):
                        s += X[i, j] * X[i, ja]
                    gfull[j, ja] = s
                gdone[ja] = True
        for a in range(k):
            ja = act[a]
            rhs[a] = xty[ja] - (half if beta[ja] > 0 else -half)
            for b in range(a + 1):
                jb = act[b]
                if cached:
                    gram[a, b] = gfull[ja, jb]
                else:
                    s = 0.0
                    for i in range(n_obs):
                        s += X[i, ja] * X[i, jb]
                    gram[a, b] = s
        if not _cholesky_solve(gram, rhs, k):
            break
        t = 1.0
        hit = -1
        for a in range(k):
            b0 = beta[act[a]]
            if rhs[a] == 0.0 or (rhs[a] > 0) != (b0 > 0):
                frac = b0 / (b0 - rhs[a])
                if frac < t:
                    t = frac
                    hit = a
        for a in range(k):
            ja = act[a]
            beta[ja] += t * (rhs[a] - beta[ja])
        moved = True
        if hit < 0:
            done = True
            break
        beta[act[hit]] = 0.0
    if moved:
        for i in range(n_obs):
            r[i] = y[i]
        for j in range(n_vars):
            if beta[j] != 0.0:
                for i in range(n_obs):
                    r[i] -= beta[j] * X[i, j]
    return done


@njit
def _sweep(X, r, beta, order, n_order, half, band, ever):
    n_obs = X.shape[0]
    maxd = 0.0
    for t in range(n_order):
        j = order[t]
        g = 0.0
        for i in range(n_obs):
            g += X[i, j] * r[i]
        z = g + beta[j]
        if z > half + band:
            new = z - half
        elif z < -half - band:
            new = z + half
        else:
            new = 0.0
        d = new - beta[j]
        if d != 0.0:
            for i in range(n_obs):
                r[i] -= d * X[i, j]
            beta[j] = new
            ever[j] = True
            if abs(d) > maxd:
                maxd = abs(d)
    return maxd


@njit
def cd_path_loops(X, y, lambdas, tol, max_sweeps, max_df, band, coefs):
    n_obs, n_vars = X.shape
    n_lam = lambdas.shape[0]
    beta = np.zeros(n_vars)
    r = y.copy()
    ever = np.zeros(n_vars, dtype=np.bool_)
    full = np.arange(n_vars)
    idx = np.empty(n_vars, dtype=np.int64)
    act = np.empty(n_vars, dtype=np.int64)
    gram = np.empty((n_obs, n_obs))
    rhs = np.empty(n_obs)
    xty = np.zeros(n_vars)
    for j in range(n_vars):
        for i in range(n_obs):
            xty[j] += X[i, j] * y[i]
    # Gram columns are filled on first use; skipped for very wide designs
    g = n_vars if n_vars <= GRAM_CACHE_MAX else 1
    gfull = np.empty((g, g))
    gdone = np.zeros(n_vars, dtype=np.bool_)

    for k in range(n_lam):
        half = 0.5 * lambdas[k]
        sweeps = 0
        exact_left = EXACT_BUDGET
        while True:
            maxd = _sweep(X, r, beta, full, n_vars, half, band, ever)
            sweeps += 1
            nnz = 0
            for j in range(n_vars):
                if beta[j] != 0.0:
                    nnz += 1
            if nnz >= max_df:
                return k, 0
            if maxd < tol:
                break
            if sweeps >= max_sweeps:
                return k, 1
            n_act = 0
            for j in range(n_vars):
                if ever[j]:
                    idx[n_act] = j
                    n_act += 1
            inner = 0
            while True:
                maxd = _sweep(X, r, beta, idx, n_act, half, band, ever)
                sweeps += 1
                inner += 1
                if maxd < tol:
                    break
                if sweeps >= max_sweeps:
                    return k, 1
                if exact_left > 0 and inner % EXACT_EVERY == 1:
                    exact_left -= 1
                    if _exact_step(X, y, beta, r, half, act, gram, rhs, xty, gfull, gdone):
                        break

        for j in range(n_vars):
            coefs[j, k] = beta[j]
    return n_lam, 0


def _exact_step_numpy(X, y, beta, half, xty, gram):
    """Vectorized twin of ``_exact_step``; returns (new beta, sign-consistent) or None."""
    out = beta.copy()
    moved = False
    while True:
        act = np.flatnonzero(out)
        if act.size == 0 or act.size >= X.shape[0]:
            break
        signs = np.sign(out[act])
        if gram is None:
            xa = X[:, act]
            g = xa.T @ xa
        else:
            g = gram[np.ix_(act, act)]
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            break
        if np.min(np.diag(chol)) ** 2 <= 1e-10:
            break
        rhs = xty[act] - half * signs
        sol = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        cur = out[act]
        flip = (sol == 0.0) | (np.sign(sol) != signs)
        moved = True
        if not flip.any():
            out[act] = sol
            return out, True
        fracs = np.where(flip, cur / np.where(flip, cur - sol, 1.0), np.inf)
        hit = int(np.argmin(fracs))
        out[act] = cur + fracs[hit] * (sol - cur)
        out[act[hit]] = 0.0
    return (out, False) if moved else None


def cd_path_numpy(X, y, lambdas, tol, max_sweeps, max_df, band, coefs):
    n_vars = X.shape[1]
    beta = np.zeros(n_vars)
    r = y.copy()
    ever = np.zeros(n_vars, dtype=bool)
    cols = [X[:, j] for j in range(n_vars)]
    xty = X.T @ y
    gram = X.T @ X if n_vars <= GRAM_CACHE_MAX else None

    def sweep(order, half):
        maxd = 0.0
        for j in order:
            xj = cols[j]
            z = float(xj @ r) + beta[j]
            if z > half + band:
                new = z - half
            elif z < -half - band:
                new = z + half
            else:
                new = 0.0
            d = new - beta[j]
            if d != 0.0:
                r[:] -= d * xj
                beta[j] = new
                ever[j] = True
                maxd = max(maxd, abs(d))
        return maxd

    for k, lam in enumerate(lambdas):
        half = 0.5 * lam
        sweeps = 0
        exact_left = EXACT_BUDGET
        while True:
            sweeps += 1
            maxd = sweep(range(n_vars), half)
            if np.count_nonzero(beta) >= max_df:
                return k, 0
            if maxd < tol:
                break
            if sweeps >= max_sweeps:
                return k, 1
            act = np.flatnonzero(ever)
            inner = 0
            while True:
                sweeps += 1
                inner += 1
                if sweep(act, half) < tol:
                    break
                if sweeps >= max_sweeps:
                    return k, 1
                if exact_left > 0 and inner % EXACT_EVERY == 1:
                    exact_left -= 1
                    step = _exact_step_numpy(X, y, beta, half, xty, gram)
                    if step is not None:
                        beta[:] = step[0]
                        r[:] = y - X @ beta
                        if step[1]:
                            break
        coefs[:, k] = beta
    return len(lambdas), 0


cd_path = cd_path_loops if USE_NUMBA else cd_path_numpy
