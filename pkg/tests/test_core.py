import numpy as np
import pytest

from acsel.core import (REAL_DATA_GRID, ZetaVector, acsel_run, acsel_sweep, check_grid, confidence_from_masks,
                        confidence_indicators, fit_groups, naive_acsel, resample_design, select_at_threshold)
from acsel.errors import NoConvergence, ValidationError
from acsel.geometry import Dataset, embed_columns, phi_forward, standardize
from acsel.grouping import GroupMap, correlation, group_naive, make_groups
from acsel.seeding import derive, rng_for
from acsel.selectors import Selector


def random_sd(n=20, p=8, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    return standardize(Dataset(x, x[:, 0] - x[:, 1] + rng.normal(size=n)))


def correlated_sd(n=30, p=5, rho=0.95, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, 1))
    x = np.sqrt(rho) * z + np.sqrt(1 - rho) * rng.normal(size=(n, p))
    return standardize(Dataset(x, x.sum(axis=1) + rng.normal(size=n)))


def test_resample_at_one_is_identity():
    sd = random_sd()
    gm = group_naive(correlation(sd), 1.0)
    out = resample_design(sd, embed_columns(sd), gm, rng_for(0))
    assert np.array_equal(out.xs, sd.xs)


def test_resample_duplicate_pair_is_point_mass():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(12, 3))
    x = np.column_stack([x, x[:, 0]])
    sd = standardize(Dataset(x, rng.normal(size=12)))
    gm = group_naive(correlation(sd), 1.0)
    assert gm.groups[0].tolist() == [0, 3]
    out = resample_design(sd, embed_columns(sd), gm, rng_for(1))
    np.testing.assert_allclose(out.xs, sd.xs, atol=1e-12)


def test_resample_columns_centered_unit_norm():
    sd = correlated_sd()
    out = resample_design(sd, embed_columns(sd), group_naive(correlation(sd), 0.5), rng_for(2))
    assert not np.array_equal(out.xs, sd.xs)
    assert np.abs(out.xs.mean(axis=0)).max() < 1e-12
    np.testing.assert_allclose(np.linalg.norm(out.xs, axis=0), 1.0, atol=1e-12)
    np.testing.assert_array_equal(out.ys, sd.ys)


def test_group_of_five_draws_track_mean_direction():
    sd = correlated_sd(n=40, rho=0.95, seed=3)
    c = correlation(sd)
    assert c[np.triu_indices(5, 1)].min() > 0.8
    emb = embed_columns(sd)
    gm = group_naive(c, 0.5)
    fit = fit_groups(emb, gm)
    mean_dir = emb.z.sum(axis=1)
    mean_dir /= np.linalg.norm(mean_dir)
    cos = [phi_forward(resample_design(sd, emb, gm, rng_for(4, b), fit).xs[:, 2]) @ mean_dir
           for b in range(200)]
    assert np.mean(cos) > 0.8


def test_anticorrelated_members_are_sign_aligned():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(25, 1))
    x = np.column_stack([x, -x + 0.05 * rng.normal(size=(25, 1))])
    sd = standardize(Dataset(x, rng.normal(size=25)))
    emb = embed_columns(sd)
    fit = fit_groups(emb, group_naive(correlation(sd), 0.5))
    assert fit.mu[:, 0] @ emb.z[:, 0] > 0.99
    assert fit.mu[:, 1] @ emb.z[:, 1] > 0.99
    assert np.all(fit.kappa > 100)


@pytest.mark.parametrize("spec", ["lasso:bic", "stepwise:bic"])
def test_c0_one_equals_base_selector(spec):
    sel = Selector.parse(spec)
    for seed in range(5):
        sd = random_sd(seed=seed)
        gm = group_naive(correlation(sd), 1.0)
        for b in (1, 10):
            z = acsel_run(sd, sel, gm, b, seed)
            np.testing.assert_array_equal(z.zeta, sel(sd).astype(float))


def test_b_one_gives_binary_vector():
    sd = correlated_sd()
    z = acsel_run(sd, Selector.parse("lasso:bic"), group_naive(correlation(sd), 0.5), 1, 7)
    assert set(np.unique(z.zeta)) <= {0.0, 1.0}


def test_zeta_multiples_of_one_over_b():
    sd = correlated_sd(seed=2)
    z = acsel_run(sd, Selector.parse("lasso:aicc"), group_naive(correlation(sd), 0.6), 20, 3)
    np.testing.assert_allclose(z.zeta * 20, np.round(z.zeta * 20), atol=1e-12)
    np.testing.assert_array_equal(z.counts, np.round(z.zeta * 20))


def test_same_seed_same_zeta():
    sd = correlated_sd(seed=4)
    gm = group_naive(correlation(sd), 0.5)
    sel = Selector.parse("lasso:bic")
    a = acsel_run(sd, sel, gm, 100, 11)
    b = acsel_run(sd, sel, gm, 100, 11)
    np.testing.assert_array_equal(a.zeta, b.zeta)


def test_rounds_are_order_independent():
    sd = correlated_sd(seed=5)
    gm = group_naive(correlation(sd), 0.5)
    sel = Selector.parse("lasso:bic")
    emb = embed_columns(sd)
    fit = fit_groups(emb, gm)
    per_round = [sel(resample_design(sd, emb, gm, rng_for(9, b), fit)) for b in reversed(range(15))]
    z = acsel_run(sd, sel, gm, 15, 9)
    np.testing.assert_array_equal(z.counts, np.sum(per_round, axis=0))


def test_failed_round_retried_once():
    sd = correlated_sd()
    gm = group_naive(correlation(sd), 0.5)
    calls = []

    def flaky(design):
        calls.append(1)
        if len(calls) == 1:
            raise NoConvergence(1.0, 5)
        return np.ones(design.n_vars, dtype=bool)

    z = acsel_run(sd, flaky, gm, 3, 0)
    assert len(calls) == 4 and np.all(z.zeta == 1.0)

    def broken(design):
        raise NoConvergence(1.0, 5)

    with pytest.raises(NoConvergence):
        acsel_run(sd, broken, gm, 3, 0)


def test_acsel_run_rejects_zero_b():
    sd = random_sd()
    with pytest.raises(ValidationError):
        acsel_run(sd, Selector.parse("lasso:bic"), group_naive(correlation(sd), 1.0), 0, 0)


def test_select_at_threshold_examples():
    z = np.array([1.0, 0.99, 0.5])
    assert select_at_threshold(z, 1.0).tolist() == [True, False, False]
    assert select_at_threshold(z, 0.95).tolist() == [True, True, False]
    assert not select_at_threshold(np.array([0.9, 0.2]), 1.0).any()
    with pytest.raises(ValidationError):
        select_at_threshold(z, 0.0)


def test_select_at_threshold_uses_exact_counts():
    # 95/100 against 0.95 must pass despite 0.95 * 100 rounding
    z = ZetaVector(np.array([0.95, 0.94]), 100, np.array([95, 94]))
    assert select_at_threshold(z, 0.95).tolist() == [True, False]
    z = ZetaVector(np.array([475 / 500]), 500, np.array([475]))
    assert select_at_threshold(z, 0.95).tolist() == [True]


def test_real_data_grid():
    assert len(REAL_DATA_GRID) == 14
    assert REAL_DATA_GRID[0] == 1.0 and REAL_DATA_GRID[-1] == 0.35
    check_grid(REAL_DATA_GRID)


@pytest.mark.parametrize("bad", [[0.9, 0.8], [1.0, 1.0], [1.0, 0.5, 0.7], [], [1.0, -0.1]])
def test_grid_validation(bad):
    with pytest.raises(ValidationError):
        check_grid(bad)


def test_sweep_grid_one_is_base_selector():
    sd = random_sd(seed=3)
    sel = Selector.parse("lasso:gcv")
    sr = acsel_sweep(sd, sel, [1.0], 10, 1.0, 0)
    np.testing.assert_array_equal(sr.masks[0], sel(sd))


def test_sweep_uses_derived_stream_per_point():
    sd = correlated_sd(seed=6)
    sel = Selector.parse("lasso:bic")
    sr = acsel_sweep(sd, sel, [1.0, 0.7, 0.5], 10, 1.0, 21)
    corr = correlation(sd)
    z = acsel_run(sd, sel, make_groups(corr, 0.5, "naive"), 10, derive(21, 2))
    np.testing.assert_array_equal(sr.zeta[2], z.zeta)
    assert sr.masks.shape == (3, 5)


def test_confidence_examples():
    grid = np.array(REAL_DATA_GRID)
    masks = np.zeros((14, 4), dtype=bool)
    masks[:, 0] = True                # down to 0.35
    masks[0, 1] = True                # only at 1
    masks[: list(grid).index(0.45) + 1, 2] = True
    gamma = confidence_from_masks(grid, masks)
    np.testing.assert_allclose(gamma, [0.65, 0.0, 0.55, 0.0], atol=1e-12)


def test_confidence_from_sweep_result():
    sd = random_sd(seed=1)
    sr = acsel_sweep(sd, Selector.parse("lasso:bic"), [1.0, 0.8], 5, 1.0, 0)
    gamma = confidence_indicators(sr)
    assert set(np.round(gamma, 10)) <= {0.0, 0.2}


def test_naive_acsel_examples():
    sd = random_sd()
    sel = Selector.parse("lasso:bic")
    base = sel(sd)
    singletons = group_naive(correlation(sd), 1.0)
    np.testing.assert_array_equal(naive_acsel(sd, sel, singletons), base)
    groups = [np.array([0, 1, 2])] * 3 + [np.array([i]) for i in range(3, 8)]
    gm = GroupMap(0.5, groups, "naive")
    mask = np.zeros(8, dtype=bool)
    mask[[0, 4]] = True
    assert naive_acsel(sd, sel, gm, base_mask=mask).tolist() == [False] * 4 + [True] + [False] * 3
    everything = group_naive(correlation(sd), 0.0)
    assert not naive_acsel(sd, sel, everything).any()
