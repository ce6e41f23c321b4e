"""Model-fitting tests: OLS vs a normal-equations oracle, ANOVA decomposition
and lack of fit, information criteria, and Spearman correlation."""

import math

import mpmath
import numpy as np
import pytest

from rsmkit.designs import Factor, central_composite, first_order_design, full_factorial
from rsmkit.modelfit import (RankDeficiencyError, anova, f_sf, fit,
                             information_criteria_from_rss, model_matrix,
                             replicate_groups, spearman, t_sf2)


def unit_factors(k):
    return [Factor(name=f"x{i + 1}", low=-1.0, high=1.0) for i in range(k)]


def normal_equations_fit(X, y):
    """Independent oracle: solve X'X b = X'y directly."""
    return np.linalg.solve(X.T @ X, X.T @ y)


class TestFit:
    def test_exact_linear_data(self):
        design = first_order_design(unit_factors(1), n_c=2)
        y = 1.0 + 2.0 * design.coded_matrix()[:, 0]
        model = fit(design, y, order="FO")
        np.testing.assert_allclose(model.coefficients, [1.0, 2.0], atol=1e-12)
        assert model.r_squared == pytest.approx(1.0)
        np.testing.assert_allclose(model.residuals, 0.0, atol=1e-12)
        assert model.exact_fit

    def test_exact_quadratic(self):
        design, _ = central_composite(unit_factors(1), n_c=2)
        x = design.coded_matrix()[:, 0]
        model = fit(design, x ** 2, order="SO")
        # terms: intercept, x1, x1^2
        np.testing.assert_allclose(model.coefficients, [0.0, 0.0, 1.0], atol=1e-10)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(42)
        design = first_order_design(unit_factors(4), n_c=3)
        X = model_matrix(design.coded_matrix(), "FO")
        for _ in range(20):
            y = rng.normal(0, 1, len(design))
            model = fit(design, y, order="FO")
            beta_oracle = normal_equations_fit(X, y)
            np.testing.assert_allclose(model.coefficients, beta_oracle, atol=1e-8)
            rss = float(np.sum((y - X @ beta_oracle) ** 2))
            ss_tot = float(np.sum((y - y.mean()) ** 2))
            assert model.r_squared == pytest.approx(1 - rss / ss_tot, abs=1e-8)

    def test_so_oracle_on_ccd(self):
        rng = np.random.default_rng(1)
        design, _ = central_composite(unit_factors(3), n_c=3)
        X = model_matrix(design.coded_matrix(), "SO")
        y = rng.normal(0, 1, len(design))
        model = fit(design, y, order="SO")
        np.testing.assert_allclose(model.coefficients, normal_equations_fit(X, y),
                                   atol=1e-8)

    def test_so_coefficient_count(self):
        design, _ = central_composite(unit_factors(3), n_c=3)
        model = fit(design, np.arange(17.0), order="SO")
        k = 3
        assert len(model.coefficients) == 1 + k + k * (k - 1) // 2 + k

    def test_residuals_sum_to_zero(self):
        rng = np.random.default_rng(2)
        design = first_order_design(unit_factors(3), n_c=3)
        model = fit(design, rng.normal(0, 1, len(design)), order="FO")
        assert abs(model.residuals.sum()) < 1e-8

    def test_rank_deficiency_names_terms(self):
        # duplicate a factor column: x2 == x1 exactly
        from rsmkit.designs import Design, DesignPoint
        factors = tuple(unit_factors(2))
        rows = [(-1, -1), (1, 1), (-1, -1), (1, 1), (0, 0)]
        points = tuple(DesignPoint(run_id=i + 1, coded=r, natural=r,
                                   point_type="factorial") for i, r in enumerate(rows))
        design = Design(factors=factors, points=points)
        with pytest.raises(RankDeficiencyError) as err:
            fit(design, np.arange(5.0), order="FO")
        assert err.value.terms  # at least one named term

    def test_too_few_runs_rejected(self):
        design = full_factorial(unit_factors(1))
        with pytest.raises(ValueError):
            fit(design, [1.0, 2.0], order="SO")

    def test_coded_fit_invariant_to_natural_rescaling(self):
        rng = np.random.default_rng(3)
        y = rng.normal(0, 1, 11)
        d1 = first_order_design(unit_factors(3), n_c=3)
        d2 = first_order_design([Factor("a", 100, 900), Factor("b", 0.001, 0.002),
                                 Factor("c", -7, 13)], n_c=3)
        m1 = fit(d1, y, order="FO")
        m2 = fit(d2, y, order="FO")
        np.testing.assert_allclose(m1.coefficients, m2.coefficients, atol=1e-12)

    def test_orthogonal_design_half_effect_and_column_deletion(self):
        rng = np.random.default_rng(4)
        design = full_factorial(unit_factors(3))
        coded = design.coded_matrix()
        y = rng.normal(0, 1, len(design))
        model = fit(design, y, order="FO")
        for j in range(3):
            contrast = y[coded[:, j] == 1].mean() - y[coded[:, j] == -1].mean()
            assert model.coefficients[1 + j] == pytest.approx(contrast / 2, abs=1e-10)
        # dropping another factor's column leaves the estimate unchanged
        sub = full_factorial(unit_factors(2))
        # reuse first two columns: they agree with the k=3 Yates pattern rows 0-3/4-7
        X2 = np.column_stack([np.ones(8), coded[:, 0]])
        beta = normal_equations_fit(X2, y)
        assert model.coefficients[1] == pytest.approx(beta[1], abs=1e-10)

    def test_center_prediction_equals_intercept(self):
        rng = np.random.default_rng(5)
        design = first_order_design(unit_factors(3), n_c=3)
        model = fit(design, rng.normal(0, 1, len(design)), order="FO")
        assert model.predict(np.zeros(3))[0] == pytest.approx(model.coefficients[0])


class TestAnova:
    def test_exact_fit_lof(self):
        design = first_order_design(unit_factors(2), n_c=3)
        y = 2.0 + design.coded_matrix() @ np.array([1.0, -0.5])
        model = fit(design, y, order="FO")
        table = anova(model)
        lof = table.row("lack_of_fit")
        assert lof.ss == pytest.approx(0.0, abs=1e-20)
        assert lof.p == 1.0

    def test_pure_error_two_point_identity(self):
        # two centers differing by delta: SS_pe = delta^2 / 2
        design = first_order_design(unit_factors(2), n_c=2)
        coded = design.coded_matrix()
        delta = 0.3
        y = 1.0 + coded @ np.array([1.0, 2.0]) + np.array([0, 0, 0, 0, 0, delta])
        model = fit(design, y, order="FO")
        table = anova(model)
        assert table.row("pure_error").ss == pytest.approx(delta ** 2 / 2, abs=1e-12)

    def test_no_replicates_flagged(self):
        design = full_factorial(unit_factors(3))
        rng = np.random.default_rng(6)
        model = fit(design, rng.normal(0, 1, 8), order="FO")
        table = anova(model)
        assert not table.lof_available
        assert table.lof_pvalue is None

    def test_decomposition_reconstitutes_total(self):
        rng = np.random.default_rng(7)
        design, _ = central_composite(unit_factors(3), n_c=4)
        for _ in range(10):
            y = rng.normal(0, 1, len(design))
            model = fit(design, y, order="SO")
            table = anova(model)
            parts = sum(r.ss for r in table.rows
                        if r.source in ("FO", "TWI", "PQ", "lack_of_fit", "pure_error"))
            assert parts == pytest.approx(table.ss_total, rel=1e-8)
            dfs = sum(r.df for r in table.rows if r.source != "residual")
            assert dfs == table.df_total

    def test_group_pvalues_match_incomplete_beta_oracle(self):
        def oracle(fval, d1, d2):
            x = d2 / (d2 + d1 * fval)
            return float(mpmath.betainc(d2 / 2, d1 / 2, 0, x, regularized=True))

        rng = np.random.default_rng(8)
        design, _ = central_composite(unit_factors(3), n_c=4)
        for _ in range(5):
            y = rng.normal(0, 1, len(design))
            table = anova(fit(design, y, order="SO"))
            df_resid = table.row("residual").df
            for name in ("FO", "TWI", "PQ"):
                r = table.row(name)
                assert r.p == pytest.approx(oracle(r.f, r.df, df_resid), abs=1e-6)

    def test_lof_degenerate_zero_pure_error(self):
        # deterministic curved response: identical centers, real misfit
        design = first_order_design(unit_factors(2), n_c=3)
        coded = design.coded_matrix()
        y = 1.0 + coded[:, 0] + 0.5 * coded[:, 0] ** 2
        model = fit(design, y, order="FO")
        table = anova(model)
        assert table.lof_available
        assert table.lof_degenerate
        assert table.lof_pvalue == 0.0

    def test_replicate_groups_tolerance(self):
        coded = np.array([[0.0, 0.0], [1e-12, -1e-12], [1.0, 1.0]])
        groups = replicate_groups(coded)
        assert sorted(len(g) for g in groups) == [1, 2]


class TestInformationCriteria:
    def test_doubling_rss_raises_aic_by_n_ln2(self):
        n, p = 20, 4
        aic1, _ = information_criteria_from_rss(n, p, 1.0)
        aic2, _ = information_criteria_from_rss(n, p, 2.0)
        assert aic2 - aic1 == pytest.approx(n * math.log(2.0), abs=1e-12)

    def test_useless_parameter_raises_bic_by_ln_n(self):
        n = 17
        _, bic1 = information_criteria_from_rss(n, 4, 3.3)
        _, bic2 = information_criteria_from_rss(n, 5, 3.3)
        assert bic2 - bic1 == pytest.approx(math.log(n), abs=1e-12)

    def test_zero_rss_sentinel(self):
        aic, bic = information_criteria_from_rss(10, 3, 0.0)
        assert aic == -math.inf and bic == -math.inf

    def test_exact_fit_model_flagged(self):
        design = first_order_design(unit_factors(1), n_c=2)
        y = 1.0 + 2.0 * design.coded_matrix()[:, 0]
        model = fit(design, y, order="FO")
        assert model.aic == -math.inf
        assert model.exact_fit


class TestPValueMachinery:
    def test_f_tail_against_mpmath(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            fval = float(rng.uniform(0.01, 50))
            d1 = int(rng.integers(1, 12))
            d2 = int(rng.integers(1, 40))
            x = d2 / (d2 + d1 * fval)
            expected = float(mpmath.betainc(d2 / 2, d1 / 2, 0, x, regularized=True))
            assert f_sf(fval, d1, d2) == pytest.approx(expected, abs=1e-10)

    def test_t_tail_against_mpmath(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            t = float(rng.uniform(-6, 6))
            df = int(rng.integers(2, 40))
            x = df / (df + t * t)
            expected = float(mpmath.betainc(df / 2, 0.5, 0, x, regularized=True))
            assert t_sf2(t, df) == pytest.approx(expected, abs=1e-10)


class TestSpearman:
    def test_perfect_monotone(self):
        x = np.array([1.0, 2.5, 3.0, 7.0, 9.0])
        rho, p = spearman(x, np.exp(x))
        assert rho == 1.0 and p == 0.0

    def test_perfect_inverse(self):
        x = np.arange(6.0)
        rho, p = spearman(x, -x)
        assert rho == -1.0 and p == 0.0

    def test_hand_computed_rank_correlation(self):
        # brute force: rho = 1 - 6*sum(d^2)/(n(n^2-1)) for tie-free ranks;
        # y=(2,1,4,3,5) has sum(d^2)=4 -> rho=0.8, y=(2,3,1,4,5) has 6 -> 0.7
        rho, _ = spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
        assert rho == pytest.approx(0.8, abs=1e-12)
        rho2, _ = spearman([1, 2, 3, 4, 5], [2, 3, 1, 4, 5])
        assert rho2 == pytest.approx(0.7, abs=1e-12)

    def test_matches_scipy_with_ties(self):
        from scipy import stats
        rng = np.random.default_rng(11)
        x = rng.integers(0, 5, 30).astype(float)
        y = rng.integers(0, 5, 30).astype(float)
        rho, p = spearman(x, y)
        ref = stats.spearmanr(x, y)
        assert rho == pytest.approx(float(ref.statistic), abs=1e-12)
        assert p == pytest.approx(float(ref.pvalue), abs=1e-10)

    def test_strictly_increasing_transforms(self):
        rng = np.random.default_rng(12)
        x = rng.normal(0, 1, 40)
        for g in (np.exp, np.arctan, lambda v: v ** 3, lambda v: 5 * v + 2):
            rho, _ = spearman(x, g(x))
            assert rho == 1.0

    def test_constant_vector_rejected(self):
        with pytest.raises(ValueError):
            spearman([1, 1, 1, 1], [1, 2, 3, 4])

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            spearman([1, 2, 3], [3, 2, 1])
