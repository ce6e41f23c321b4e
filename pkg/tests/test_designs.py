"""Design-generator tests: Yates ordering, fractional factorial identities,
alias structure, orthogonality, CCD rotatability, unit conversion."""

import itertools

import numpy as np
import pytest

from rsmkit.designs import (Factor, alias_structure, central_composite,
                            code_to_natural, design_from_frame,
                            first_order_design, fractional_factorial,
                            full_factorial, natural_to_code, read_design_csv)


def unit_factors(k):
    return [Factor(name=f"x{i + 1}", low=-1.0, high=1.0) for i in range(k)]


def paper_factors():
    names = ["overhang_north", "overhang_south", "overhang_east", "overhang_west",
             "wwr_north", "wwr_south", "wwr_east", "wwr_west"]
    return [Factor(name=n, low=0.5, high=2.5, units="m") if "overhang" in n
            else Factor(name=n, low=5.0, high=40.0, units="%") for n in names]


class TestFullFactorial:
    def test_k2_standard_order(self):
        design = full_factorial(unit_factors(2))
        rows = [tuple(p.coded) for p in design.points]
        assert rows == [(-1, -1), (1, -1), (-1, 1), (1, 1)]

    def test_k8_run_count(self):
        assert len(full_factorial(unit_factors(8))) == 256

    def test_k3_columns_balanced(self):
        coded = full_factorial(unit_factors(3)).coded_matrix()
        for j in range(3):
            assert np.sum(coded[:, j] == -1) == 4
            assert np.sum(coded[:, j] == 1) == 4

    def test_empty_factor_list_rejected(self):
        with pytest.raises(ValueError):
            full_factorial([])

    def test_deterministic(self):
        a = full_factorial(unit_factors(4)).coded_matrix()
        b = full_factorial(unit_factors(4)).coded_matrix()
        assert np.array_equal(a, b)


class TestFractionalFactorial:
    def test_paper_quarter_fraction(self):
        design, spec = fractional_factorial(paper_factors(), p=2,
                                            generators=["G=ABCD", "H=ABEF"])
        assert len(design) == 64
        assert spec.resolution == 5
        assert set(spec.defining_relation) == {"ABCDG", "ABEFH", "CDEFGH"}

    def test_default_generators_for_k8_p2(self):
        _, spec = fractional_factorial(paper_factors(), p=2)
        assert spec.generators == ("G=ABCD", "H=ABEF")

    def test_2_3_1_resolution_iii(self):
        design, spec = fractional_factorial(unit_factors(3), p=1, generators=["C=AB"])
        assert len(design) == 4
        assert spec.resolution == 3

    def test_p0_equals_full_factorial(self):
        design, spec = fractional_factorial(unit_factors(2), p=0)
        full = full_factorial(unit_factors(2))
        assert np.array_equal(design.coded_matrix(), full.coded_matrix())

    def test_generator_identities_hold(self):
        design, _ = fractional_factorial(paper_factors(), p=2,
                                         generators=["G=ABCD", "H=ABEF"])
        c = design.coded_matrix()
        assert np.array_equal(c[:, 6], c[:, 0] * c[:, 1] * c[:, 2] * c[:, 3])
        assert np.array_equal(c[:, 7], c[:, 0] * c[:, 1] * c[:, 4] * c[:, 5])

    def test_duplicate_generator_target_rejected(self):
        with pytest.raises(ValueError):
            fractional_factorial(unit_factors(5), p=2, generators=["E=AB", "E=AC"])

    def test_generator_referencing_generated_factor_rejected(self):
        with pytest.raises(ValueError):
            fractional_factorial(unit_factors(5), p=2, generators=["D=AB", "E=AD"])

    @pytest.mark.parametrize("k,p,gens", [
        (4, 1, ["D=ABC"]),
        (5, 1, ["E=ABCD"]),
        (5, 2, ["D=AB", "E=AC"]),
        (6, 2, ["E=ABC", "F=BCD"]),
        (7, 3, ["E=ABC", "F=BCD", "G=ACD"]),
        (8, 2, ["G=ABCD", "H=ABEF"]),
        (8, 3, ["F=ABC", "G=ABD", "H=BCDE"]),
    ])
    def test_resolution_matches_bruteforce_closure(self, k, p, gens):
        # oracle: enumerate all 2^p - 1 nonempty products of defining words
        _, spec = fractional_factorial(unit_factors(k), p=p, generators=gens)
        letters = "ABCDEFGHJKLMNOPQRSTUVWXYZ"[:k]
        words = []
        for g in gens:
            target, body = g.split("=")
            words.append(frozenset(body) | frozenset(target))
        lengths = []
        for mask in range(1, 2 ** p):
            prod = frozenset()
            for i in range(p):
                if mask >> i & 1:
                    prod = prod ^ words[i]
            lengths.append(len(prod))
        assert spec.resolution == min(lengths)
        assert len(spec.defining_relation) == 2 ** p - 1

    def test_generator_identities_random_specs(self):
        rng = np.random.default_rng(7)
        for k, p, gens in [(5, 1, ["E=ABC"]), (6, 2, ["E=ABCD", "F=ABC"]),
                           (7, 2, ["F=ABCDE", "G=ABC"])]:
            design, spec = fractional_factorial(unit_factors(k), p=p, generators=gens)
            c = design.coded_matrix()
            names = "ABCDEFGHJ"[:k]
            for g in gens:
                target, body = g.split("=")
                prod = np.ones(len(design))
                for ch in body:
                    prod = prod * c[:, names.index(ch)]
                assert np.array_equal(prod, c[:, names.index(target)])


class TestAliasStructure:
    def test_2_3_1_aliases(self):
        _, spec = fractional_factorial(unit_factors(3), p=1, generators=["C=AB"])
        amap = alias_structure(spec, max_order=1)
        assert amap == {"A": {"BC"}, "B": {"AC"}, "C": {"AB"}}

    def test_resolution_v_main_effects_alias_order_ge_4(self):
        _, spec = fractional_factorial(paper_factors(), p=2)
        amap = alias_structure(spec, max_order=1)
        for eff, aliases in amap.items():
            assert all(len(a) >= 4 for a in aliases), (eff, aliases)

    def test_full_factorial_no_aliases(self):
        _, spec = fractional_factorial(unit_factors(3), p=0)
        amap = alias_structure(spec, max_order=2)
        assert all(not v for v in amap.values())

    def test_resolution_consistency_brute_force(self):
        # a design has resolution R iff no order-o effect is aliased with an
        # effect of order < R - o
        _, spec = fractional_factorial(paper_factors(), p=2)
        R = spec.resolution
        amap = alias_structure(spec, max_order=3)
        for eff, aliases in amap.items():
            o = len(eff)
            for a in aliases:
                assert len(a) >= R - o, (eff, a)


class TestFirstOrderDesign:
    def test_run_counts(self):
        assert len(first_order_design(unit_factors(3), n_c=3)) == 11
        assert len(first_order_design(unit_factors(3), n_c=5)) == 13
        assert len(first_order_design(unit_factors(2), n_c=1)) == 5

    def test_orthogonality(self):
        design = first_order_design(unit_factors(2), n_c=1)
        X = np.column_stack([np.ones(len(design)), design.coded_matrix()])
        XtX = X.T @ X
        assert np.allclose(XtX, np.diag(np.diag(XtX)))

    def test_point_types(self):
        design = first_order_design(unit_factors(3), n_c=3)
        types = design.point_types()
        assert types[:8] == ["factorial"] * 8
        assert types[8:] == ["center"] * 3

    def test_centers_all_zero(self):
        design = first_order_design(unit_factors(3), n_c=3)
        assert np.all(design.coded_matrix()[8:] == 0.0)


class TestCentralComposite:
    def test_k3_rotatable(self):
        design, spec = central_composite(unit_factors(3), n_c=3)
        assert len(design) == 17
        assert spec.alpha == pytest.approx(8 ** 0.25, abs=1e-12)
        assert spec.alpha == pytest.approx(1.6818, abs=1e-4)

    def test_k2_rotatable_alpha_sqrt2(self):
        design, spec = central_composite(unit_factors(2), n_c=3)
        assert len(design) == 11
        assert spec.alpha == pytest.approx(np.sqrt(2.0), abs=1e-12)

    def test_face_centered_inside_cube(self):
        design, spec = central_composite(unit_factors(4), n_c=3,
                                         alpha_mode="face_centered")
        assert spec.alpha == 1.0
        assert np.max(np.abs(design.coded_matrix())) <= 1.0

    def test_point_type_counts(self):
        design, _ = central_composite(unit_factors(3), n_c=4)
        types = design.point_types()
        assert types.count("factorial") == 8
        assert types.count("axial") == 6
        assert types.count("center") == 4

    def test_rotatability_prediction_variance(self):
        # unit-error-variance prediction variance must match at equal radius
        from rsmkit.modelfit import model_matrix
        design, spec = central_composite(unit_factors(3), n_c=3)
        X = model_matrix(design.coded_matrix(), "SO")
        XtX_inv = np.linalg.inv(X.T @ X)

        def pred_var(x):
            f = model_matrix(np.atleast_2d(x), "SO")[0]
            return f @ XtX_inv @ f

        axis = np.array([1.0, 0.0, 0.0])
        diag = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
        assert pred_var(axis) == pytest.approx(pred_var(diag), abs=1e-8)
        # and a non-rotatable CCD fails the same check
        design2, _ = central_composite(unit_factors(3), n_c=3,
                                       alpha_mode="custom", alpha=1.2)
        X2 = model_matrix(design2.coded_matrix(), "SO")
        inv2 = np.linalg.inv(X2.T @ X2)

        def pred_var2(x):
            f = model_matrix(np.atleast_2d(x), "SO")[0]
            return f @ inv2 @ f

        assert abs(pred_var2(axis) - pred_var2(diag)) > 1e-6


class TestUnitConversion:
    def test_endpoint(self):
        f = [Factor("overhang", 0.5, 2.5, "m")]
        assert code_to_natural(f, [1.0])[0] == pytest.approx(2.5)

    def test_midpoint(self):
        f = [Factor("wwr", 5.0, 40.0, "%")]
        assert code_to_natural(f, [0.0])[0] == pytest.approx(22.5)

    def test_paper_recenter_value(self):
        # overhang 2.958 m on [0.5, 2.5] -> (2.958 - 1.5) / 1.0 coded
        f = [Factor("overhang", 0.5, 2.5, "m")]
        assert natural_to_code(f, [2.958])[0] == pytest.approx(1.458, abs=1e-12)

    def test_round_trip_random(self):
        rng = np.random.default_rng(11)
        factors = [Factor(f"f{i}", low=float(lo), high=float(lo + span))
                   for i, (lo, span) in enumerate(zip(rng.normal(0, 10, 6),
                                                      rng.uniform(0.1, 30, 6)))]
        for _ in range(50):
            x = rng.uniform(-3, 3, 6)
            back = natural_to_code(factors, code_to_natural(factors, x))
            assert np.allclose(back, x, atol=1e-12)

    def test_zero_half_range_rejected(self):
        with pytest.raises(ValueError):
            Factor("bad", 1.0, 1.0)


class TestDesignPointInvariants:
    def test_natural_consistent_with_coded(self):
        design, _ = central_composite(paper_factors()[:3], n_c=3)
        for p in design.points:
            expected = code_to_natural(design.factors, np.array(p.coded))
            np.testing.assert_allclose(p.natural, expected, rtol=1e-12)

    def test_run_ids_contiguous(self):
        design = first_order_design(unit_factors(3), n_c=3)
        assert [p.run_id for p in design.points] == list(range(1, 12))


class TestCsvRoundTrip:
    def test_natural_and_coded_variants(self, tmp_path):
        design, _ = central_composite(paper_factors()[:3], n_c=3)
        out = tmp_path / "design.csv"
        design.to_csv(out)
        assert out.exists()
        assert (tmp_path / "design.coded.csv").exists()
        back = read_design_csv(out, design.factors)
        np.testing.assert_allclose(back.coded_matrix(), design.coded_matrix(),
                                   atol=1e-9)
        assert back.point_types() == design.point_types()

    def test_header_schema(self, tmp_path):
        design = full_factorial(paper_factors()[:2])
        out = tmp_path / "d.csv"
        design.to_csv(out)
        header = out.read_text().splitlines()[0]
        assert header == "run_id,pt_type,overhang_north,overhang_south"
