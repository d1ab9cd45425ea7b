import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipdtune import (
    NORMALIZED_PLANT,
    PiGains,
    dominant_poles,
    model_error_map,
    pade_closed_loop_poles,
    pade_coeffs,
    root_chain,
)
from ipdtune.pade import ALL_METHODS, error_map_to_csv

from conftest import KNOWN_OPTIMUM


class TestPadeCoeffs:
    def test_second_order_values(self):
        rd = pade_coeffs(2, 1.0)
        assert rd.numerator == (1.0, -0.5, 1.0 / 12.0)
        assert rd.denominator == (1.0, 0.5, 1.0 / 12.0)

    def test_third_order_values(self):
        rd = pade_coeffs(3, 2.0)
        assert rd.numerator == (1.0, -1.0, 0.4, -8.0 / 120.0)
        assert rd.denominator == (1.0, 1.0, 0.4, 8.0 / 120.0)

    def test_unit_value_at_origin(self):
        for order in (2, 3):
            assert pade_coeffs(order, 1.3).evaluate(0.0) == pytest.approx(1.0)

    def test_numerator_mirrors_denominator(self):
        for order in (2, 3):
            rd = pade_coeffs(order, 0.7)
            for k, (n, d) in enumerate(zip(rd.numerator, rd.denominator)):
                assert n == pytest.approx((-1.0) ** k * d)

    def test_matches_exponential_near_origin(self):
        rd = pade_coeffs(2, 1.0)
        assert rd.evaluate(0.1) == pytest.approx(math.exp(-0.1), abs=1e-7)

    def test_order_validation(self):
        with pytest.raises(ValueError):
            pade_coeffs(4, 1.0)
        with pytest.raises(ValueError):
            pade_coeffs(2, 0.0)

    @given(w=st.floats(min_value=-50.0, max_value=50.0, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_all_pass_on_imaginary_axis(self, w):
        for order in (2, 3):
            val = pade_coeffs(order, 1.0).evaluate(complex(0.0, w))
            assert abs(val) == pytest.approx(1.0, abs=1e-12)


class TestClosedLoopPoles:
    def test_degree(self):
        assert len(pade_closed_loop_poles(NORMALIZED_PLANT, KNOWN_OPTIMUM, 2)) == 4
        assert len(pade_closed_loop_poles(NORMALIZED_PLANT, KNOWN_OPTIMUM, 3)) == 5

    def test_dominant_root_matches_refined_abscissa(self):
        ref = dominant_poles(NORMALIZED_PLANT, KNOWN_OPTIMUM, 20).abscissa
        roots = pade_closed_loop_poles(NORMALIZED_PLANT, KNOWN_OPTIMUM, 3)
        assert roots[0].real == pytest.approx(ref, abs=1e-3)

    def test_open_loop_roots(self):
        roots = pade_closed_loop_poles(NORMALIZED_PLANT, PiGains(0.0, 0.0), 2)
        rd = pade_coeffs(2, 1.0)
        expected = list(np.roots(rd.denominator[::-1])) + [0.0, 0.0]
        got = sorted(roots, key=lambda z: (z.real, z.imag))
        want = sorted(expected, key=lambda z: (z.real, z.imag))
        for g, w in zip(got, want):
            assert g == pytest.approx(w, abs=1e-9)

    def test_conjugate_closure(self):
        roots = pade_closed_loop_poles(NORMALIZED_PLANT, PiGains(0.7, 0.18), 3)
        for r in roots:
            if abs(r.imag) > 1e-9:
                assert min(abs(np.conj(r) - q) for q in roots) < 1e-9

    def test_sorted_by_real_part(self):
        roots = pade_closed_loop_poles(NORMALIZED_PLANT, PiGains(0.6, 0.1), 3)
        res = [r.real for r in roots]
        assert res == sorted(res, reverse=True)


@pytest.fixture(scope="module")
def emap():
    return model_error_map(
        NORMALIZED_PLANT,
        np.linspace(0.05, 1.45, 14),
        np.linspace(0.01, 0.38, 12),
        methods=ALL_METHODS,
        segments=20,
    )


class TestErrorMap:

    def test_unstable_cells_masked(self, emap):
        assert emap.unstable.any()
        for m in ALL_METHODS:
            assert np.all(np.isnan(emap.errors[m][emap.unstable]))
        # high-ki, low-kp corner is beyond the boundary
        assert emap.unstable[-1, 0]

    def test_second_order_accuracy(self, emap):
        vals = emap.errors["semi-discrete"][~emap.unstable]
        vals = vals[np.isfinite(vals)]
        assert np.percentile(vals, 95) < 1e-3

    def test_method_ordering_by_worst_case(self, emap):
        stable = ~emap.unstable
        worst = {m: np.nanmax(emap.errors[m][stable]) for m in ALL_METHODS}
        assert worst["pade-3"] < worst["semi-discrete"] < worst["pade-2"]
        assert worst["first-order"] > 10.0 * worst["semi-discrete"]

    def test_aggregate_advantage_over_pade2(self, emap):
        # The second-order discrete model beats the second-order rational
        # approximation in the aggregate (worst case and median), though not
        # cell-by-cell: near slow dominant poles the rational model is almost
        # exact.
        stable = ~emap.unstable
        semi = emap.errors["semi-discrete"][stable]
        p2 = emap.errors["pade-2"][stable]
        assert np.nanmax(semi) < np.nanmax(p2)
        assert np.nanmedian(semi) < np.nanmedian(p2)

    def test_csv_sentinel(self, emap, tmp_path):
        path = tmp_path / "errors.csv"
        error_map_to_csv(emap, path)
        text = path.read_text().splitlines()
        assert text[0] == "kp,ki,method,delta_max"
        assert sum(1 for line in text if line.endswith(",unstable")) == int(emap.unstable.sum()) * len(ALL_METHODS)

    def test_method_validation(self):
        with pytest.raises(ValueError):
            model_error_map(NORMALIZED_PLANT, [0.5], [0.1], methods=("zoh",))


class TestFullSpectrumFidelity:
    def test_discrete_spectrum_tracks_more_chain_roots_than_pade(self):
        from ipdtune import build_model, eigenvalues, map_to_continuous

        chain = [p.value for p in root_chain(NORMALIZED_PLANT, KNOWN_OPTIMUM, count=7)]
        assert len(chain) >= 5
        model = build_model(NORMALIZED_PLANT, KNOWN_OPTIMUM, 20)
        mapped = [map_to_continuous(lam, model.step).value for lam in eigenvalues(model) if lam != 0]
        pade_roots = list(pade_closed_loop_poles(NORMALIZED_PLANT, KNOWN_OPTIMUM, 3))
        within = lambda root, pool: min(abs(root - q) for q in pool) < 0.05
        semi_hits = sum(1 for r in chain if within(r, mapped))
        pade_hits = sum(1 for r in chain if within(r, pade_roots))
        assert semi_hits > pade_hits
