import math

import numpy as np
import pytest

from ipdtune import (
    NORMALIZED_PLANT,
    CrossoverError,
    PiGains,
    PlantParams,
    char_fn,
    loop_magnitude,
    loop_phase,
    loop_response,
    margin_grid,
    margins,
    simc,
    spectral_abscissa,
    stability_boundary,
)

from conftest import KNOWN_OPTIMUM


class TestLoopResponse:
    def test_rejects_zero_frequency(self):
        with pytest.raises(ValueError):
            loop_response(0.0, NORMALIZED_PLANT, KNOWN_OPTIMUM)

    def test_unit_magnitude_at_gain_crossover(self):
        val = loop_response(0.4891, NORMALIZED_PLANT, KNOWN_OPTIMUM)
        assert abs(val) == pytest.approx(1.0, abs=1e-3)

    def test_phase_at_phase_crossover(self):
        ph = math.degrees(loop_phase(1.4531, NORMALIZED_PLANT, KNOWN_OPTIMUM))
        assert ph == pytest.approx(-180.0, abs=0.1)

    def test_pure_proportional_phase(self):
        gains = PiGains(0.8, 0.0)
        for w in (0.3, 1.0, 2.5):
            assert loop_phase(w, NORMALIZED_PLANT, gains) == pytest.approx(-math.pi / 2.0 - w, rel=1e-12)

    def test_magnitude_formula(self):
        w = np.array([0.2, 0.7, 2.0])
        vals = loop_response(w, NORMALIZED_PLANT, KNOWN_OPTIMUM)
        np.testing.assert_allclose(np.abs(vals), loop_magnitude(w, NORMALIZED_PLANT, KNOWN_OPTIMUM), rtol=1e-12)

    def test_phase_consistent_with_complex_value(self):
        for w in (0.2, 0.7, 1.3):
            val = loop_response(w, NORMALIZED_PLANT, KNOWN_OPTIMUM)
            wrapped = loop_phase(w, NORMALIZED_PLANT, KNOWN_OPTIMUM) % (2.0 * math.pi)
            assert math.cos(wrapped) == pytest.approx(val.real / abs(val), abs=1e-12)
            assert math.sin(wrapped) == pytest.approx(val.imag / abs(val), abs=1e-12)


class TestMargins:
    def test_reference_values_at_optimum(self):
        rep = margins(NORMALIZED_PLANT, KNOWN_OPTIMUM)
        assert rep.gain_crossover == pytest.approx(0.4891, abs=1e-3)
        assert rep.phase_margin_deg == pytest.approx(42.6, abs=0.2)
        assert rep.phase_crossover == pytest.approx(1.4531, abs=1e-3)
        assert rep.gain_margin == pytest.approx(3.13, abs=0.02)
        assert rep.gain_margin_db == pytest.approx(9.9, abs=0.1)

    def test_report_invariants_post_hoc(self):
        rep = margins(NORMALIZED_PLANT, KNOWN_OPTIMUM)
        assert abs(loop_magnitude(rep.gain_crossover, NORMALIZED_PLANT, KNOWN_OPTIMUM) - 1.0) < 1e-9
        ph = math.degrees(loop_phase(rep.phase_crossover, NORMALIZED_PLANT, KNOWN_OPTIMUM))
        assert abs((ph + 180.0) % 360.0) < 1e-6 or abs((ph + 180.0) % 360.0 - 360.0) < 1e-6
        assert rep.gain_margin_db == pytest.approx(20.0 * math.log10(rep.gain_margin), rel=1e-12)

    def test_proportional_only_limit(self):
        gains = PiGains(math.pi / 2.0 * 0.9999, 1e-9)
        rep = margins(NORMALIZED_PLANT, gains)
        assert rep.phase_crossover == pytest.approx(math.pi / 2.0, abs=1e-5)
        assert rep.gain_margin == pytest.approx(1.0 / 0.9999, abs=1e-4)

    def test_gain_scaling_homogeneity(self):
        base = margins(NORMALIZED_PLANT, KNOWN_OPTIMUM)
        for c in (0.5, 2.0):
            scaled = margins(NORMALIZED_PLANT, PiGains(c * KNOWN_OPTIMUM.kp, c * KNOWN_OPTIMUM.ki))
            assert scaled.gain_margin == pytest.approx(base.gain_margin / c, rel=1e-9)
            assert scaled.phase_crossover == pytest.approx(base.phase_crossover, rel=1e-9)

    def test_zero_gains_have_no_crossover(self):
        with pytest.raises(CrossoverError) as info:
            margins(NORMALIZED_PLANT, PiGains(0.0, 0.0))
        assert info.value.missing == "gain"

    def test_low_ratio_gains_still_find_phase_crossing(self):
        # kp/ki < L puts the first -180 deg crossing a full turn down.
        rep = margins(NORMALIZED_PLANT, PiGains(0.05, 0.2))
        ph = loop_phase(rep.phase_crossover, NORMALIZED_PLANT, PiGains(0.05, 0.2))
        assert math.cos(ph) == pytest.approx(-1.0, abs=1e-9)


class TestMarginGrid:
    def test_reference_cells(self):
        simc_cons = simc(NORMALIZED_PLANT, "conservative")
        kp_ax = np.sort([simc_cons.kp, KNOWN_OPTIMUM.kp, 1.2])
        ki_ax = np.sort([simc_cons.ki, KNOWN_OPTIMUM.ki, 0.55])
        grid = margin_grid(NORMALIZED_PLANT, kp_ax, ki_ax)
        kx = {v: i for i, v in enumerate(kp_ax)}
        ky = {v: i for i, v in enumerate(ki_ax)}
        pm_opt = grid.pm_deg[ky[KNOWN_OPTIMUM.ki], kx[KNOWN_OPTIMUM.kp]]
        gm_opt = grid.gm[ky[KNOWN_OPTIMUM.ki], kx[KNOWN_OPTIMUM.kp]]
        assert pm_opt > 40.0 and gm_opt > 3.0
        assert grid.stable[ky[KNOWN_OPTIMUM.ki], kx[KNOWN_OPTIMUM.kp]]
        gm_cons = grid.gm[ky[simc_cons.ki], kx[simc_cons.kp]]
        assert gm_cons > gm_opt
        # (1.2, 0.55) sits beyond the boundary (limit ki = 0.483 there) in the
        # single-crossover regime kp/ki > L, where GM < 1 marks instability
        assert not grid.stable[ky[0.55], kx[1.2]]
        assert grid.gm[ky[0.55], kx[1.2]] < 1.0


class TestStabilityBoundary:
    def test_recovers_ultimate_gain_endpoint(self):
        w_end = math.pi / 2.0 * (1.0 - 1e-12)
        pts = stability_boundary(NORMALIZED_PLANT, [w_end])
        assert pts[0, 0] == pytest.approx(math.pi / 2.0, abs=1e-9)
        assert pts[0, 1] == pytest.approx(0.0, abs=1e-9)

    def test_points_are_characteristic_zeros(self):
        ws = np.linspace(0.1, 1.5, 25)
        pts = stability_boundary(NORMALIZED_PLANT, ws)
        for w, (kp, ki) in zip(ws, pts):
            val = char_fn(complex(0.0, w), NORMALIZED_PLANT, PiGains(kp, ki))
            assert abs(val) < 1e-12

    def test_abscissa_sign_flips_across_boundary(self):
        ws = [0.3, 0.6, 0.9, 1.2, 1.5]
        pts = stability_boundary(NORMALIZED_PLANT, ws)
        for (kp, ki) in pts:
            inside = spectral_abscissa(NORMALIZED_PLANT, PiGains(kp, 0.99 * ki), 20)
            outside = spectral_abscissa(NORMALIZED_PLANT, PiGains(kp, 1.01 * ki), 20)
            assert inside < 0.0 < outside

    def test_sample_validation(self):
        with pytest.raises(ValueError):
            stability_boundary(NORMALIZED_PLANT, [0.0, 0.5])
        with pytest.raises(ValueError):
            stability_boundary(NORMALIZED_PLANT, [math.pi / 2.0])
        with pytest.raises(ValueError):
            stability_boundary(PlantParams(1.0, 2.0), [1.0])
