"""Evolution map on radial grids: states, contours, probes.

Grid note: plain linear grids stop at kmax = 6 and miss the scattered
wave's slowly decaying tail mass at the few-1e-4 level, which is exactly
what the norm assertions here are trying to see through. Norm checks use
the audit grid (linear core plus log tail to k = 300) for that reason.
"""
import numpy as np
import pytest

from nltdyn import (
    BoundaryData,
    ContourSpec,
    ContourTruncationWarning,
    GridSupportError,
    ModelParams,
    RadialState,
    ReducedAmplitude,
    appendix_d_probe,
    apply_evolution,
    composition_residual,
    continuity_probe,
    make_appendix_d_state,
    make_gaussian_packet,
    matrix_element_R,
)
from nltdyn.checks import norm_audit_grid

GRID = (1e-3, 6.0, 1200)


@pytest.fixture(scope="module")
def packet():
    return make_gaussian_packet(1.2, 0.25, GRID)


@pytest.fixture(scope="module")
def free_amp():
    return ReducedAmplitude(ModelParams(alpha=0.25, c1=0.0, mu=0.5),
                            BoundaryData.asymptotic(0.0))


class TestRadialState:
    k = np.linspace(0.1, 4.0, 50)
    vals = np.exp(-(k - 1.0) ** 2)

    def test_too_few_nodes(self):
        with pytest.raises(ValueError, match="at least 8 grid nodes"):
            RadialState(self.k[:5], self.vals[:5])

    def test_grid_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing and positive"):
            RadialState(self.k[::-1], self.vals)
        with pytest.raises(ValueError, match="strictly increasing and positive"):
            RadialState(self.k - 0.2, self.vals)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="matching 1-D arrays"):
            RadialState(self.k, self.vals[:-1])

    def test_quadrature_rule_tag(self):
        state = RadialState(self.k, self.vals)
        assert state.interpolation == "trapezoid"
        with pytest.raises(ValueError, match="unknown interpolation rule"):
            RadialState(self.k, self.vals, interpolation="spline")

    def test_norm_and_inner_consistent(self, packet):
        assert packet.inner(packet) == pytest.approx(packet.norm() ** 2, rel=1e-12)


class TestPacketFactories:
    def test_gaussian_packet_normalized(self, packet):
        assert packet.norm() == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_packet_energy(self, packet):
        # mean energy sits at k0^2/(2 mu) plus a positive width correction
        e0 = 1.2 ** 2
        assert e0 < packet.mean_energy(0.5) < e0 + 1.0

    def test_grid_tuple_matches_explicit_array(self):
        a = make_gaussian_packet(1.0, 0.2, (0.01, 5.0, 400))
        b = make_gaussian_packet(1.0, 0.2, np.linspace(0.01, 5.0, 400))
        np.testing.assert_array_equal(a.values, b.values)

    def test_packet_mass_outside_grid(self):
        with pytest.raises(GridSupportError, match="packet mass"):
            make_gaussian_packet(5.0, 0.2, (1e-3, 2.0, 400))

    def test_packet_width_unresolved(self):
        with pytest.raises(GridSupportError, match="within one sigma"):
            make_gaussian_packet(1.2, 0.001, (1e-3, 6.0, 800))

    def test_resonance_family_norm_and_energy_scaling(self):
        s10 = make_appendix_d_state(10.0, 0.5, (1e-3, 35.0, 3000))
        s30 = make_appendix_d_state(30.0, 0.5, (1e-3, 105.0, 4000))
        assert s10.norm() == pytest.approx(1.0, abs=1e-10)
        assert s30.norm() == pytest.approx(1.0, abs=1e-10)
        # mean energy grows like nu^2
        ratio = s30.mean_energy(0.5) / s10.mean_energy(0.5)
        assert ratio == pytest.approx(9.0, rel=0.02)

    def test_resonance_family_needs_bracketing_grid(self):
        with pytest.raises(GridSupportError, match="does not bracket the resonance"):
            make_appendix_d_state(30.0, 0.5, (1e-3, 40.0, 4000))


class TestApplyEvolution:
    def test_zero_interval_is_identity(self, packet, nonlocal_amp):
        out = apply_evolution(packet, 0.5, 0.5, nonlocal_amp)
        np.testing.assert_array_equal(out.values, packet.values)

    def test_free_interaction_picture_is_identity(self, packet, free_amp):
        out = apply_evolution(packet, 3.0, 0.0, free_amp)
        np.testing.assert_array_equal(out.values, packet.values)

    def test_free_schroedinger_keeps_density(self, packet, free_amp):
        out = apply_evolution(packet, 3.0, 0.0, free_amp, picture="schroedinger")
        np.testing.assert_allclose(np.abs(out.values), np.abs(packet.values),
                                   atol=1e-14)

    def test_unknown_picture(self, packet, nonlocal_amp):
        with pytest.raises(ValueError, match="unknown picture"):
            apply_evolution(packet, 1.0, 0.0, nonlocal_amp, picture="heisenberg")

    def test_pictures_related_by_free_phase(self, packet, local_amp):
        t = 0.7
        ui = apply_evolution(packet, t, 0.0, local_amp)
        us = apply_evolution(packet, t, 0.0, local_amp, picture="schroedinger")
        want = ui.values * np.exp(-1j * packet.k_nodes ** 2 * t)
        np.testing.assert_allclose(us.values, want, atol=1e-13)

    @pytest.mark.parametrize("which", ["local", "nonlocal"])
    def test_norm_conserved(self, which, local_amp, nonlocal_amp):
        amp = local_amp if which == "local" else nonlocal_amp
        psi = make_gaussian_packet(1.2, 0.25, norm_audit_grid())
        out = apply_evolution(psi, 1.0, 0.0, amp)
        assert abs(out.norm() - 1.0) <= 1e-4

    def test_contour_height_independence(self, packet, nonlocal_amp):
        a = apply_evolution(packet, 1.0, 0.0, nonlocal_amp, contour=ContourSpec(y=1.0))
        b = apply_evolution(packet, 1.0, 0.0, nonlocal_amp, contour=ContourSpec(y=2.0))
        assert np.max(np.abs(a.values - b.values)) <= 1e-6

    def test_contour_height_validation(self):
        with pytest.raises(ValueError, match="must be positive"):
            ContourSpec(y=-1.0)

    def test_starved_contour_warns(self, packet, local_amp):
        with pytest.warns(ContourTruncationWarning, match="contour cut off"):
            apply_evolution(packet, 1.0, 0.0, local_amp,
                            contour=ContourSpec(max_nodes=64))


def test_matrix_element_matches_inner_product(packet, nonlocal_amp):
    psi2 = make_gaussian_packet(0.9, 0.3, GRID)
    got = matrix_element_R(psi2, packet, 1.0, 0.0, nonlocal_amp)
    evolved = apply_evolution(packet, 1.0, 0.0, nonlocal_amp)
    want = -1j * (psi2.inner(evolved) - psi2.inner(packet))
    assert abs(got - want) <= 5e-6


def test_composition_residual_small(packet, local_amp):
    assert composition_residual(2.0, 1.0, 0.0, packet, local_amp) <= 5e-4


class TestContinuityProbe:
    def test_free_case_matches_direct_overlap(self, packet, free_amp):
        # with the coupling off the probe sees pure free dephasing,
        # <psi|exp(-i H0 t)|psi>, which the grid computes directly
        rows = continuity_probe(packet, [1.0, 0.1], free_amp)
        k = packet.k_nodes
        w = packet.quad_weights
        dens = np.abs(packet.values) ** 2
        for r in rows:
            ov = np.sum(w * dens * np.exp(-1j * k * k * r["t"]))
            assert r["deviation"] == pytest.approx(abs(ov - 1.0), rel=1e-9)

    def test_rows_sorted_and_shrinking(self, packet, nonlocal_amp):
        rows = continuity_probe(packet, [0.1, 0.01], nonlocal_amp)
        assert [r["t"] for r in rows] == [0.01, 0.1]
        assert rows[0]["deviation"] < rows[1]["deviation"]
        for r in rows:
            want = abs(complex(r["overlap_re"], r["overlap_im"]) - 1.0)
            assert r["deviation"] == pytest.approx(want, rel=1e-12)


class TestAppendixDProbe:
    def test_zero_time_rows_are_exactly_zero(self, nonlocal_amp):
        rep = appendix_d_probe([10.0], 0.5, [0.03, 0.0, 0.01], nonlocal_amp)
        assert [r["t"] for r in rep["rows"]] == [0.03, 0.0, 0.01]
        zero = rep["rows"][1]
        assert zero["re"] == 0.0 and zero["im"] == 0.0 and zero["abs"] == 0.0

    def test_negative_time_rejected(self, nonlocal_amp):
        with pytest.raises(ValueError, match="must be nonnegative"):
            appendix_d_probe([10.0], 0.5, [-0.1], nonlocal_amp)

    def test_summary_bookkeeping(self, nonlocal_amp):
        rep = appendix_d_probe([10.0], 0.5, [0.01, 0.03], nonlocal_amp)
        (s,) = rep["summary"]
        assert s["nu"] == 10.0
        assert s["n_k"] >= 1500 and s["n_z"] > 0
        vals = [r["abs"] for r in rep["rows"]]
        assert s["max_abs"] == pytest.approx(max(vals), rel=1e-12)
