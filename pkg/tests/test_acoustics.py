"""Field-math unit tests with independent oracles.

The directivity oracle is a truncated Bessel power series computed here
from scratch; superposition and phase-equivariance checks rely only on
the linearity of complex sums.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levipick.acoustics import (ArrayState, PhysicalConstants, SingularPointError,
                                SourceState, directivity, field_sample,
                                pressure_field, source_pressure, total_pressure,
                                velocity_field)


def _j1_series(x: float, terms: int = 30) -> float:
    """Oracle: power series J1(x) = sum_m (-1)^m / (m! (m+1)!) (x/2)^(2m+1)."""
    out, fact_m, fact_m1 = 0.0, 1.0, 1.0
    for m in range(terms):
        if m > 0:
            fact_m *= m
            fact_m1 *= m + 1
        out += (-1.0) ** m / (fact_m * fact_m1) * (x / 2.0) ** (2 * m + 1)
    return out


def _directivity_oracle(ka: float, theta: float) -> float:
    x = ka * math.sin(theta)
    if x == 0.0:
        return 1.0
    return 2.0 * _j1_series(x) / x


class TestDirectivity:
    def test_on_axis_is_unity(self):
        assert directivity(3.0, 0.0) == 1.0
        assert directivity(3.0, math.pi) == 1.0
        assert directivity(0.0, 1.0) == 1.0

    @pytest.mark.parametrize("ka", [0.5, 1.0, 3.3, 6.6])
    @pytest.mark.parametrize("theta", [0.01, 0.3, math.pi / 4, 1.2, math.pi / 2])
    def test_matches_power_series(self, ka, theta):
        assert directivity(ka, theta) == pytest.approx(
            _directivity_oracle(ka, theta), rel=1e-10)

    def test_continuous_at_removable_singularity(self):
        assert directivity(1e-9, 0.5) == pytest.approx(1.0, abs=1e-6)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            directivity(3.0, -0.1)
        with pytest.raises(ValueError):
            directivity(-1.0, 0.5)


class TestSourcePressure:
    def test_inverse_distance_decay_on_axis(self, constants):
        src = SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1))
        p1 = abs(source_pressure(src, (0, 0, 0.02), constants))
        p2 = abs(source_pressure(src, (0, 0, 0.04), constants))
        assert p1 / p2 == pytest.approx(2.0, rel=1e-12)

    def test_on_axis_amplitude_is_reference_over_distance(self, constants):
        src = SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1),
                          reference_pressure=3.0)
        assert abs(source_pressure(src, (0, 0, 0.05), constants)) == \
            pytest.approx(3.0 / 0.05, rel=1e-12)

    def test_phase_advances_with_path_length(self, constants):
        src = SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1))
        k = constants.wavenumber
        p = source_pressure(src, (0, 0, 0.03), constants)
        assert math.remainder(np.angle(p) - k * 0.03, 2 * math.pi) == \
            pytest.approx(0.0, abs=1e-12)

    def test_inactive_source_contributes_nothing(self, constants):
        src = SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1),
                          amplitude_scale=0.0)
        assert source_pressure(src, (0, 0, 0.03), constants) == 0.0

    def test_singular_point_rejected(self, constants):
        src = SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1))
        with pytest.raises(SingularPointError):
            source_pressure(src, (0, 0, 0), constants)


class TestPressureField:
    def test_matches_scalar_sum_of_sources(self, cylinder_sources, constants, rng):
        arr = ArrayState(cylinder_sources, constants)
        pts = rng.uniform([-0.01, -0.01, 0.005], [0.01, 0.01, 0.045], (12, 3))
        batch = pressure_field(arr, pts)
        for pt, pb in zip(pts, batch):
            scalar = sum(source_pressure(s, pt, constants)
                         for s in cylinder_sources)
            assert pb == pytest.approx(scalar, rel=1e-9)

    def test_superposition_is_linear(self, cylinder_sources, constants):
        half_a = cylinder_sources[:28]
        half_b = cylinder_sources[28:]
        pt = np.array([0.002, -0.001, 0.02])
        total = total_pressure(ArrayState(cylinder_sources, constants), pt)
        parts = (total_pressure(ArrayState(half_a, constants), pt)
                 + total_pressure(ArrayState(half_b, constants), pt))
        assert total == pytest.approx(parts, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(dphi=st.floats(0.0, 2 * math.pi))
    def test_global_phase_equivariance(self, dphi):
        """Shifting every source phase rotates the complex field rigidly."""
        constants = PhysicalConstants()
        srcs = [SourceState(position=(0.02 * math.cos(a), 0.02 * math.sin(a), 0.01),
                            unit_normal=(-math.cos(a), -math.sin(a), 0))
                for a in (0.0, 2.1, 4.2)]
        shifted = [s.with_phase(s.phase + dphi) for s in srcs]
        pt = (0.001, 0.0005, 0.012)
        p0 = total_pressure(ArrayState(srcs), pt)
        p1 = total_pressure(ArrayState(shifted), pt)
        assert p1 == pytest.approx(p0 * np.exp(1j * dphi), rel=1e-9)

    def test_all_sources_off_gives_zero_field(self, cylinder_sources, constants):
        off = [SourceState(position=s.position, unit_normal=s.unit_normal,
                           amplitude_scale=0.0, channel=s.channel)
               for s in cylinder_sources]
        arr = ArrayState(off, constants)
        assert np.all(pressure_field(arr, np.zeros((4, 3)) + [0, 0, 0.02]) == 0)


class TestVelocityField:
    def test_plane_wave_pair_velocity_node_at_pressure_antinode(self, constants):
        """Opposed sources: velocity vanishes at the midpoint by symmetry."""
        d = 0.06
        srcs = [SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1)),
                SourceState(position=(0, 0, d), unit_normal=(0, 0, -1))]
        arr = ArrayState(srcs, constants)
        v = velocity_field(arr, np.array([0.0, 0.0, d / 2.0]))
        assert abs(v[2]) < 1e-10 * abs(total_pressure(arr, (0, 0, d / 2)))

    def test_velocity_is_scaled_pressure_gradient(self, cylinder_sources, constants):
        arr = ArrayState(cylinder_sources, constants)
        pt = np.array([0.001, 0.002, 0.025])
        h = arr.gradient_step
        v = velocity_field(arr, pt)
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            grad = (total_pressure(arr, pt + e) - total_pressure(arr, pt - e)) / (2 * h)
            expect = grad / (1j * constants.air_density * constants.angular_frequency)
            assert v[ax] == pytest.approx(expect, rel=1e-9)

    def test_field_sample_bundles_pressure_and_velocity(self, cylinder_sources,
                                                        constants):
        arr = ArrayState(cylinder_sources, constants)
        pt = (0.0, 0.001, 0.03)
        fs = field_sample(arr, pt)
        assert fs.pressure == pytest.approx(total_pressure(arr, pt))
        assert fs.velocity[1] == pytest.approx(complex(velocity_field(arr, np.asarray(pt))[1]))


class TestConstants:
    def test_wavelength_wavenumber_consistency(self, constants):
        assert constants.wavelength == pytest.approx(343.0 / 40000.0)
        assert constants.wavenumber * constants.wavelength == \
            pytest.approx(2 * math.pi)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            PhysicalConstants(frequency=0.0)


class TestSourceState:
    def test_normal_is_normalized(self):
        s = SourceState(position=(0, 0, 0), unit_normal=(0, 0, 2.0))
        assert s.unit_normal == (0.0, 0.0, 1.0)

    def test_phase_wraps_into_cycle(self):
        s = SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1),
                        phase=5 * math.pi)
        assert s.phase == pytest.approx(math.pi)

    def test_rejects_zero_normal_and_negative_amplitude(self):
        with pytest.raises(ValueError):
            SourceState(position=(0, 0, 0), unit_normal=(0, 0, 0))
        with pytest.raises(ValueError):
            SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1),
                        amplitude_scale=-1.0)
