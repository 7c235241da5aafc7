import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NATIVE_DT
from resonest import (
    CoupledPairSpec,
    EspritConfig,
    InvalidArgumentError,
    KPipelineConfig,
    PulseSpec,
    UniformSignal,
    coupling_coefficient,
    esprit,
    extract_coupling,
    gaussian_pulse,
    impulse,
    integrate_coupled_lc,
    oracle_ode,
    oracle_two_tone,
    pair_to_real_modes,
    pulse_attenuation_db,
    split_frequencies,
)
from resonest.signals import MATCHED_SPECTRUM_EXPONENT, coupled_lc_energy


class TestUniformSignal:
    def test_rejects_empty_and_bad_dt(self):
        with pytest.raises(InvalidArgumentError):
            UniformSignal([], 1.0)
        with pytest.raises(InvalidArgumentError):
            UniformSignal([1.0], 0.0)
        with pytest.raises(InvalidArgumentError):
            UniformSignal([1.0], float("inf"))

    def test_derived_quantities(self):
        s = UniformSignal(np.arange(5.0), 0.25, t0=1.0)
        assert s.fs == 4.0
        assert s.duration == 1.25
        np.testing.assert_array_equal(s.times, [1.0, 1.25, 1.5, 1.75, 2.0])

    def test_samples_are_read_only(self):
        s = UniformSignal(np.zeros(3), 1.0)
        with pytest.raises(ValueError):
            s.samples[0] = 1.0

    def test_csv_round_trip(self, tmp_path):
        s = UniformSignal(np.sin(np.arange(50) * 0.3), 2.5e-12, t0=1e-9)
        path = tmp_path / "sig.csv"
        s.to_csv(path)
        text = path.read_bytes()
        assert text.startswith(b"t,v\n") and b"\r" not in text
        back = UniformSignal.from_csv(path)
        np.testing.assert_array_equal(back.samples, s.samples)
        assert back.dt == pytest.approx(s.dt, rel=1e-12)
        assert back.t0 == s.t0

    def test_csv_rejects_nonuniform_grid(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,v\n0,1\n1,2\n2.1,3\n")
        with pytest.raises(InvalidArgumentError, match="not uniform"):
            UniformSignal.from_csv(path)

    def test_csv_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,value\n0,1\n1,2\n")
        with pytest.raises(InvalidArgumentError, match="header"):
            UniformSignal.from_csv(path)


class TestGaussianPulse:
    def test_peak_is_one_at_delay(self):
        p = gaussian_pulse(PulseSpec(5e9), 1e-12, 1000)
        i = int(np.argmax(p.samples))
        assert p.samples[i] == 1.0
        assert p.times[i] == pytest.approx(200e-12)

    def test_value_at_origin(self):
        p = gaussian_pulse(PulseSpec(5e9), 1e-12, 10)
        assert p.samples[0] == pytest.approx(math.exp(-2 * math.pi), rel=1e-14)
        assert p.samples[0] == pytest.approx(1.867e-3, rel=1e-3)

    def test_time_scaling(self):
        # doubling fp compresses the pulse by two in time
        slow = gaussian_pulse(PulseSpec(5e9), 2e-12, 300)
        fast = gaussian_pulse(PulseSpec(10e9), 1e-12, 300)
        np.testing.assert_allclose(fast.samples, slow.samples, rtol=1e-12, atol=1e-300)

    def test_nonnegative_unimodal_and_truncated(self):
        p = gaussian_pulse(PulseSpec(5e9), 1e-12, 2000).samples
        assert np.all(p >= 0)
        peak = int(np.argmax(p))
        assert np.all(np.diff(p[: peak + 1]) > 0)
        assert np.all(np.diff(p[peak:]) <= 0)
        tail = p[peak:]
        assert np.all((tail == 0) | (tail >= 1e-12))
        assert tail[-1] == 0.0

    @pytest.mark.parametrize("dt,n", [(0.0, 10), (-1e-12, 10), (1e-12, 0)])
    def test_bad_arguments(self, dt, n):
        with pytest.raises(InvalidArgumentError):
            gaussian_pulse(PulseSpec(5e9), dt, n)

    def test_bad_spec(self):
        with pytest.raises(InvalidArgumentError):
            PulseSpec(0.0)

    def test_discrete_spectrum_follows_attenuation_formula(self):
        spec = PulseSpec(5e9, MATCHED_SPECTRUM_EXPONENT)
        p = gaussian_pulse(spec, 1e-12, 4000)
        mag = np.abs(np.fft.rfft(p.samples))
        f = np.fft.rfftfreq(4000, 1e-12)
        sel = f <= 5 * spec.fp
        measured = 20 * np.log10(mag[sel] / mag[0])
        np.testing.assert_allclose(measured, pulse_attenuation_db(f[sel], spec), atol=0.5)

    def test_default_pulse_is_narrower_than_formula(self):
        spec = PulseSpec(5e9)
        p = gaussian_pulse(spec, 1e-12, 4000)
        mag = np.abs(np.fft.rfft(p.samples))
        f = np.fft.rfftfreq(4000, 1e-12)
        sel = (f > 0) & (f <= 2 * spec.fp)
        measured = 20 * np.log10(mag[sel] / mag[0])
        assert np.all(measured < pulse_attenuation_db(f[sel], spec))


class TestPulseAttenuation:
    def test_zero_frequency(self):
        assert pulse_attenuation_db(0.0, PulseSpec(5e9)) == 0.0

    def test_five_fp(self):
        value = pulse_attenuation_db(25e9, PulseSpec(5e9))
        assert value == pytest.approx(-108.57, abs=0.01)
        assert value < -108.0

    def test_fp(self):
        assert pulse_attenuation_db(5e9, PulseSpec(5e9)) == pytest.approx(-10 * math.log10(math.e), rel=1e-15)


class TestCoupledPairSpec:
    @pytest.mark.parametrize("k", [-0.1, 1.0, 1.5])
    def test_k_range(self, k):
        with pytest.raises(InvalidArgumentError):
            CoupledPairSpec(1e9, k)

    def test_split_ordering(self):
        lo, hi = split_frequencies(3.65e9, 0.1985)
        assert lo < 3.65e9 < hi
        assert lo == pytest.approx(3.333e9, rel=1e-3)
        assert hi == pytest.approx(4.077e9, rel=1e-3)

    def test_zero_coupling_collapses(self):
        lo, hi = split_frequencies(3.65e9, 0.0)
        assert lo == hi == 3.65e9


@given(
    k=st.floats(min_value=1e-6, max_value=0.999, allow_nan=False),
    f0=st.floats(min_value=1e6, max_value=1e12, allow_nan=False),
)
@settings(max_examples=300, deadline=None)
def test_oracle_identity_over_k_and_f0(k, f0):
    assert coupling_coefficient(*split_frequencies(f0, k)) == pytest.approx(k, rel=1e-12, abs=1e-15)


def test_oracle_identity_on_grid_to_machine_precision():
    for k in np.linspace(0.001, 0.99, 200):
        assert abs(coupling_coefficient(*split_frequencies(3.65e9, k)) - k) <= 8 * np.finfo(float).eps


class TestTwoTone:
    def test_single_tone_when_uncoupled(self):
        dt = 1.0 / 16e9
        s = oracle_two_tone(CoupledPairSpec(3.65e9, 0.0), dt, 200)
        modes = pair_to_real_modes(esprit(s, EspritConfig(n_complex_modes=2))).modes
        assert len(modes) == 1
        assert modes[0].frequency == pytest.approx(3.65e9, rel=1e-9)

    def test_split_tones(self):
        dt = 1.0 / 16e9
        s = oracle_two_tone(CoupledPairSpec(3.65e9, 0.1985), dt, 300)
        freqs = sorted(m.frequency for m in pair_to_real_modes(esprit(s)).modes)
        assert freqs[0] == pytest.approx(3.333e9, rel=1e-3)
        assert freqs[1] == pytest.approx(4.077e9, rel=1e-3)

    def test_spacing_matches_first_order(self):
        lo, hi = split_frequencies(3.65e9, 0.01)
        assert hi - lo == pytest.approx(0.01 * 3.65e9, rel=1e-3)
        assert hi - lo == pytest.approx(36.5e6, rel=1e-3)

    def test_nyquist_violation(self):
        with pytest.raises(InvalidArgumentError, match="Nyquist"):
            oracle_two_tone(CoupledPairSpec(3.65e9, 0.1), 1.0 / 7e9, 100)

    def test_deterministic(self):
        spec = CoupledPairSpec(1e9, 0.05, damping=1e7, amplitudes=(1.0, 0.5), phases=(0.3, -1.0))
        a = oracle_two_tone(spec, 1e-11, 500).samples
        b = oracle_two_tone(spec, 1e-11, 500).samples
        assert np.array_equal(a, b)

    def test_damping_envelope(self):
        spec = CoupledPairSpec(1e9, 0.0, damping=1e8)
        s = oracle_two_tone(spec, 1e-10, 51)
        # at whole periods cos(...) = 1, so the samples trace the envelope
        np.testing.assert_allclose(s.samples[::10], 2.0 * np.exp(-1e8 * s.times[::10]), rtol=1e-12)


class TestCoupledLC:
    def test_uncoupled_probe_is_silent(self):
        dt, n = 1e-11, 2000
        v2 = oracle_ode(CoupledPairSpec(1e9, 0.0), dt, n, impulse(dt, n))
        assert np.all(v2.samples == 0.0)

    def test_modes_recovered_through_pipeline(self):
        spec = CoupledPairSpec(1e9, 0.05)
        dt, n = NATIVE_DT, 40000
        v2 = oracle_ode(spec, dt, n, impulse(dt, n))
        result = extract_coupling(v2, KPipelineConfig(f0=1e9, fp=5e9, B=20e6, alpha=5))
        assert result.f_minus == pytest.approx(spec.f0 / math.sqrt(1.05), rel=1e-3)
        assert result.f_plus == pytest.approx(spec.f0 / math.sqrt(0.95), rel=1e-3)
        assert result.k == pytest.approx(0.05, rel=1e-3)

    def test_agrees_with_two_tone_modes(self):
        spec = CoupledPairSpec(1e9, 0.1)
        dt, n = 1e-11, 600
        ode = oracle_ode(spec, dt, n, impulse(dt, n))
        closed = oracle_two_tone(spec, dt, n)
        f_ode = sorted(m.frequency for m in pair_to_real_modes(esprit(ode)).modes)
        f_cf = sorted(m.frequency for m in pair_to_real_modes(esprit(closed)).modes)
        np.testing.assert_allclose(f_ode, f_cf, rtol=1e-3)

    def test_energy_conserved_without_damping(self):
        spec = CoupledPairSpec(1e9, 0.1)
        dt, n = 1e-12, 10_000
        states = integrate_coupled_lc(spec, dt, n, impulse(dt, n))
        energy = coupled_lc_energy(spec, states)[2:]
        assert energy[0] > 0
        assert np.ptp(energy) / energy[0] < 1e-9

    def test_energy_decays_with_damping(self):
        spec = CoupledPairSpec(1e9, 0.1, damping=1e8)
        dt, n = 1e-11, 2000
        energy = coupled_lc_energy(spec, integrate_coupled_lc(spec, dt, n, impulse(dt, n)))[2:]
        # amplitudes decay at `damping`, stored energy at twice that
        expected = math.exp(-2 * spec.damping * (n - 3) * dt)
        assert energy[-1] / energy[0] == pytest.approx(expected, rel=0.05)

    def test_unstable_step_rejected(self):
        spec = CoupledPairSpec(1e9, 0.1)
        dt = 2e-10
        with pytest.raises(InvalidArgumentError, match="stability"):
            oracle_ode(spec, dt, 100, impulse(dt, 100))
        # substeps bring the inner step back under the limit
        oracle_ode(spec, dt, 100, impulse(dt, 100), substeps=4)

    def test_excitation_grid_must_match(self):
        with pytest.raises(InvalidArgumentError):
            oracle_ode(CoupledPairSpec(1e9, 0.1), 1e-11, 100, impulse(2e-11, 100))
