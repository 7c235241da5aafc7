import math
import time

import numpy as np
import pytest

from resonest import (
    CoupledPairSpec,
    KPipelineConfig,
    PulseSpec,
    ReflectionSpectrum,
    UniformSignal,
    gaussian_pulse,
    oracle_two_tone,
)

# 400 GHz native rate, the sweep's pulse and bandwidth settings
NATIVE_DT = 2.5e-12
SWEEP_FP = 10e9
SWEEP_B = 750e6
SWEEP_ALPHA = 2.0
K_GRID = (0.005, 0.01, 0.02, 0.05, 0.1, 0.15)

ACCEPTANCE_LINES: list[str] = []
_SESSION_START = time.perf_counter()


def oracle(f0, k, duration, dt=NATIVE_DT, **kw):
    return oracle_two_tone(CoupledPairSpec(f0, k, **kw), dt, int(round(duration / dt)))


def sweep_config(f0, **kw):
    return KPipelineConfig(f0=f0, fp=SWEEP_FP, B=SWEEP_B, alpha=SWEEP_ALPHA, **kw)


def narrowband_s11(f, q_e, f0):
    """Lossless one-port resonator near f0: unit magnitude, phase -2 atan(x)."""
    x = 2.0 * q_e * (np.asarray(f) - f0) / f0
    return (1.0 - 1j * x) / (1.0 + 1j * x)


def narrowband_spectrum(q_e, f0, half_span, n):
    f = np.linspace(f0 - half_span, f0 + half_span, n)
    return ReflectionSpectrum(f, narrowband_s11(f, q_e, f0))


def lumped_reflection_records(q_e, f0, dt=5e-12, n=8192, fp=20e9):
    """(v_inc, v_tot) for a shunt-type lossless resonator, x = Q_e (f/f0 - f0/f).

    The response is Hermitian in f, so the reflected wave is real and causal.
    """
    v_inc = gaussian_pulse(PulseSpec(fp), dt, n)
    f = np.fft.rfftfreq(n, dt)
    s11 = np.full(f.size, -1.0 + 0j)
    x = q_e * (f[1:] / f0 - f0 / f[1:])
    s11[1:] = (1.0 - 1j * x) / (1.0 + 1j * x)
    reflected = np.fft.irfft(s11 * np.fft.rfft(v_inc.samples), n)
    return v_inc, v_inc.with_samples(v_inc.samples + reflected)


def tone(f, dt, n, phase=0.0, amplitude=1.0, t0=0.0):
    t = t0 + np.arange(n) * dt
    return UniformSignal(amplitude * np.cos(2.0 * math.pi * f * t + phase), dt, t0)


def record_acceptance(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture
def report():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    elapsed = time.perf_counter() - _SESSION_START
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
    ok = elapsed < 300.0
    terminalreporter.write_line(
        f"{'PASS' if ok else 'FAIL'}  criterion 8: full suite runtime -- {elapsed:.1f} s (limit 300 s)"
    )
