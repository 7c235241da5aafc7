"""Coupling-coefficient pipeline and external-Q extraction from voltage records."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .dsp import (
    AAF_CUTOFF_FRACTION,
    AAF_STOP_ATTENUATION_DB,
    apply_fir,
    decimate_filtered,
    decimate_raw,
    design_lowpass,
    gaussian_bandpass,
    plan_decimation,
)
from .errors import EstimationError, ExcitationBandwidthError, IllConditionedError, InvalidArgumentError
from .signals import UniformSignal, same_rate
from .spectral import (
    ComplexFrequencyEstimate,
    EspritConfig,
    RealMode,
    esprit,
    pair_to_real_modes,
    select_split_pair,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PASSIVITY_SLACK = 0.05
SPECTRUM_CSV_HEADER = "f_hz,re,im,group_delay_s"
RANK_FLOOR = 1e-9  # relative eigenvalue level counted as signal when re-estimating


def coupling_coefficient(f_minus: float, f_plus: float) -> float:
    """``(f+**2 - f-**2) / (f+**2 + f-**2)`` for a split pair ``f- <= f+``."""
    if not (f_minus > 0 and f_plus > 0):
        raise InvalidArgumentError(f"split frequencies must be positive, got {f_minus!r}, {f_plus!r}")
    if f_minus > f_plus:
        raise InvalidArgumentError(f"f_minus ({f_minus!r}) must not exceed f_plus ({f_plus!r})")
    # ratio form keeps K a function of f+/f- alone
    r2 = (f_plus / f_minus) ** 2
    return (r2 - 1.0) / (r2 + 1.0)


@dataclass(frozen=True)
class KPipelineConfig:
    """Parameters of the coupling-extraction pipeline.

    The Gaussian bandpass width is ``alpha * B``. ``band_for_selection``
    (default ``3 * alpha * B``) bounds how far from ``f0`` a mode may lie and
    still count as one of the split pair.
    """

    f0: float
    fp: float
    B: float
    alpha: float = 5.0
    esprit: EspritConfig = field(default_factory=EspritConfig)
    band_for_selection: float | None = None

    def __post_init__(self) -> None:
        for name in ("f0", "fp", "B", "alpha"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 2.0 <= self.alpha <= 5.0:
            warnings.warn(f"alpha = {self.alpha} is outside the usual range [2, 5]", stacklevel=3)
        if self.band_for_selection is not None and not self.band_for_selection > 0:
            raise InvalidArgumentError("band_for_selection must be positive")

    @property
    def f_tilde(self) -> float:
        return self.alpha * self.B

    @property
    def selection_band(self) -> float:
        return 3.0 * self.alpha * self.B if self.band_for_selection is None else self.band_for_selection


@dataclass
class CouplingResult:
    f_minus: float
    f_plus: float
    k: float
    stages: dict[str, Any]
    signals: dict[str, UniformSignal] = field(default_factory=dict, repr=False)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "f_minus_hz": self.f_minus,
            "f_plus_hz": self.f_plus,
            "k": self.k,
            "diagnostics": self.stages,
        }


def _estimate_record(e: ComplexFrequencyEstimate) -> dict[str, float]:
    rec = {"frequency_hz": e.frequency, "damping_per_s": e.damping}
    if e.amplitude is not None:
        rec["amplitude_abs"] = abs(e.amplitude)
    return rec


def _mode_record(m: RealMode) -> dict[str, float]:
    return {"frequency_hz": m.frequency, "damping_per_s": m.damping}


def condition_signal(
    signal: UniformSignal, config: KPipelineConfig, stages: dict[str, Any] | None = None
) -> tuple[UniformSignal, dict[str, UniformSignal]]:
    """Run the decimation and filtering stages ahead of ESPRIT.

    Returns the bandpassed signal and every intermediate signal by stage
    name. Stage metadata is written into ``stages`` when given.
    """
    stages = {} if stages is None else stages
    m = config.esprit.m
    stages["input"] = {"fs_hz": signal.fs, "samples": len(signal), "duration_s": signal.duration}

    plan = plan_decimation(signal.fs, config.fp, config.f0)
    if not plan.covers(config.f0, 3.0 * config.f_tilde):
        raise InvalidArgumentError(
            f"final rate {plan.stage2_rate:.6g} Hz cannot hold f0 + 3*f_tilde = "
            f"{config.f0 + 3 * config.f_tilde:.6g} Hz; reduce alpha*B"
        )
    stages["plan"] = {
        "stage1_target_hz": plan.stage1_target,
        "stage1_factor": plan.stage1_factor,
        "stage2_target_hz": plan.stage2_target,
        "stage2_factor": plan.stage2_factor,
    }

    s1 = decimate_raw(signal, plan.stage1_factor)
    stages["stage1"] = {"fs_hz": s1.fs, "samples": len(s1)}

    if plan.stage2_factor > 1:
        aaf = design_lowpass(s1.fs, AAF_CUTOFF_FRACTION * plan.stage2_rate, AAF_STOP_ATTENUATION_DB)
        s2 = decimate_filtered(s1, plan.stage2_factor, aaf)
        stages["stage2"] = {
            "fs_hz": s2.fs,
            "samples": len(s2),
            "aaf_taps": len(aaf),
            "aaf_cutoff_hz": aaf.cutoff,
        }
    else:
        s2 = s1
        stages["stage2"] = {"fs_hz": s2.fs, "samples": len(s2), "aaf_taps": 0, "aaf_cutoff_hz": None}
    if len(s2) < 4 * m:
        raise InvalidArgumentError(
            f"only {len(s2)} samples after decimation; need at least 4*m = {4 * m}. Record a longer signal."
        )

    bp = gaussian_bandpass(config.f0, config.f_tilde, s2.fs)
    if len(s2) - len(bp) + 1 < 2 * m:
        raise InvalidArgumentError(
            f"bandpass ({len(bp)} taps) leaves {max(len(s2) - len(bp) + 1, 0)} of {len(s2)} samples; "
            f"ESPRIT needs {2 * m}. Record a longer signal or widen alpha*B."
        )
    s3 = apply_fir(s2, bp)
    stages["bandpass"] = {
        "f0_hz": config.f0,
        "f_tilde_hz": config.f_tilde,
        "taps": len(bp),
        "samples": len(s3),
    }
    return s3, {"input": signal, "stage1": s1, "stage2": s2, "bandpass": s3}


def _modes_at_numerical_rank(
    signal: UniformSignal, config: EspritConfig, eigenvalues: list[float]
) -> list[ComplexFrequencyEstimate]:
    # diagnostics only: what the record does contain when the configured order is too high
    ev = np.asarray(eigenvalues)
    if ev.size == 0 or not ev[0] > 0:
        return []
    rank = int(np.sum(ev > RANK_FLOOR * ev[0]))
    if not 2 <= rank < config.n_complex_modes:
        return []
    try:
        return esprit(signal, replace(config, n_complex_modes=rank))
    except EstimationError:
        return []


def extract_coupling(signal: UniformSignal, config: KPipelineConfig, keep_signals: bool = False) -> CouplingResult:
    """Estimate the split frequencies in ``signal`` and convert them to ``k``.

    Stages: plan decimation, raw decimation to about ``10 fp``, filtered
    decimation to about ``4 f0``, Gaussian bandpass around ``f0``, ESPRIT,
    conjugate pairing, split-pair selection and the coupling formula.

    Raises:
        InvalidArgumentError: the record is too short or a stage precondition
            fails.
        EstimationError: fewer than two split modes were found. The error
            carries every estimate in ``modes`` and the stage record in
            ``diagnostics``.
    """
    stages: dict[str, Any] = {}
    conditioned, stage_signals = condition_signal(signal, config, stages)

    ec = config.esprit
    stages["esprit"] = {"m": ec.m, "n_complex_modes": ec.n_complex_modes}
    try:
        estimates = esprit(conditioned, ec)
        stages["esprit"]["estimates"] = [_estimate_record(e) for e in estimates]
        pairing = pair_to_real_modes(estimates, ec.pairing_tolerance)
        stages["esprit"]["real_modes"] = [_mode_record(m) for m in pairing.modes]
        stages["esprit"]["orphans"] = [_estimate_record(e) for e in pairing.orphans]
        stages["selection"] = {"f0_hz": config.f0, "band_hz": config.selection_band}
        f_minus, f_plus = select_split_pair(pairing.modes, config.f0, config.selection_band)
    except IllConditionedError as err:
        if not err.modes:
            err.modes = _modes_at_numerical_rank(conditioned, ec, err.eigenvalues)
        err.diagnostics = stages  # type: ignore[attr-defined]
        raise
    except EstimationError as err:
        err.diagnostics = stages  # type: ignore[attr-defined]
        raise
    if f_minus == f_plus:
        raise EstimationError("split pair collapsed to a single frequency", [f_minus])
    k = coupling_coefficient(f_minus, f_plus)
    logger.info("f- = %.9g Hz, f+ = %.9g Hz, k = %.6g", f_minus, f_plus, k)
    return CouplingResult(f_minus, f_plus, k, stages, stage_signals if keep_signals else {})


@dataclass
class ReflectionSpectrum:
    """Complex reflection coefficient on a uniform, increasing frequency grid."""

    frequencies: NDArray[np.float64]
    s11: NDArray[np.complex128]
    group_delay: NDArray[np.float64] | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.frequencies = np.asarray(self.frequencies, dtype=np.float64)
        self.s11 = np.asarray(self.s11, dtype=np.complex128)
        if self.frequencies.ndim != 1 or self.frequencies.shape != self.s11.shape:
            raise InvalidArgumentError("frequencies and s11 must be 1-D arrays of equal length")
        if self.frequencies.size >= 2:
            steps = np.diff(self.frequencies)
            if np.any(steps <= 0):
                raise InvalidArgumentError("frequency grid must be strictly increasing")
            if np.max(np.abs(steps - steps.mean())) > 1e-6 * steps.mean():
                raise InvalidArgumentError("frequency grid must be uniform")
        peak = float(np.max(np.abs(self.s11), initial=0.0))
        if peak > 1.0 + PASSIVITY_SLACK:
            msg = f"|S11| reaches {peak:.4g} (> 1 + {PASSIVITY_SLACK}); data may not be passive"
            if msg not in self.warnings:
                logger.warning(msg)
                self.warnings.append(msg)

    def to_csv(self, path: str | Path) -> None:
        gd = self.group_delay if self.group_delay is not None else np.full(self.frequencies.size, np.nan)
        data = np.column_stack([self.frequencies, self.s11.real, self.s11.imag, gd])
        with open(path, "w", newline="\n") as fh:
            fh.write(SPECTRUM_CSV_HEADER + "\n")
            np.savetxt(fh, data, fmt="%.17g", delimiter=",")

    @classmethod
    def from_csv(cls, path: str | Path) -> ReflectionSpectrum:
        with open(path) as fh:
            header = fh.readline().strip()
            if header.replace(" ", "") != SPECTRUM_CSV_HEADER:
                raise InvalidArgumentError(f"{path}: expected header {SPECTRUM_CSV_HEADER!r}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        gd = data[:, 3]
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], None if np.all(np.isnan(gd)) else gd)


def _fade_out(n: int, fraction: float = 0.1) -> NDArray[np.float64]:
    w = np.ones(n)
    tail = max(int(round(fraction * n)), 1)
    w[n - tail :] = np.cos(0.5 * np.pi * np.arange(1, tail + 1) / tail) ** 2
    return w


def s11_from_voltages(
    v_inc: UniformSignal,
    v_tot: UniformSignal,
    fmin: float,
    fmax: float,
    nfft: int,
    taper: bool = False,
) -> ReflectionSpectrum:
    """Reflection coefficient ``F(v_tot - v_inc) / F(v_inc)`` on ``[fmin, fmax]``.

    The shorter record is zero-padded to the longer. ``taper`` applies a
    cosine fade over the final 10% of both records before transforming.

    Raises:
        InvalidArgumentError: mismatched grids or ``nfft`` shorter than the
            records.
        ExcitationBandwidthError: ``|F(v_inc)|`` falls below 1e-9 of its peak
            somewhere in the band; the offending frequencies are attached.
    """
    if not same_rate(v_inc.dt, v_tot.dt):
        raise InvalidArgumentError(f"sample intervals differ: {v_inc.dt!r} vs {v_tot.dt!r}")
    if abs(v_inc.t0 - v_tot.t0) > 1e-6 * v_inc.dt:
        raise InvalidArgumentError("incident and total records must start at the same time")
    if not 0 <= fmin < fmax:
        raise InvalidArgumentError(f"need 0 <= fmin < fmax, got {fmin!r}, {fmax!r}")
    n = max(len(v_inc), len(v_tot))
    if nfft < n:
        raise InvalidArgumentError(f"nfft ({nfft}) must be at least the record length ({n})")
    inc = np.zeros(n)
    tot = np.zeros(n)
    inc[: len(v_inc)] = v_inc.samples
    tot[: len(v_tot)] = v_tot.samples
    if taper:
        w = _fade_out(n)
        inc, tot = inc * w, tot * w

    freqs = np.fft.rfftfreq(nfft, v_inc.dt)
    f_inc = np.fft.rfft(inc, nfft)
    f_ref = np.fft.rfft(tot - inc, nfft)
    band = (freqs >= fmin) & (freqs <= fmax)
    if not np.any(band):
        raise InvalidArgumentError(f"no transform bins between {fmin:.6g} and {fmax:.6g} Hz; increase nfft")
    mag = np.abs(f_inc)
    weak = band & (mag < 1e-9 * np.max(mag))
    if np.any(weak):
        bad = freqs[weak]
        raise ExcitationBandwidthError(
            f"incident spectrum is below 1e-9 of its peak at {bad.size} frequencies in band "
            f"(from {bad.min():.6g} Hz to {bad.max():.6g} Hz); excitation bandwidth insufficient",
            bad.tolist(),
        )
    return ReflectionSpectrum(freqs[band], f_ref[band] / f_inc[band])


def group_delay(spectrum: ReflectionSpectrum) -> ReflectionSpectrum:
    """Fill in ``-(1 / 2 pi) d(phase)/df`` from the unwrapped S11 phase.

    Central differences inside the grid, one-sided at the ends. A warning is
    recorded when more than 10% of adjacent phase steps exceed pi/2, which
    means the grid is too coarse to unwrap reliably.
    """
    f = spectrum.frequencies
    if f.size < 3:
        raise InvalidArgumentError("group delay needs at least three frequency points")
    phase = np.unwrap(np.angle(spectrum.s11))
    tau = -np.gradient(phase, f) / (2.0 * math.pi)
    notes = list(spectrum.warnings)
    steep = np.abs(np.diff(phase)) > 0.5 * math.pi
    if steep.mean() > 0.1:
        msg = f"{steep.mean():.0%} of phase steps exceed pi/2; refine the frequency grid (larger nfft)"
        logger.warning(msg)
        notes.append(msg)
    return ReflectionSpectrum(f, spectrum.s11, tau, notes)


def external_q(spectrum: ReflectionSpectrum) -> tuple[float, float]:
    """``(Q_e, f0)`` from the group-delay peak: ``Q_e = 2 pi f0 tau_g(f0) / 4``.

    The peak is refined with a three-point parabola.

    Raises:
        InvalidArgumentError: the maximum sits on the edge of the grid.
    """
    if spectrum.group_delay is None:
        spectrum = group_delay(spectrum)
    tau = spectrum.group_delay
    f = spectrum.frequencies
    i = int(np.argmax(tau))
    if i == 0 or i == tau.size - 1:
        raise InvalidArgumentError(
            f"group-delay maximum at band edge ({f[i]:.6g} Hz); widen [fmin, fmax] around the resonance"
        )
    a, b, c = tau[i - 1], tau[i], tau[i + 1]
    denom = a - 2.0 * b + c
    offset = 0.5 * (a - c) / denom if denom != 0 else 0.0
    f0 = f[i] + offset * (f[i + 1] - f[i - 1]) / 2.0
    tau0 = b - 0.25 * (a - c) * offset
    return 2.0 * math.pi * f0 * tau0 / 4.0, float(f0)
