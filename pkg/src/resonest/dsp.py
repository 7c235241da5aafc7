"""Multirate front end: raw decimation, anti-aliased decimation, Gaussian bandpass.

All filters designed here are odd-length with bit-exact symmetric taps, so
their group delay is exactly ``(len - 1) / 2`` samples. :func:`apply_fir`
keeps only the fully overlapped part of the convolution and moves ``t0`` by
that delay, which keeps tone phases aligned with the input time axis.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.signal import kaiserord

from .errors import InvalidArgumentError
from .signals import UniformSignal, same_rate

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

AAF_STOP_ATTENUATION_DB = 80.0
AAF_CUTOFF_FRACTION = 0.45  # of the decimated sample rate
TRANSITION_RATIO = 1.25  # stopband edge / passband edge
GAUSSIAN_TRUNCATION = 1e-12
MAX_TAPS = 1_000_000


@dataclass(frozen=True, eq=False)
class FirFilter:
    """Linear-phase FIR filter designed for sample rate ``fs``.

    ``cutoff`` is the passband edge of a low-pass design; ``center`` is the
    center frequency of a bandpass design. Either may be ``None``.
    """

    taps: FloatArray
    fs: float
    cutoff: float | None = None
    center: float | None = None

    def __post_init__(self) -> None:
        taps = np.array(self.taps, dtype=np.float64).reshape(-1)
        if taps.size == 0:
            raise InvalidArgumentError("filter needs at least one tap")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    def __len__(self) -> int:
        return self.taps.size

    @property
    def group_delay_samples(self) -> float:
        return (self.taps.size - 1) / 2.0

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.taps, self.taps[::-1]))

    def response(self, f: ArrayLike) -> NDArray[np.complex128]:
        """Frequency response by direct evaluation of the DTFT sum."""
        f = np.atleast_1d(np.asarray(f, dtype=np.float64))
        n = np.arange(self.taps.size)
        # reduce the phase argument mod 1 cycle before scaling by 2*pi
        cycles = np.mod(np.outer(f / self.fs, n), 1.0)
        return np.exp(-2j * np.pi * cycles) @ self.taps

    def response_fft(self, nfft: int) -> tuple[FloatArray, NDArray[np.complex128]]:
        """Frequency response on the ``nfft``-point grid ``[0, fs/2]``."""
        if nfft < self.taps.size:
            raise InvalidArgumentError("nfft must be at least the filter length")
        return np.fft.rfftfreq(nfft, 1.0 / self.fs), np.fft.rfft(self.taps, nfft)

    def gain_db(self, f: ArrayLike) -> FloatArray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.response(f)))


@dataclass(frozen=True)
class DecimationPlan:
    """Integer factors for the two decimation stages."""

    input_fs: float
    stage1_target: float
    stage2_target: float
    stage1_factor: int
    stage2_factor: int

    @property
    def stage1_rate(self) -> float:
        return self.input_fs / self.stage1_factor

    @property
    def stage2_rate(self) -> float:
        return self.stage1_rate / self.stage2_factor

    def covers(self, f0: float, half_width: float) -> bool:
        """True when the final rate keeps ``f0 +/- half_width`` alias free."""
        return self.stage2_rate > 2.0 * (f0 + half_width)


def plan_decimation(input_fs: float, fp: float, f0: float) -> DecimationPlan:
    """Pick integer factors that bring ``input_fs`` near ``10 fp`` and then ``4 f0``.

    Raises:
        InvalidArgumentError: ``input_fs < 10 fp``, ``fp < 2 f0`` or
            non-positive arguments.
    """
    if not (input_fs > 0 and fp > 0 and f0 > 0):
        raise InvalidArgumentError("input_fs, fp and f0 must all be positive")
    if input_fs < 10.0 * fp * (1.0 - 1e-12):
        raise InvalidArgumentError(
            f"input rate {input_fs:.6g} Hz is below 10*fp = {10 * fp:.6g} Hz; "
            "the excitation band is not adequately sampled"
        )
    if fp < 2.0 * f0:
        raise InvalidArgumentError(f"fp = {fp:.6g} Hz must be at least 2*f0 = {2 * f0:.6g} Hz")
    if fp < 5.0 * f0:
        warnings.warn(f"fp/f0 = {fp / f0:.3g} is small; the pulse may not excite f0 strongly", stacklevel=2)
    stage1_target = 10.0 * fp
    # small relative slack so that input_fs == 10*fp lands on factor 1
    stage1_factor = max(1, math.floor(input_fs / stage1_target * (1.0 + 1e-12)))
    stage1_rate = input_fs / stage1_factor
    stage2_target = 4.0 * f0
    stage2_factor = max(1, math.floor(stage1_rate / stage2_target * (1.0 + 1e-12)))
    return DecimationPlan(input_fs, stage1_target, stage2_target, stage1_factor, stage2_factor)


def decimate_raw(signal: UniformSignal, factor: int) -> UniformSignal:
    """Keep every ``factor``-th sample starting at index 0, no filtering."""
    if int(factor) != factor or factor < 1:
        raise InvalidArgumentError(f"decimation factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    if factor == 1:
        return signal
    return UniformSignal(signal.samples[::factor], signal.dt * factor, signal.t0)


def _kaiser_window_half(n_taps: int, beta: float) -> FloatArray:
    half = (n_taps - 1) // 2
    m = np.arange(half + 1)
    return np.i0(beta * np.sqrt(1.0 - (m / half) ** 2)) / np.i0(beta) if half else np.ones(1)


def _mirror(half: FloatArray) -> FloatArray:
    # half[0] is the center tap
    return np.concatenate([half[:0:-1], half])


def design_lowpass(fs: float, cutoff: float, stop_attenuation_db: float = AAF_STOP_ATTENUATION_DB) -> FirFilter:
    """Kaiser-windowed sinc low-pass.

    The passband edge is ``cutoff`` and the filter attenuates by at least
    ``stop_attenuation_db`` from ``1.25 * cutoff`` up to Nyquist. The length
    is taken from Kaiser's formula and grown until the stopband is verified
    on a dense grid. DC gain is normalized to 1.

    Raises:
        InvalidArgumentError: cutoff outside ``(0, fs/2)``, stop edge beyond
            Nyquist, or more than 1e6 taps required.
    """
    nyq = fs / 2.0
    if not 0 < cutoff < nyq:
        raise InvalidArgumentError(f"cutoff {cutoff:.6g} Hz must lie in (0, {nyq:.6g}) Hz")
    stop_edge = TRANSITION_RATIO * cutoff
    if stop_edge > nyq:
        raise InvalidArgumentError(f"stopband edge {stop_edge:.6g} Hz lies beyond Nyquist {nyq:.6g} Hz")
    if stop_attenuation_db <= 0:
        raise InvalidArgumentError("stop attenuation must be positive")
    width = stop_edge - cutoff
    n_taps, beta = kaiserord(stop_attenuation_db, width / nyq)
    n_taps += 1 - n_taps % 2
    if n_taps > MAX_TAPS:
        raise InvalidArgumentError(f"low-pass needs {n_taps} taps (> {MAX_TAPS}); relax the specification")
    sinc_cut = (cutoff + stop_edge) / 2.0 / fs  # cycles per sample
    limit = 10.0 ** (-stop_attenuation_db / 20.0)
    while True:
        m = np.arange((n_taps - 1) // 2 + 1)
        half = 2.0 * sinc_cut * np.sinc(2.0 * sinc_cut * m) * _kaiser_window_half(n_taps, beta)
        taps = _mirror(half)
        taps = taps / np.sum(taps)
        filt = FirFilter(taps, fs, cutoff=cutoff)
        nfft = 1 << int(math.ceil(math.log2(32 * n_taps)))
        freqs, h = filt.response_fft(nfft)
        if np.max(np.abs(h[freqs >= stop_edge]), initial=0.0) <= limit:
            logger.debug("low-pass fs=%.6g cutoff=%.6g: %d taps", fs, cutoff, n_taps)
            return filt
        n_taps += 2
        if n_taps > MAX_TAPS:
            raise InvalidArgumentError(f"low-pass needs more than {MAX_TAPS} taps")


def apply_fir(signal: UniformSignal, filt: FirFilter) -> UniformSignal:
    """Convolve and keep only fully overlapped outputs.

    The output has ``len(signal) - (len(filt) - 1)`` samples and its ``t0`` is
    advanced by ``(len(filt) - 1)`` samples minus the group delay, so each
    output sample is time-aligned with the input it represents.
    """
    if not same_rate(signal.fs, filt.fs):
        raise InvalidArgumentError(f"filter designed for {filt.fs:.9g} Hz, signal is at {signal.fs:.9g} Hz")
    if len(signal) < len(filt):
        raise InvalidArgumentError(f"signal ({len(signal)} samples) is shorter than the filter ({len(filt)} taps)")
    y = np.convolve(signal.samples, filt.taps, mode="valid")
    shift = (len(filt) - 1) - filt.group_delay_samples
    return UniformSignal(y, signal.dt, signal.t0 + shift * signal.dt)


def decimate_filtered(signal: UniformSignal, factor: int, aaf: FirFilter) -> UniformSignal:
    """Anti-alias filter, then keep every ``factor``-th sample."""
    if int(factor) != factor or factor < 1:
        raise InvalidArgumentError(f"decimation factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    if factor == 1:
        return signal
    new_nyq = signal.fs / factor / 2.0
    if aaf.cutoff is None or aaf.cutoff > new_nyq * (1.0 + 1e-12):
        raise InvalidArgumentError(f"anti-aliasing cutoff {aaf.cutoff!r} Hz exceeds new Nyquist {new_nyq:.6g} Hz")
    filtered = apply_fir(signal, aaf)
    return UniformSignal(filtered.samples[::factor], signal.dt * factor, filtered.t0)


def gaussian_bandpass(f0: float, f_tilde: float, fs: float) -> FirFilter:
    """Gaussian-envelope bandpass ``cos(2 pi f0 tau) exp(-2 pi f_tilde**2 tau**2)``.

    ``tau`` runs symmetrically about the envelope peak and stops where the
    envelope drops below 1e-12; the taps are scaled so that ``|H(f0)| = 1``.

    Raises:
        InvalidArgumentError: ``f_tilde <= 0`` or ``f0 + 3 f_tilde >= fs/2``.
    """
    if not f_tilde > 0 or not f0 > 0:
        raise InvalidArgumentError("f0 and f_tilde must be positive")
    if f0 + 3.0 * f_tilde >= fs / 2.0:
        raise InvalidArgumentError(
            f"bandpass f0 + 3*f_tilde = {f0 + 3 * f_tilde:.6g} Hz exceeds Nyquist {fs / 2:.6g} Hz"
        )
    half_span = math.sqrt(math.log(1.0 / GAUSSIAN_TRUNCATION) / (2.0 * math.pi)) / f_tilde
    m = np.arange(int(math.floor(half_span * fs)) + 1)
    tau = m / fs
    envelope = np.exp(-2.0 * math.pi * f_tilde**2 * tau**2)
    keep = envelope >= GAUSSIAN_TRUNCATION
    tau, envelope = tau[keep], envelope[keep]
    half = np.cos(2.0 * math.pi * f0 * tau) * envelope
    # zero-phase gain at f0: h0 + 2 * sum h_m cos(2 pi f0 m / fs)
    gain = half[0] + 2.0 * np.sum(half[1:] * np.cos(2.0 * math.pi * f0 * tau[1:]))
    return FirFilter(_mirror(half / abs(gain)), fs, center=f0)
