"""ESPRIT line-spectrum estimation and a zero-padded periodogram baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray

from .errors import EstimationError, IllConditionedError, InvalidArgumentError
from .signals import UniformSignal

logger = logging.getLogger(__name__)

EIGEN_GAP_FLOOR = 1e-12
PEAK_FLOOR_DB = -60.0


@dataclass(frozen=True)
class ComplexFrequencyEstimate:
    """One complex exponential ``amplitude * exp((damping + 2j pi frequency) t)``.

    ``damping`` is negative for decaying modes.
    """

    frequency: float
    damping: float
    amplitude: complex | None = None


@dataclass(frozen=True)
class RealMode:
    frequency: float
    damping: float


@dataclass(frozen=True)
class PairingResult:
    modes: list[RealMode]
    orphans: list[ComplexFrequencyEstimate]


@dataclass(frozen=True)
class EspritConfig:
    """ESPRIT settings.

    Attributes:
        m: Size of the (m x m) correlation matrix.
        n_complex_modes: Dimension of the signal subspace; two per real tone.
        pairing_tolerance: Relative mismatch allowed when merging +f and -f.
        forward_backward: Average forward and backward correlation estimates.
            The averaging assumes undamped modes and pulls damping estimates
            toward zero; turn it off when damping is the quantity of interest.
    """

    m: int = 24
    n_complex_modes: int = 4
    pairing_tolerance: float = 1e-3
    forward_backward: bool = True

    def __post_init__(self) -> None:
        if not 2 <= self.n_complex_modes < self.m:
            raise InvalidArgumentError(
                f"need 2 <= n_complex_modes < m, got n_complex_modes={self.n_complex_modes}, m={self.m}"
            )
        if not self.pairing_tolerance > 0:
            raise InvalidArgumentError("pairing_tolerance must be positive")


def forward_backward_correlation(signal: UniformSignal, m: int, forward_backward: bool = True) -> NDArray[np.float64]:
    """Sample correlation matrix over all length-``m`` windows, FB-averaged.

    Returns ``(R + J R^T J) / 2`` where ``R`` is the forward estimate
    normalized by the window count and ``J`` the exchange matrix. The result
    is exactly symmetric and exactly persymmetric.
    """
    x = signal.samples
    if m < 2:
        raise InvalidArgumentError(f"correlation order must be at least 2, got {m}")
    if x.size < 2 * m:
        raise InvalidArgumentError(f"signal has {x.size} samples; correlation order {m} needs at least {2 * m}")
    windows = sliding_window_view(x, m)
    r = windows.T @ windows / windows.shape[0]
    r = 0.5 * (r + r.T)
    if forward_backward:
        r = 0.5 * (r + r[::-1, ::-1])
    return r


def esprit(signal: UniformSignal, config: EspritConfig = EspritConfig()) -> list[ComplexFrequencyEstimate]:
    """Least-squares ESPRIT on the correlation matrix of ``signal``.

    Returns ``config.n_complex_modes`` estimates sorted by frequency. Each
    carries the amplitude from a least-squares fit of the exponentials to the
    samples, referenced to ``signal.t0``.

    Raises:
        InvalidArgumentError: signal shorter than ``2 m``.
        IllConditionedError: the gap between the last signal eigenvalue and
            the first noise eigenvalue is below 1e-12 of the largest.
    """
    n = config.n_complex_modes
    if n >= config.m:
        raise InvalidArgumentError("n_complex_modes must be below the correlation order")
    r = forward_backward_correlation(signal, config.m, config.forward_backward)
    eigvals, eigvecs = np.linalg.eigh(r)
    eigvals, eigvecs = eigvals[::-1], eigvecs[:, ::-1]
    top = eigvals[0]
    if not top > 0 or eigvals[n - 1] - eigvals[n] < EIGEN_GAP_FLOOR * top:
        raise IllConditionedError(
            f"signal subspace of dimension {n} is degenerate "
            f"(lambda_{n} = {eigvals[n - 1]:.3g}, lambda_{n + 1} = {eigvals[n]:.3g}, lambda_1 = {top:.3g})",
            eigvals.tolist(),
        )
    basis = eigvecs[:, :n]
    rotation, *_ = np.linalg.lstsq(basis[:-1], basis[1:], rcond=None)
    z = np.linalg.eigvals(rotation)

    frequency = np.angle(z) / (2.0 * math.pi * signal.dt)
    damping = np.log(np.abs(z)) / signal.dt
    amplitude = _fit_amplitudes(signal.samples, z)
    order = np.argsort(frequency, kind="stable")
    logger.debug("esprit eigenvalues %s", eigvals[: n + 2])
    return [
        ComplexFrequencyEstimate(float(frequency[i]), float(damping[i]), complex(amplitude[i])) for i in order
    ]


def _fit_amplitudes(x: NDArray[np.float64], z: NDArray[np.complex128]) -> NDArray[np.complex128]:
    vander = np.power.outer(z, np.arange(x.size)).T
    coeffs, *_ = np.linalg.lstsq(vander, x.astype(np.complex128), rcond=None)
    return coeffs


def pair_to_real_modes(estimates: Sequence[ComplexFrequencyEstimate], tolerance: float = 1e-3) -> PairingResult:
    """Merge conjugate (+f, -f) estimates into real modes.

    Unmatched estimates, including any at zero frequency, are returned as
    orphans.

    Raises:
        EstimationError: no conjugate pair was found.
    """
    positives = sorted((e for e in estimates if e.frequency > 0), key=lambda e: e.frequency)
    negatives = [e for e in estimates if e.frequency < 0]
    orphans = [e for e in estimates if e.frequency == 0]
    modes: list[RealMode] = []
    for pos in positives:
        best = None
        for j, neg in enumerate(negatives):
            mismatch = abs(pos.frequency + neg.frequency)
            if mismatch <= tolerance * pos.frequency and (best is None or mismatch < best[0]):
                best = (mismatch, j)
        if best is None:
            orphans.append(pos)
            continue
        neg = negatives.pop(best[1])
        modes.append(
            RealMode(0.5 * (pos.frequency - neg.frequency), 0.5 * (pos.damping + neg.damping))
        )
    orphans.extend(negatives)
    if not modes:
        raise EstimationError("no conjugate pairs among the estimates", list(estimates))
    return PairingResult(modes, orphans)


def select_split_pair(modes: Iterable[RealMode | float], f0: float, band: float) -> tuple[float, float]:
    """The two modes within ``band`` of ``f0`` that lie closest to it, ascending.

    Raises:
        EstimationError: fewer than two modes inside ``[f0 - band, f0 + band]``.
    """
    freqs = [m.frequency if isinstance(m, RealMode) else float(m) for m in modes]
    in_band = sorted((f for f in freqs if abs(f - f0) <= band), key=lambda f: abs(f - f0))
    if len(in_band) < 2:
        raise EstimationError(
            f"found {len(in_band)} mode(s) within {band:.6g} Hz of f0 = {f0:.6g} Hz; need two",
            freqs,
        )
    lo, hi = sorted(in_band[:2])
    return lo, hi


@dataclass(frozen=True)
class PeriodogramPeak:
    frequency: float
    magnitude: float


def rayleigh_limit(signal: UniformSignal) -> float:
    """Two-tone resolution of a rectangular-window periodogram, ``1 / (N dt)``."""
    return 1.0 / (len(signal) * signal.dt)


def periodogram_peaks(
    signal: UniformSignal, nfft: int, floor_db: float = PEAK_FLOOR_DB
) -> list[PeriodogramPeak]:
    """Local maxima of the zero-padded magnitude spectrum above ``floor_db``.

    Peak positions and heights are refined with a three-point parabola
    through the magnitude samples.
    """
    if nfft < len(signal):
        raise InvalidArgumentError(f"nfft ({nfft}) must be at least the signal length ({len(signal)})")
    mag = np.abs(np.fft.rfft(signal.samples, nfft))
    if mag.size < 3 or not np.max(mag) > 0:
        return []
    floor = np.max(mag) * 10.0 ** (floor_db / 20.0)
    left, mid, right = mag[:-2], mag[1:-1], mag[2:]
    idx = np.nonzero((mid > left) & (mid >= right) & (mid >= floor))[0] + 1
    df = signal.fs / nfft
    peaks = []
    for i in idx:
        a, b, c = mag[i - 1], mag[i], mag[i + 1]
        denom = a - 2.0 * b + c
        offset = 0.5 * (a - c) / denom if denom != 0 else 0.0
        height = b - 0.25 * (a - c) * offset
        peaks.append(PeriodogramPeak(float((i + offset) * df), float(height)))
    return peaks


def match_peaks(
    peaks: Sequence[PeriodogramPeak], targets: Sequence[float], radius: float
) -> list[PeriodogramPeak | None]:
    """Assign each target its own nearest peak within ``radius``.

    Assignment is greedy by distance; a peak serves at most one target, so two
    targets sharing one merged peak leave one of them unmatched.
    """
    candidates = sorted(
        (abs(p.frequency - t), ti, pi)
        for ti, t in enumerate(targets)
        for pi, p in enumerate(peaks)
        if abs(p.frequency - t) <= radius
    )
    matched: list[PeriodogramPeak | None] = [None] * len(targets)
    used: set[int] = set()
    for _, ti, pi in candidates:
        if matched[ti] is None and pi not in used:
            matched[ti] = peaks[pi]
            used.add(pi)
    return matched
