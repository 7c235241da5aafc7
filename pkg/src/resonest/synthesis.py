"""Coupling targets from a low-pass prototype, curve inversion, Debye permittivity."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import PchipInterpolator

from .errors import InvalidArgumentError, OutOfRangeError

SCHEMA_VERSION = 1
CURVE_CSV_HEADER = "x,y"


@dataclass(frozen=True)
class FilterPrototype:
    """Low-pass prototype values ``g0 .. g_{n+1}`` with center ``fc`` and bandwidth ``B``."""

    g: tuple[float, ...]
    fc: float
    B: float

    def __post_init__(self) -> None:
        g = tuple(float(v) for v in self.g)
        object.__setattr__(self, "g", g)
        if len(g) < 4:
            raise InvalidArgumentError(f"need g0..g_(n+1) with n >= 2, got {len(g)} values")
        if any(not v > 0 for v in g):
            raise InvalidArgumentError("all prototype values must be positive")
        if not (self.fc > 0 and self.B > 0):
            raise InvalidArgumentError("fc and B must be positive")
        if self.fractional_bandwidth >= 0.3:
            warnings.warn(
                f"fractional bandwidth {self.fractional_bandwidth:.3g} is wide for narrowband design formulas",
                stacklevel=3,
            )

    @property
    def order(self) -> int:
        return len(self.g) - 2

    @property
    def fractional_bandwidth(self) -> float:
        return self.B / self.fc


@dataclass(frozen=True)
class CouplingTargets:
    q_e_in: float
    q_e_out: float
    k: tuple[float, ...]

    def to_json_dict(self, proto: FilterPrototype | None = None) -> dict[str, Any]:
        out: dict[str, Any] = {"schema": SCHEMA_VERSION, "q_e_in": self.q_e_in, "q_e_out": self.q_e_out, "k": list(self.k)}
        if proto is not None:
            out["fractional_bandwidth"] = proto.fractional_bandwidth
            out["order"] = proto.order
        return out


def coupling_targets(proto: FilterPrototype) -> CouplingTargets:
    """External Q at both ends and inter-resonator couplings of a prototype."""
    g = proto.g
    n = proto.order
    delta = proto.fractional_bandwidth
    k = tuple(delta / math.sqrt(g[i] * g[i + 1]) for i in range(1, n))
    return CouplingTargets(g[0] * g[1] / delta, g[n] * g[n + 1] / delta, k)


@dataclass(frozen=True, eq=False)
class MonotoneCurve:
    """Samples of a strictly monotone function ``y(x)`` (e.g. K versus spacing)."""

    x: NDArray[np.float64]
    y: NDArray[np.float64]

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=np.float64).reshape(-1)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if x.size != y.size or x.size < 3:
            raise InvalidArgumentError("a curve needs at least three (x, y) samples")
        if np.any(np.diff(x) <= 0):
            raise InvalidArgumentError("curve x values must be strictly increasing")
        dy = np.diff(y)
        if not (np.all(dy > 0) or np.all(dy < 0)):
            raise InvalidArgumentError("curve y values must be strictly monotone")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def increasing(self) -> bool:
        return bool(self.y[-1] > self.y[0])

    def interpolator(self) -> PchipInterpolator:
        return PchipInterpolator(self.x, self.y, extrapolate=False)

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.interpolator()(x)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(CURVE_CSV_HEADER + "\n")
            np.savetxt(fh, np.column_stack([self.x, self.y]), fmt="%.17g", delimiter=",")

    @classmethod
    def from_csv(cls, path: str | Path) -> MonotoneCurve:
        with open(path) as fh:
            header = fh.readline().strip()
            if header.replace(" ", "") != CURVE_CSV_HEADER:
                raise InvalidArgumentError(f"{path}: expected header {CURVE_CSV_HEADER!r}, got {header!r}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if data.shape[1] != 2:
            raise InvalidArgumentError(f"{path}: expected two columns")
        return cls(data[:, 0], data[:, 1])


def invert_curve(curve: MonotoneCurve, target_y: float) -> float:
    """Solve ``curve(x) = target_y`` on a shape-preserving cubic interpolant.

    The interpolant (PCHIP) never leaves the range of neighbouring samples,
    so it stays monotone and the root is unique. Bisection runs until the
    residual is within 1e-9 of the sampled y-range.

    Raises:
        OutOfRangeError: ``target_y`` is outside the sampled range; the
            nearest endpoint value is attached as ``nearest``.
    """
    y_lo, y_hi = float(np.min(curve.y)), float(np.max(curve.y))
    if not y_lo <= target_y <= y_hi:
        nearest = y_lo if target_y < y_lo else y_hi
        raise OutOfRangeError(f"target {target_y!r} outside sampled range [{y_lo!r}, {y_hi!r}]", nearest)
    hit = np.nonzero(curve.y == target_y)[0]
    if hit.size:
        return float(curve.x[hit[0]])

    # bracket within one sample interval, then bisect on the cubic piece
    sign = 1.0 if curve.increasing else -1.0
    j = int(np.searchsorted(sign * curve.y, sign * target_y)) - 1
    lo, hi = float(curve.x[j]), float(curve.x[j + 1])
    interp = curve.interpolator()
    tol = 1e-9 * (y_hi - y_lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        resid = float(interp(mid)) - target_y
        if abs(resid) <= tol or mid in (lo, hi):
            return mid
        if sign * resid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DebyeModel:
    """``eps_inf + sum(delta_eps / (1 + j w tau))`` over ``terms = ((delta_eps, tau), ...)``."""

    eps_inf: float
    terms: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        terms = tuple((float(d), float(t)) for d, t in self.terms)
        object.__setattr__(self, "terms", terms)
        if not self.eps_inf >= 1.0:
            raise InvalidArgumentError(f"eps_inf must be >= 1, got {self.eps_inf!r}")
        for d, t in terms:
            if d < 0 or not t > 0:
                raise InvalidArgumentError(f"each term needs delta_eps >= 0 and tau > 0, got ({d!r}, {t!r})")

    @property
    def static_permittivity(self) -> float:
        return self.eps_inf + sum(d for d, _ in self.terms)


def debye_permittivity(model: DebyeModel, f: ArrayLike) -> complex | NDArray[np.complex128]:
    """Complex relative permittivity at frequency ``f`` (Hz). Im(eps) <= 0."""
    f_arr = np.asarray(f, dtype=np.float64)
    if np.any(f_arr < 0):
        raise InvalidArgumentError("frequency must be non-negative")
    w = 2.0 * np.pi * f_arr
    eps = np.full(f_arr.shape, model.eps_inf, dtype=np.complex128)
    for d, tau in model.terms:
        eps = eps + d / (1.0 + 1j * w * tau)
    return complex(eps) if eps.ndim == 0 else eps


def loss_tangent(model: DebyeModel, f: ArrayLike) -> float | NDArray[np.float64]:
    eps = np.asarray(debye_permittivity(model, f))
    out = -eps.imag / eps.real
    return float(out) if out.ndim == 0 else out
