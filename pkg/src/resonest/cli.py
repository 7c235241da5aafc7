"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 estimation failure.
Parameters resolve as: explicit flag > ``--config`` JSON file > built-in default.
Set ``RESONEST_LOG`` to error, warn, info or debug to control diagnostics.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import EstimationError, ExcitationBandwidthError, InvalidArgumentError, OutOfRangeError
from .extraction import (
    SCHEMA_VERSION,
    KPipelineConfig,
    condition_signal,
    external_q,
    extract_coupling,
    group_delay,
    s11_from_voltages,
)
from .signals import (
    CoupledPairSpec,
    PulseSpec,
    UniformSignal,
    gaussian_pulse,
    impulse,
    oracle_ode,
    oracle_two_tone,
)
from .spectral import (
    ComplexFrequencyEstimate,
    EspritConfig,
    RealMode,
    esprit,
    match_peaks,
    pair_to_real_modes,
    periodogram_peaks,
    rayleigh_limit,
)
from .synthesis import FilterPrototype, MonotoneCurve, coupling_targets, invert_curve

logger = logging.getLogger("resonest")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ESTIMATION = 2

# rectangular-window sidelobes peak at -13.3 dB; anything above this is a main lobe
MAINLOBE_FLOOR_DB = -10.0

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

PIPELINE_DEFAULTS: dict[str, Any] = {
    "alpha": 5.0,
    "m": 24,
    "modes": 4,
    "pairing_tol": 1e-3,
    "band": None,
    "forward_backward": True,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "gen": {
        "dt": None,
        "n": None,
        "fp": None,
        "exponent": 2.0 * math.pi,
        "f0": None,
        "k": None,
        "damping": 0.0,
        "amplitudes": [1.0, 1.0],
        "phases": [0.0, 0.0],
        "drive": "impulse",
        "substeps": 1,
        "out": None,
    },
    "extract-k": {**PIPELINE_DEFAULTS, "f0": None, "fp": None, "B": None, "out": None, "emit_stages": None, "jobs": 1},
    "extract-qe": {"inc": None, "tot": None, "fmin": None, "fmax": None, "nfft": None, "taper": False, "out": None, "spectrum": None},
    "synth": {"g": None, "fc": None, "B": None, "out": None},
    "invert": {"curve": None, "target": None, "out": None},
    "compare": {**PIPELINE_DEFAULTS, "f0": None, "fp": None, "B": None, "nfft_factor": 16, "truth": None, "out": None},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--f0", type=float, help="resonance frequency of one resonator (Hz)")
    p.add_argument("--fp", type=float, help="excitation pulse parameter (Hz)")
    p.add_argument("--B", type=float, help="design bandwidth (Hz)")
    p.add_argument("--alpha", type=float, help="bandpass width factor, f_tilde = alpha*B (default 5)")
    p.add_argument("--m", type=int, help="correlation matrix size (default 24)")
    p.add_argument("--modes", type=int, help="complex modes to estimate (default 4)")
    p.add_argument("--pairing-tol", type=float, help="relative conjugate-pairing tolerance (default 1e-3)")
    p.add_argument("--band", type=float, help="selection half-band around f0 (default 3*alpha*B)")
    p.add_argument("--no-fb", dest="forward_backward", action="store_const", const=False,
                   help="disable forward-backward averaging")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="resonest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a pulse or oracle signal CSV plus a ground-truth sidecar")
    g.add_argument("kind", choices=["pulse", "two-tone", "ode"])
    g.add_argument("--dt", type=float, help="sample interval (s)")
    g.add_argument("--n", type=int, help="number of samples")
    g.add_argument("--fp", type=float, help="pulse parameter (Hz); for ode with --drive pulse")
    g.add_argument("--exponent", type=float, help="pulse exponent coefficient (default 2*pi)")
    g.add_argument("--f0", type=float, help="uncoupled resonance (Hz)")
    g.add_argument("--k", type=float, help="coupling coefficient in [0, 1)")
    g.add_argument("--damping", type=float, help="mode decay rate (1/s)")
    g.add_argument("--amplitudes", type=float, nargs=2, help="lower and upper mode amplitudes")
    g.add_argument("--phases", type=float, nargs=2, help="radians")
    g.add_argument("--drive", choices=["impulse", "pulse"], help="ode excitation (default impulse)")
    g.add_argument("--substeps", type=int, help="integrator steps per sample (ode)")
    g.add_argument("-o", "--out", type=Path, help="signal CSV path (default <kind>.csv)")

    k = sub.add_parser("extract-k", help="coupling coefficient from probe-voltage CSV(s)")
    k.add_argument("inputs", nargs="+", type=Path, help="probe-voltage CSV files (t,v)")
    _add_pipeline_options(k)
    k.add_argument("-o", "--out", type=Path, help="JSON file (one input) or directory (several)")
    k.add_argument("--emit-stages", type=Path, help="directory for intermediate-stage CSVs")
    k.add_argument("--jobs", type=int, help="parallel workers for several inputs")

    q = sub.add_parser("extract-qe", help="external Q from incident and total voltage CSVs")
    q.add_argument("--inc", type=Path, help="incident-voltage CSV")
    q.add_argument("--tot", type=Path, help="total-voltage CSV at the same port")
    q.add_argument("--fmin", type=float, help="lower edge of the analysis band (Hz)")
    q.add_argument("--fmax", type=float, help="upper edge of the analysis band (Hz)")
    q.add_argument("--nfft", type=int, help="transform length (default 16x record length)")
    q.add_argument("--taper", action="store_const", const=True, help="fade out the last 10%% of the records")
    q.add_argument("-o", "--out", type=Path, help="JSON result path (default stdout)")
    q.add_argument("--spectrum", type=Path, help="spectrum CSV path")

    s = sub.add_parser("synth", help="coupling targets from low-pass prototype values")
    s.add_argument("--g", type=str, nargs="+", help="g0 .. g_(n+1), space or comma separated")
    s.add_argument("--fc", type=float, help="center frequency (Hz)")
    s.add_argument("--B", type=float, help="bandwidth (Hz)")
    s.add_argument("-o", "--out", type=Path, help="JSON result path (default stdout)")

    i = sub.add_parser("invert", help="x at which a sampled monotone curve reaches a target y")
    i.add_argument("--curve", type=Path, help="CSV with x,y columns, y monotone in x")
    i.add_argument("--target", type=float, help="y value to reach")
    i.add_argument("-o", "--out", type=Path, help="also write a JSON record")

    c = sub.add_parser("compare", help="ESPRIT versus periodogram on the same conditioned signal")
    c.add_argument("input", type=Path, help="probe-voltage CSV (t,v)")
    _add_pipeline_options(c)
    c.add_argument("--nfft-factor", type=int, help="zero-padding factor for the periodogram (default 16)")
    c.add_argument("--truth", type=Path, help="sidecar JSON written by 'gen'")
    c.add_argument("-o", "--out", type=Path, help="JSON report path (default stdout)")

    for p in (g, k, q, s, i, c):
        p.add_argument("--config", type=Path, help="JSON file of parameter defaults")
    return parser


def resolve(command: str, args: argparse.Namespace) -> dict[str, Any]:
    """Merge built-in defaults, the --config file and explicit flags."""
    params = dict(DEFAULTS[command])
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read config {args.config}: {err}") from err
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(params)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        params.update({key.replace("-", "_"): value for key, value in loaded.items()})
    for key, value in vars(args).items():
        if key in params and value is not None:
            params[key] = value
    return params


def _require(params: dict[str, Any], *names: str) -> None:
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise UsageError("missing required parameter(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _pipeline_config(params: dict[str, Any]) -> KPipelineConfig:
    _require(params, "f0", "fp", "B")
    ec = EspritConfig(
        m=int(params["m"]),
        n_complex_modes=int(params["modes"]),
        pairing_tolerance=float(params["pairing_tol"]),
        forward_backward=bool(params["forward_backward"]),
    )
    return KPipelineConfig(
        f0=float(params["f0"]),
        fp=float(params["fp"]),
        B=float(params["B"]),
        alpha=float(params["alpha"]),
        esprit=ec,
        band_for_selection=None if params["band"] is None else float(params["band"]),
    )


def _emit_json(payload: Any, out: Path | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False)
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n")


def cmd_gen(params: dict[str, Any]) -> int:
    kind = params["kind"]
    _require(params, "dt", "n")
    dt, n = float(params["dt"]), int(params["n"])
    out = Path(params["out"] or f"{kind}.csv")
    truth: dict[str, Any] = {"schema": SCHEMA_VERSION, "kind": kind, "dt": dt, "n": n}
    if kind == "pulse":
        _require(params, "fp")
        spec = PulseSpec(float(params["fp"]), float(params["exponent"]))
        signal = gaussian_pulse(spec, dt, n)
        truth.update(fp=spec.fp, exponent=spec.exponent, peak_time=1.0 / spec.fp)
    else:
        _require(params, "f0", "k")
        pair = CoupledPairSpec(
            float(params["f0"]),
            float(params["k"]),
            float(params["damping"]),
            tuple(params["amplitudes"]),
            tuple(params["phases"]),
        )
        if kind == "two-tone":
            signal = oracle_two_tone(pair, dt, n)
        else:
            if params["drive"] == "pulse":
                _require(params, "fp")
                drive = gaussian_pulse(PulseSpec(float(params["fp"]), float(params["exponent"])), dt, n)
                truth["fp"] = float(params["fp"])
            else:
                drive = impulse(dt, n)
            truth["drive"] = params["drive"]
            signal = oracle_ode(pair, dt, n, drive, int(params["substeps"]))
        truth.update(k=pair.k, f0=pair.f0, f_minus=pair.f_minus, f_plus=pair.f_plus, damping=pair.damping)
    signal.to_csv(out)
    _emit_json(truth, out.with_suffix(".json"))
    logger.info("wrote %s (%d samples) and %s", out, len(signal), out.with_suffix(".json"))
    return EXIT_OK


def _extract_one(path: Path, config: KPipelineConfig, stage_dir: Path | None) -> dict[str, Any]:
    signal = UniformSignal.from_csv(path)
    result = extract_coupling(signal, config, keep_signals=stage_dir is not None)
    if stage_dir is not None:
        stage_dir.mkdir(parents=True, exist_ok=True)
        for name, sig in result.signals.items():
            sig.to_csv(stage_dir / f"{name}.csv")
    payload = result.to_json_dict()
    payload["diagnostics"]["source"] = str(path)
    return payload


def _extract_worker(path: Path, config: KPipelineConfig, stage_dir: Path | None) -> tuple[str, Any]:
    # runs in a child process: report failures as data
    try:
        return "ok", _extract_one(path, config, stage_dir)
    except EstimationError as err:
        return "estimation", (str(err), [_format_mode(m) for m in err.modes])
    except (InvalidArgumentError, OSError, ValueError) as err:
        return "usage", str(err)


def _format_mode(mode: Any) -> str:
    if isinstance(mode, (ComplexFrequencyEstimate, RealMode)):
        return f"{mode.frequency:.12g} Hz, damping {mode.damping:.6g} 1/s"
    if isinstance(mode, float):
        return f"{mode:.12g} Hz"
    return repr(mode)


def cmd_extract_k(params: dict[str, Any]) -> int:
    config = _pipeline_config(params)
    inputs: list[Path] = list(params["inputs"])
    emit = params["emit_stages"]
    stage_dirs = [
        None if emit is None else (Path(emit) if len(inputs) == 1 else Path(emit) / p.stem) for p in inputs
    ]
    jobs = max(1, int(params["jobs"]))
    if jobs > 1 and len(inputs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_extract_worker, inputs, [config] * len(inputs), stage_dirs))
    else:
        outcomes = [_extract_worker(p, config, d) for p, d in zip(inputs, stage_dirs)]

    status = EXIT_OK
    results = []
    for path, (kind, value) in zip(inputs, outcomes):
        if kind == "ok":
            results.append(value)
            continue
        if kind == "estimation":
            message, modes = value
            print(f"{path}: estimation failed: {message}", file=sys.stderr)
            for m in modes:
                print(f"  mode: {m}", file=sys.stderr)
            status = max(status, EXIT_ESTIMATION)
        else:
            print(f"{path}: error: {value}", file=sys.stderr)
            status = max(status, EXIT_USAGE) if status != EXIT_ESTIMATION else status
        results.append({"schema": SCHEMA_VERSION, "error": value if kind == "usage" else value[0], "source": str(path)})

    out = params["out"]
    if len(inputs) == 1:
        if status == EXIT_OK:
            _emit_json(results[0], out)
    elif out is None:
        _emit_json(results, None)
    else:
        Path(out).mkdir(parents=True, exist_ok=True)
        for path, payload in zip(inputs, results):
            _emit_json(payload, Path(out) / f"{path.stem}.k.json")
    return status


def cmd_extract_qe(params: dict[str, Any]) -> int:
    _require(params, "inc", "tot", "fmin", "fmax")
    v_inc = UniformSignal.from_csv(params["inc"])
    v_tot = UniformSignal.from_csv(params["tot"])
    nfft = params["nfft"] or 16 * max(len(v_inc), len(v_tot))
    try:
        spectrum = s11_from_voltages(v_inc, v_tot, float(params["fmin"]), float(params["fmax"]), int(nfft), bool(params["taper"]))
    except ExcitationBandwidthError as err:
        shown = ", ".join(f"{f:.6g}" for f in err.frequencies[:10])
        more = "" if len(err.frequencies) <= 10 else f" (+{len(err.frequencies) - 10} more)"
        print(f"error: {err}\n  weak-excitation frequencies (Hz): {shown}{more}", file=sys.stderr)
        return EXIT_ESTIMATION
    spectrum = group_delay(spectrum)
    if params["spectrum"] is not None:
        spectrum.to_csv(params["spectrum"])
    q_e, f0 = external_q(spectrum)
    _emit_json(
        {
            "schema": SCHEMA_VERSION,
            "q_e": q_e,
            "f0_hz": f0,
            "diagnostics": {"nfft": int(nfft), "points": int(spectrum.frequencies.size), "warnings": spectrum.warnings},
        },
        params["out"],
    )
    return EXIT_OK


def _parse_g(values: Sequence[str]) -> tuple[float, ...]:
    tokens = [t for v in values for t in str(v).replace(",", " ").split()]
    try:
        return tuple(float(t) for t in tokens)
    except ValueError as err:
        raise UsageError(f"bad g value: {err}") from err


def cmd_synth(params: dict[str, Any]) -> int:
    _require(params, "g", "fc", "B")
    g = params["g"]
    proto = FilterPrototype(_parse_g(g if isinstance(g, list) else [g]), float(params["fc"]), float(params["B"]))
    _emit_json(coupling_targets(proto).to_json_dict(proto), params["out"])
    return EXIT_OK


def cmd_invert(params: dict[str, Any]) -> int:
    _require(params, "curve", "target")
    curve = MonotoneCurve.from_csv(params["curve"])
    target = float(params["target"])
    x = invert_curve(curve, target)
    print(repr(x))
    if params["out"] is not None:
        _emit_json({"schema": SCHEMA_VERSION, "target_y": target, "x": x}, params["out"])
    return EXIT_OK


def compare_report(signal: UniformSignal, config: KPipelineConfig, nfft_factor: int, truth: dict[str, Any] | None) -> dict[str, Any]:
    """ESPRIT and periodogram estimates on the same conditioned signal."""
    stages: dict[str, Any] = {}
    conditioned, _ = condition_signal(signal, config, stages)
    band = config.selection_band
    f0 = config.f0

    pairing = pair_to_real_modes(esprit(conditioned, config.esprit), config.esprit.pairing_tolerance)
    esprit_modes = sorted(m.frequency for m in pairing.modes if abs(m.frequency - f0) <= band)

    nfft = nfft_factor * len(conditioned)
    rayleigh = rayleigh_limit(conditioned)
    peaks = [p for p in periodogram_peaks(conditioned, nfft, MAINLOBE_FLOOR_DB) if abs(p.frequency - f0) <= band]

    if truth is not None:
        reference = sorted({float(truth["f_minus"]), float(truth["f_plus"])})
    else:
        reference = esprit_modes
    matched = match_peaks(peaks, reference, 0.5 * rayleigh)
    periodogram_modes = sorted(p.frequency for p in matched if p is not None)
    periodogram_resolved = bool(reference) and all(p is not None for p in matched)

    report: dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "window_samples": len(conditioned),
        "window_s": conditioned.duration,
        "sample_rate_hz": conditioned.fs,
        "rayleigh_limit_hz": rayleigh,
        "nfft": nfft,
        "esprit_modes_hz": esprit_modes,
        "esprit_mode_count": len(esprit_modes),
        "periodogram_peaks_hz": [p.frequency for p in peaks],
        "periodogram_modes_hz": periodogram_modes,
        "periodogram_mode_count": len(periodogram_modes),
        "esprit_resolved": len(esprit_modes) == len(reference),
        "periodogram_resolved": periodogram_resolved,
        "diagnostics": stages,
    }
    if truth is not None:
        report["truth_hz"] = reference
        report["esprit_error_rel"] = _max_rel_error(esprit_modes, reference)
        report["periodogram_error_rel"] = (
            _max_rel_error(periodogram_modes, reference) if periodogram_resolved else None
        )
    return report


def _max_rel_error(estimates: Sequence[float], reference: Sequence[float]) -> float | None:
    if not estimates or not reference:
        return None
    return max(min(abs(e - r) for e in estimates) / r for r in reference)


def cmd_compare(params: dict[str, Any]) -> int:
    config = _pipeline_config(params)
    signal = UniformSignal.from_csv(params["input"])
    truth = None
    if params["truth"] is not None:
        truth = json.loads(Path(params["truth"]).read_text())
    _emit_json(compare_report(signal, config, int(params["nfft_factor"]), truth), params["out"])
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "extract-k": cmd_extract_k,
    "extract-qe": cmd_extract_qe,
    "synth": cmd_synth,
    "invert": cmd_invert,
    "compare": cmd_compare,
}


def _configure_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("RESONEST_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)


def _log_warning(message, category, filename, lineno, file=None, line=None) -> None:  # noqa: ANN001
    logger.warning("%s", message)


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        warnings.showwarning = _log_warning
        return _dispatch(args)


def _dispatch(args: argparse.Namespace) -> int:
    params_extra = {"kind": getattr(args, "kind", None), "inputs": getattr(args, "inputs", None), "input": getattr(args, "input", None)}
    try:
        params = resolve(args.command, args)
        params.update({k: v for k, v in params_extra.items() if v is not None})
        return COMMANDS[args.command](params)
    except UsageError as err:
        print(f"resonest {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OutOfRangeError as err:
        print(f"resonest {args.command}: {err} (nearest endpoint {err.nearest!r})", file=sys.stderr)
        return EXIT_USAGE
    except EstimationError as err:
        print(f"resonest {args.command}: estimation failed: {err}", file=sys.stderr)
        for m in err.modes:
            print(f"  mode: {_format_mode(m)}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (InvalidArgumentError, ValueError, OSError) as err:
        print(f"resonest {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
