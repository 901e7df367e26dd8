"""Command-line front end.

Every command reads a TOML device configuration (SI base units only),
runs one module operation and writes CSV data products next to a JSON run
manifest recording the command line, config hash, seed, tool version and
timestamps.  Numeric CSV columns carry unit-suffixed headers and 17
significant digits; files are written atomically (temp + rename).

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.  Failures also emit a one-line JSON error record on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .circuit_model import JunctionParams
from .errors import ConfigError, JJOscError
from .fidelity import (
    QubitOperation,
    dephasing_integral,
    infidelity,
    load_phase_noise_csv,
)
from .injection import fit_adler_constant, locking_map
from .sigproc import power_spectral_density
from .steady_state import (
    ResonatorParams,
    bias_sweep,
    max_abs_j1,
    optimal_load,
    solve_operating_point,
)
from .time_domain import InjectionTone, SimConfig, iv_curve, simulate

__all__ = ["main", "load_device_config", "parse_sweep"]


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write_text(path, buf.getvalue())


def write_manifest(path: Path, command: str, argv, config_path, seed, outputs, started: str) -> None:
    config_hash = None
    if config_path is not None:
        config_hash = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
    manifest = {
        "command": command,
        "argv": list(argv),
        "config_sha256": config_hash,
        "seed": seed,
        "tool_version": __version__,
        "started_utc": started,
        "finished_utc": _utc_now(),
        "outputs": [str(o) for o in outputs],
    }
    _atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _require(table: dict, section: str, key: str) -> float:
    if key not in table:
        raise ConfigError(f"{section}.{key}: missing required key")
    value = table[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
    return float(value)


def load_device_config(path) -> tuple[JunctionParams, ResonatorParams, float]:
    """Parse a device TOML file into junction/resonator parameters plus
    the environment temperature (K).  Invariants are enforced here with
    path-qualified messages."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    if "junction" not in data:
        raise ConfigError("junction: missing section")
    if "resonator" not in data:
        raise ConfigError("resonator: missing section")
    jt = data["junction"]
    rt = data["resonator"]
    try:
        junction = JunctionParams(
            ic=_require(jt, "junction", "ic_a"),
            cs=_require(jt, "junction", "cs_f"),
            rs=_require(jt, "junction", "rs_ohm"),
        )
    except ValueError as exc:
        raise ConfigError(f"junction: {exc}") from exc
    try:
        resonator = ResonatorParams(
            l1=_require(rt, "resonator", "l1_h"),
            c1=_require(rt, "resonator", "c1_f"),
            r1=_require(rt, "resonator", "r1_ohm"),
            lp=float(rt.get("lp_h", 0.0)),
            qt=float(rt["qt"]) if "qt" in rt else None,
            qe=float(rt["qe"]) if "qe" in rt else None,
        )
    except ValueError as exc:
        raise ConfigError(f"resonator: {exc}") from exc
    temperature = float(data.get("environment", {}).get("temperature_k", 0.0))
    if temperature < 0.0:
        raise ConfigError("environment.temperature_k: must be >= 0")
    return junction, resonator, temperature


def parse_sweep(text: str, name: str) -> np.ndarray:
    """Parse ``start:stop:step`` into an inclusive grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{name}: expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{name}: non-numeric sweep bound in {text!r}") from exc
    if step <= 0.0:
        raise ConfigError(f"{name}: step must be > 0")
    if stop < start:
        raise ConfigError(f"{name}: empty range, stop < start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _read_trace_csv(path) -> tuple[np.ndarray, float]:
    rows = np.genfromtxt(path, delimiter=",", names=True)
    if rows.size < 4 or "t_s" not in (rows.dtype.names or ()):
        raise ConfigError(f"{path}: not a trace CSV (need t_s and v_v columns)")
    t = rows["t_s"]
    return rows["v_v"], float(t[1] - t[0])


# --------------------------------------------------------------------------
# commands


def cmd_operating_point(args) -> tuple[int, list[Path]]:
    j, r, _ = load_device_config(args.config)
    op = solve_operating_point(j, r, args.ib)
    out = Path(args.out) / "operating_point.csv"
    write_csv(
        out,
        [
            "ib_a",
            "f_emit_hz",
            "i1_a",
            "ij_dc_a",
            "phic_rad",
            "p_out_w",
            "p_dc_w",
            "efficiency_frac",
            "region",
        ],
        [
            (
                args.ib,
                op.f_emit,
                op.i1,
                op.ij_dc,
                op.phic,
                op.p_out,
                op.p_dc,
                op.efficiency,
                op.region.value,
            )
        ],
    )
    return 0, [out]


def cmd_sweep_bias(args) -> tuple[int, list[Path]]:
    j, r, _ = load_device_config(args.config)
    grid = parse_sweep(args.ib, "--ib")
    rows = bias_sweep(j, r, grid)
    out = Path(args.out) / "bias_sweep.csv"
    write_csv(
        out,
        ["ib_a", "region", "v_dc_v", "f_emit_hz", "p_out_w", "error"],
        [
            (
                row.ib,
                row.region.value if row.region else "failed",
                row.v_dc,
                row.f_emit,
                row.p_out,
                row.error,
            )
            for row in rows
        ],
    )
    return 0, [out]


def cmd_iv(args) -> tuple[int, list[Path]]:
    j, r, _ = load_device_config(args.config)
    grid = parse_sweep(args.ib, "--ib")
    cfg = SimConfig(duration=args.duration, dt_out=args.dt_out, seed=args.seed)
    rows = iv_curve(j, r, grid, cfg)
    out = Path(args.out) / "iv_curve.csv"
    write_csv(
        out,
        ["ib_a", "v_dc_v", "error"],
        [(row.ib, row.v_dc, row.error) for row in rows],
    )
    return 0, [out]


def cmd_simulate(args) -> tuple[int, list[Path]]:
    j, r, _ = load_device_config(args.config)
    injection = None
    if args.inject_freq_hz is not None:
        injection = InjectionTone(
            amplitude=args.inject_amp_a or 0.0, frequency=args.inject_freq_hz
        )
    cfg = SimConfig(
        duration=args.duration,
        dt_out=args.dt_out,
        seed=args.seed,
        noise_temperature=args.noise_temp_k,
        injection=injection,
    )
    trace = simulate(j, r, args.ib, cfg)
    out = Path(args.out) / "trace.csv"
    t = trace.times()
    write_csv(
        out,
        ["t_s", "phi_rad", "v_v", "i_res_a", "q_res_c"],
        zip(t, trace.phi, trace.v, trace.i_res, trace.q_res),
    )
    return 0, [out]


def cmd_spectrum(args) -> tuple[int, list[Path]]:
    v, dt = _read_trace_csv(args.trace)
    s = power_spectral_density(v - v.mean(), args.segment, sample_rate=1.0 / dt)
    out = Path(args.out) / "spectrum.csv"
    write_csv(out, ["f_hz", "psd_w_per_hz"], zip(s.f, s.psd))
    return 0, [out]


def cmd_injection_map(args) -> tuple[int, list[Path]]:
    j, r, _ = load_device_config(args.config)
    grid = parse_sweep(args.f_inj, "--f-inj")
    if len(grid) < 2:
        raise ConfigError("--f-inj: need at least two grid points")
    cfg = SimConfig(
        duration=args.duration,
        dt_out=args.dt_out,
        seed=args.seed,
        transient_fraction=0.3,
    )
    m = locking_map(j, r, args.ib, grid, args.p_inj_dbm, args.coupling, cfg)
    long_rows = []
    for fi, spec in zip(m.f_inj, m.spectra):
        if spec is None:
            continue
        for f_sa, psd in zip(spec.f, spec.psd):
            long_rows.append((fi, f_sa, psd))
    out_map = Path(args.out) / "injection_map.csv"
    write_csv(out_map, ["f_inj_hz", "f_sa_hz", "psd_w_per_hz"], long_rows)
    out_summary = Path(args.out) / "injection_summary.csv"
    write_csv(
        out_summary,
        ["f_inj_hz", "locked", "pulled_hz", "sideband_frac", "error"],
        [
            (
                fi,
                (res.locked if res else None),
                (res.pulled_frequency if res else None),
                (res.sideband_fraction if res else None),
                err,
            )
            for fi, res, err in zip(m.f_inj, m.results, m.errors)
        ],
    )
    return 0, [out_map, out_summary]


def cmd_adler_fit(args) -> tuple[int, list[Path]]:
    rows = np.genfromtxt(args.data, delimiter=",", names=True)
    names = rows.dtype.names or ()
    if "p_inj_w" not in names or "delta_f_hz" not in names:
        raise ConfigError(f"{args.data}: need columns p_inj_w, delta_f_hz")
    fit = fit_adler_constant(
        list(zip(np.atleast_1d(rows["p_inj_w"]), np.atleast_1d(rows["delta_f_hz"])))
    )
    out = Path(args.out) / "adler_fit.csv"
    write_csv(
        out,
        ["k_hz_per_sqrt_w", "r_squared_frac"],
        [(fit.k, fit.r_squared)],
    )
    return 0, [out]


def cmd_fidelity(args) -> tuple[int, list[Path]]:
    model = load_phase_noise_csv(args.phase_noise)
    ops = (
        list(QubitOperation)
        if args.op == "all"
        else [QubitOperation(args.op)]
    )
    if args.tau_geom:
        parts = args.tau_geom.split(":")
        if len(parts) != 3:
            raise ConfigError("--tau-geom: expected start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if not (0 < start < stop) or count < 1:
            raise ConfigError("--tau-geom: need 0 < start < stop and count >= 1")
        taus = np.geomspace(start, stop, count)
    else:
        taus = parse_sweep(args.tau, "--tau")
        if np.any(taus <= 0.0):
            raise ConfigError("--tau: evolution times must be > 0")
    rows = []
    for op in ops:
        for tau in taus:
            x = dephasing_integral(
                model, op, float(tau), f_min=args.f_min, f_max=args.f_max
            )
            rows.append((float(tau), op.value, infidelity(x)))
    out = Path(args.out) / "infidelity.csv"
    write_csv(out, ["tau_s", "op", "infidelity_frac"], rows)
    return 0, [out]


def cmd_design_optimize(args) -> tuple[int, list[Path]]:
    _, j1_peak = max_abs_j1()
    from .circuit_model import PhysicalConstants as C

    omega = 2.0 * math.pi * args.freq
    hf_over_2e = C.hbar * omega / (2.0 * C.e)
    ic_required = args.target_power / (j1_peak * hf_over_2e)
    r1_opt = optimal_load(ic_required, args.cs, omega)
    out = Path(args.out) / "design.csv"
    write_csv(
        out,
        [
            "target_power_w",
            "freq_hz",
            "cs_f",
            "ic_required_a",
            "r1_optimal_ohm",
            "j1_peak_frac",
        ],
        [(args.target_power, args.freq, args.cs, ic_required, r1_opt, j1_peak)],
    )
    return 0, [out]


# --------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jjosc",
        description="Josephson-junction microwave oscillator design toolkit",
    )
    parser.add_argument("--version", action="version", version=f"jjosc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="device TOML file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("operating-point", help="solve one bias point")
    common(p)
    p.add_argument("--ib", type=float, required=True, help="bias current (A)")
    p.set_defaults(func=cmd_operating_point)

    p = sub.add_parser("sweep-bias", help="classify a bias sweep (analytic model)")
    common(p)
    p.add_argument("--ib", required=True, help="start:stop:step (A)")
    p.set_defaults(func=cmd_sweep_bias)

    p = sub.add_parser("iv", help="time-domain IV curve")
    common(p)
    p.add_argument("--ib", required=True, help="start:stop:step (A)")
    p.add_argument("--duration", type=float, default=0.5e-6, help="per-point time (s)")
    p.add_argument("--dt-out", type=float, default=1e-10)
    p.set_defaults(func=cmd_iv)

    p = sub.add_parser("simulate", help="integrate the full circuit")
    common(p)
    p.add_argument("--ib", type=float, required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--dt-out", type=float, required=True)
    p.add_argument("--noise-temp-k", type=float, default=0.0)
    p.add_argument("--inject-freq-hz", type=float, default=None)
    p.add_argument("--inject-amp-a", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="Welch PSD of a saved trace")
    common(p, config=False)
    p.add_argument("--trace", required=True, help="trace CSV from `simulate`")
    p.add_argument("--segment", type=int, default=4096)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("injection-map", help="lock map vs injection frequency")
    common(p)
    p.add_argument("--ib", type=float, required=True)
    p.add_argument("--f-inj", required=True, help="start:stop:step (Hz)")
    p.add_argument("--p-inj-dbm", type=float, required=True)
    p.add_argument("--coupling", type=float, required=True, help="A per sqrt(W)")
    p.add_argument("--duration", type=float, default=10e-6)
    p.add_argument("--dt-out", type=float, default=1e-8)
    p.set_defaults(func=cmd_injection_map)

    p = sub.add_parser("adler-fit", help="fit the lock-range square-root law")
    common(p, config=False)
    p.add_argument("--data", required=True, help="CSV with p_inj_w, delta_f_hz")
    p.set_defaults(func=cmd_adler_fit)

    p = sub.add_parser("fidelity", help="qubit-operation infidelity from phase noise")
    common(p, config=False)
    p.add_argument("--phase-noise", required=True, help="CSV f_off_hz, l_dbc_per_hz")
    p.add_argument(
        "--op",
        default="all",
        choices=["all", "ramsey", "hahn_echo", "not_gate"],
    )
    p.add_argument("--tau", default=None, help="start:stop:step (s)")
    p.add_argument("--tau-geom", default=None, help="start:stop:count geometric grid")
    p.add_argument("--f-min", type=float, default=0.1)
    p.add_argument("--f-max", type=float, default=1e9)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("design-optimize", help="critical current and load for a power target")
    common(p, config=False)
    p.add_argument("--target-power", type=float, required=True, help="W")
    p.add_argument("--freq", type=float, required=True, help="Hz")
    p.add_argument("--cs", type=float, default=192e-12, help="shunt capacitance (F)")
    p.set_defaults(func=cmd_design_optimize)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = _utc_now()
    try:
        if getattr(args, "command", None) == "fidelity" and not (args.tau or args.tau_geom):
            raise ConfigError("fidelity: provide --tau or --tau-geom")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        status, outputs = args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except JJOscError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 4
    manifest_path = Path(str(outputs[0]) + ".manifest.json")
    write_manifest(
        manifest_path,
        args.command,
        argv,
        getattr(args, "config", None),
        getattr(args, "seed", None),
        outputs,
        started,
    )
    return status


if __name__ == "__main__":
    raise SystemExit(main())
