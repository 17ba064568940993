"""Batch command-line interface.

Subcommands
-----------
spectrum   single-frequency covariance with its component breakdown
sweep      covariance table along one parameter axis
oracle     Monte-Carlo spectral estimate plus analytic comparison
fit        parameter recovery from data CSVs (eta-diag, eta-cross, waist, temp)
replay     re-run a manifest and byte-compare the outputs

Every command writes its outputs as headered CSV (comma separated, '.'
decimal, floats via repr so reruns are byte-identical) plus exactly one JSON
manifest recording the command, the resolved configuration snapshot, input
file digests, the tool version, the master seed for stochastic runs, and the
output file list.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 comparison failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .core import (
    NumericalError,
    ValidationError,
    normalize_frequency,
    operating_point,
    upper_triangle_labels,
    validate_config,
    UPPER_TRIANGLE,
)
from .configio import (
    cavity_from_values,
    eta_from_values,
    read_config_file,
    temp_law_from_values,
    threshold_power_from_values,
)
from .drift import coupling_matrices, opo_drift
from .fitting import (
    CrossCovarianceRecord,
    PowerVarianceRecord,
    fit_eta_cross,
    fit_eta_diagonal,
    fit_temperature,
    fit_waist_profile,
)
from .oracle import NoiseSources, plan_from_values, simulate_psd
from .phonon import NoiseCouplings, build_vq
from .spectra import duan_criterion, output_covariance, sweep, vlf_tripartite

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_COMPARISON = 3


def _fmt(x) -> str:
    return repr(float(x))


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(out_dir, name, command, arguments, snapshots, digests, outputs, seed=None):
    manifest = {
        "command": command,
        "tool_version": __version__,
        "arguments": arguments,
        "snapshots": snapshots,
        "input_digests": digests,
        "master_seed": seed,
        "outputs": outputs,
    }
    path = os.path.join(out_dir, f"{name}.manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_cavity_or_die(values, source):
    config = cavity_from_values(values, source)
    violations = validate_config(config)
    if violations:
        for v in violations:
            print(f"config violation: {v}", file=sys.stderr)
        raise ValidationError(f"{len(violations)} configuration violation(s) in {source}")
    return config


def _eta_values(args):
    if args.eta_file:
        return read_config_file(args.eta_file)
    return None


def _eta_from(values):
    if values is None:
        return NoiseCouplings.zero()
    return eta_from_values(values)


def _matrix_cells(matrix) -> list[str]:
    return [_fmt(matrix[a, b]) for a, b in UPPER_TRIANGLE]


def _diag_cells(matrix) -> list[str]:
    d = duan_criterion_from(matrix)
    v = vlf_from(matrix)
    return [_fmt(d), _fmt(v[0]), _fmt(v[1]), _fmt(v[2])]


def duan_criterion_from(matrix):
    from .core import QuadratureCovariance

    return duan_criterion(QuadratureCovariance(matrix)).value


def vlf_from(matrix):
    from .core import QuadratureCovariance

    return vlf_tripartite(QuadratureCovariance(matrix))


def cmd_spectrum(args) -> int:
    values = read_config_file(args.config)
    config = _load_cavity_or_die(values, args.config)
    eta_values = _eta_values(args)
    eta = _eta_from(eta_values)
    threshold = threshold_power_from_values(values, args.config)
    omega = normalize_frequency(args.freq_hz, config)
    if args.sigma == 1.0:
        print(
            "warning: sigma = 1 is the oscillation threshold; beta = 0 and the "
            "infrared powers vanish",
            file=sys.stderr,
        )
    op = operating_point(config, args.sigma, threshold)
    drift = opo_drift(config, op)
    v_q = build_vq(eta, op.intracavity_powers)
    result = output_covariance(config, drift, v_q, omega, detection=True)
    header = ["component", "omega"] + upper_triangle_labels() + [
        "duan_value", "vlf_1", "vlf_2", "vlf_3",
    ]
    rows = []
    for name, matrix, diagnostics in (
        ("total", result.v_total.matrix, True),
        ("pure", result.v_pure.matrix, False),
        ("loss", result.v_loss.matrix, False),
        ("phase", result.v_phase.matrix, False),
        ("detected", result.detected.matrix, True),
    ):
        cells = [name, _fmt(omega)] + _matrix_cells(matrix)
        cells += _diag_cells(matrix) if diagnostics else ["", "", "", ""]
        rows.append(cells)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "spectrum.csv")
    _write_csv(out_csv, header, rows)
    digests = {args.config: _digest(args.config)}
    snapshots = {"config": values, "eta": eta_values}
    if args.eta_file:
        digests[args.eta_file] = _digest(args.eta_file)
    _write_manifest(
        args.out,
        "spectrum",
        "spectrum",
        {
            "config": args.config,
            "eta_file": args.eta_file,
            "sigma": args.sigma,
            "freq_hz": args.freq_hz,
        },
        snapshots,
        digests,
        ["spectrum.csv"],
    )
    print(f"wrote {out_csv}")
    return EXIT_OK


def _parse_axis(spec: str):
    parts = spec.split(":")
    if len(parts) != 4:
        raise ValidationError(f"axis spec must be name:start:stop:count, got {spec!r}")
    name = parts[0]
    try:
        start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise ValidationError(f"malformed axis spec {spec!r}") from None
    if count < 0:
        raise ValidationError("axis count must be nonnegative")
    return name, np.linspace(start, stop, count)


def cmd_sweep(args) -> int:
    values = read_config_file(args.config)
    config = _load_cavity_or_die(values, args.config)
    eta_values = _eta_values(args)
    eta = _eta_from(eta_values)
    threshold = threshold_power_from_values(values, args.config)
    axis, grid = _parse_axis(args.axis)
    omega = normalize_frequency(args.freq_hz, config) if args.freq_hz is not None else None
    temp_coefficients = None
    if axis == "temperature":
        temp_coefficients = temp_law_from_values(values, args.config)
    points = sweep(
        config,
        axis,
        grid,
        pump_ratio=args.sigma,
        omega=omega,
        eta=eta if args.eta_file else None,
        threshold_power=threshold,
        temp_coefficients=temp_coefficients,
    )
    header = [axis] + upper_triangle_labels() + ["duan_value", "vlf_1", "vlf_2", "vlf_3", "error"]
    rows = []
    for p in points:
        if p.error is None:
            rows.append(
                [_fmt(p.axis_value)]
                + _matrix_cells(p.result.v_total.matrix)
                + [_fmt(p.duan.value), _fmt(p.vlf[0]), _fmt(p.vlf[1]), _fmt(p.vlf[2]), ""]
            )
        else:
            rows.append([_fmt(p.axis_value)] + [""] * 25 + [p.error])
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "sweep.csv")
    _write_csv(out_csv, header, rows)
    digests = {args.config: _digest(args.config)}
    if args.eta_file:
        digests[args.eta_file] = _digest(args.eta_file)
    _write_manifest(
        args.out,
        "sweep",
        "sweep",
        {
            "config": args.config,
            "eta_file": args.eta_file,
            "axis": args.axis,
            "sigma": args.sigma,
            "freq_hz": args.freq_hz,
        },
        {"config": values, "eta": eta_values},
        digests,
        ["sweep.csv"],
    )
    failed = sum(1 for p in points if p.error is not None)
    print(f"wrote {out_csv} ({len(points)} rows, {failed} failed points)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    values = read_config_file(args.config)
    config = _load_cavity_or_die(values, args.config)
    eta_values = _eta_values(args)
    eta = _eta_from(eta_values)
    threshold = threshold_power_from_values(values, args.config)
    plan = plan_from_values(values, args.config)
    if args.seed is not None:
        from .oracle import SimulationPlan

        plan = SimulationPlan(
            plan.time_step, plan.n_steps, plan.n_trajectories, args.seed, plan.burn_in
        )
    omega = normalize_frequency(args.freq_hz, config)
    op = operating_point(config, args.sigma, threshold)
    if args.free_cavity:
        from .drift import free_cavity_drift

        drift = free_cavity_drift(config)
    else:
        drift = opo_drift(config, op)
    v_q = build_vq(eta, op.intracavity_powers)
    sources = NoiseSources(coupling_matrices(config), v_q)
    est = simulate_psd(drift, sources, plan, [omega], n_workers=args.workers)
    # comparison target may use different couplings (fault-injection checks)
    target_values = eta_values
    if args.target_eta_file:
        target_values = read_config_file(args.target_eta_file)
    target_eta = _eta_from(target_values)
    target_vq = build_vq(target_eta, op.intracavity_powers)
    analytic = output_covariance(config, drift, target_vq, omega).v_total.matrix
    mc = est.matrices[0]
    se = est.stderr[0]
    os.makedirs(args.out, exist_ok=True)
    labels = upper_triangle_labels()
    psd_header = (
        ["omega"]
        + labels
        + ["duan_value", "vlf_1", "vlf_2", "vlf_3"]
        + [f"{lab}_stderr" for lab in labels]
        + ["n_segments", "n_effective"]
    )
    psd_row = (
        [_fmt(omega)]
        + _matrix_cells(mc)
        + _diag_cells(mc)
        + [_fmt(se[a, b]) for a, b in UPPER_TRIANGLE]
        + [str(est.n_segments), _fmt(est.n_effective)]
    )
    psd_csv = os.path.join(args.out, "oracle_psd.csv")
    _write_csv(psd_csv, psd_header, [psd_row])
    compare_rows = []
    worst = 0.0
    failures = 0
    for a, b in UPPER_TRIANGLE:
        z = (mc[a, b] - analytic[a, b]) / se[a, b] if se[a, b] > 0.0 else 0.0
        ok = abs(z) <= args.tolerance
        failures += 0 if ok else 1
        worst = max(worst, abs(z))
        compare_rows.append(
            [
                f"V_{_label(a)}{_label(b)}",
                _fmt(mc[a, b]),
                _fmt(analytic[a, b]),
                _fmt(se[a, b]),
                _fmt(z),
                "pass" if ok else "FAIL",
            ]
        )
    compare_csv = os.path.join(args.out, "oracle_compare.csv")
    _write_csv(
        compare_csv,
        ["entry", "monte_carlo", "analytic", "stderr", "zscore", "status"],
        compare_rows,
    )
    digests = {args.config: _digest(args.config)}
    for path in (args.eta_file, args.target_eta_file):
        if path:
            digests[path] = _digest(path)
    _write_manifest(
        args.out,
        "oracle",
        "oracle",
        {
            "config": args.config,
            "eta_file": args.eta_file,
            "target_eta_file": args.target_eta_file,
            "sigma": args.sigma,
            "freq_hz": args.freq_hz,
            "tolerance": args.tolerance,
            "workers": args.workers,
            "free_cavity": args.free_cavity,
        },
        {"config": values, "eta": eta_values, "target_eta": target_values},
        digests,
        ["oracle_psd.csv", "oracle_compare.csv"],
        seed=plan.master_seed,
    )
    print(
        f"oracle: {est.n_segments} segments ({est.n_effective:.0f} effective), "
        f"max |z| = {worst:.2f}, {failures} of {len(compare_rows)} entries failed "
        f"at tolerance {args.tolerance}"
    )
    return EXIT_OK if failures == 0 else EXIT_COMPARISON


def _label(i: int) -> str:
    from .core import QUADRATURES

    return QUADRATURES[i]


def _read_data_csv(path: str, required: list[str], optional: list[str] = ()):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty data file")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise ValidationError(f"{path}: missing required columns {missing}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            parsed = {}
            for c in required:
                try:
                    parsed[c] = row[c] if c == "power_ref" else float(row[c])
                except (TypeError, ValueError):
                    raise ValidationError(
                        f"{path}:{lineno}: column {c!r} is not a number: {row[c]!r}"
                    ) from None
            for c in optional:
                raw = row.get(c)
                parsed[c] = float(raw) if raw not in (None, "") else None
            rows.append(parsed)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return rows


def _write_fit_outputs(args, name, fit, extra_inputs=()):
    os.makedirs(args.out, exist_ok=True)
    rows = [
        [param, _fmt(value), _fmt(fit.uncertainties.get(param, float("nan")))]
        for param, value in fit.parameters.items()
    ]
    rows.append(["rss", _fmt(fit.rss), ""])
    rows.append(["dof", str(fit.dof), ""])
    if fit.flags:
        rows.append(["flags", ";".join(fit.flags), ""])
    out_csv = os.path.join(args.out, f"fit_{name}.csv")
    _write_csv(out_csv, ["parameter", "value", "uncertainty"], rows)
    digests = {args.data: _digest(args.data)}
    snapshots = {}
    if getattr(args, "config", None):
        digests[args.config] = _digest(args.config)
        snapshots["config"] = read_config_file(args.config)
    for path in extra_inputs:
        digests[path] = _digest(path)
    arguments = {"data": args.data}
    if getattr(args, "config", None):
        arguments["config"] = args.config
    for k in ("mode", "modes", "freq_hz", "power_ref"):
        if hasattr(args, k) and getattr(args, k) is not None:
            arguments[k] = getattr(args, k)
    _write_manifest(
        args.out,
        f"fit_{name}",
        f"fit {args.fit_command}",
        arguments,
        snapshots,
        digests,
        [f"fit_{name}.csv"],
    )
    for param, value in fit.parameters.items():
        err = fit.uncertainties.get(param)
        err_text = f" +- {err:g}" if err is not None and np.isfinite(err) else ""
        print(f"{param} = {value:g}{err_text}")
    print(f"wrote {out_csv}")
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.fit_command == "eta-diag":
        values = read_config_file(args.config)
        config = _load_cavity_or_die(values, args.config)
        omega = normalize_frequency(args.freq_hz, config)
        rows = _read_data_csv(
            args.data, ["power_w", "power_ref", "var_p", "var_q"], ["sigma_var"]
        )
        records = [
            PowerVarianceRecord(
                r["power_w"], r["power_ref"], r["var_p"], r["var_q"], r["sigma_var"]
            )
            for r in rows
        ]
        fit = fit_eta_diagonal(records, config, args.mode, omega)
        return _write_fit_outputs(args, "eta_diag", fit)
    if args.fit_command == "eta-cross":
        values = read_config_file(args.config)
        config = _load_cavity_or_die(values, args.config)
        omega = normalize_frequency(args.freq_hz, config)
        rows = _read_data_csv(args.data, ["power_j_w", "power_k_w", "cov_q"], ["sigma"])
        records = [
            CrossCovarianceRecord(r["power_j_w"], r["power_k_w"], r["cov_q"], r["sigma"])
            for r in rows
        ]
        j, k = (int(s) for s in args.modes.split(","))
        refs = tuple(args.power_ref.split(",")) if args.power_ref else ("intracavity",) * 2
        fit = fit_eta_cross(records, config, (j, k), omega, power_reference=refs)
        return _write_fit_outputs(args, "eta_cross", fit)
    if args.fit_command == "waist":
        values = read_config_file(args.config)
        config = _load_cavity_or_die(values, args.config)
        rows = _read_data_csv(args.data, ["z_m", "eta_00"])
        fit = fit_waist_profile([(r["z_m"], r["eta_00"]) for r in rows], config)
        return _write_fit_outputs(args, "waist", fit)
    if args.fit_command == "temp":
        rows = _read_data_csv(args.data, ["temp_k", "eta_00"], ["sigma"])
        sigma = None
        if all(r["sigma"] is not None for r in rows):
            sigma = [r["sigma"] for r in rows]
        fit = fit_temperature([(r["temp_k"], r["eta_00"]) for r in rows], sigma=sigma)
        return _write_fit_outputs(args, "temp", fit)
    raise ValidationError(f"unknown fit subcommand {args.fit_command!r}")


def cmd_replay(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    base = os.path.dirname(os.path.abspath(args.manifest))
    for path, digest in manifest["input_digests"].items():
        if not os.path.exists(path):
            raise ValidationError(f"replay input {path} is missing")
        if _digest(path) != digest:
            raise ValidationError(
                f"replay input {path} changed since the original run (digest mismatch)"
            )
    with tempfile.TemporaryDirectory(prefix="replay_", dir=base) as tmp:
        argv = _reconstruct_argv(manifest, tmp)
        code = main(argv)
        if code != EXIT_OK:
            print(f"replay run exited with code {code}", file=sys.stderr)
            return code
        mismatches = []
        for name in manifest["outputs"]:
            original = os.path.join(base, name)
            fresh = os.path.join(tmp, name)
            if not os.path.exists(original):
                mismatches.append(f"{name}: original output missing")
                continue
            with open(original, "rb") as a, open(fresh, "rb") as b:
                if a.read() != b.read():
                    mismatches.append(f"{name}: byte mismatch")
    if mismatches:
        for m in mismatches:
            print(f"replay mismatch: {m}", file=sys.stderr)
        return EXIT_COMPARISON
    print(f"replay of {manifest['command']!r} reproduced {len(manifest['outputs'])} output(s)")
    return EXIT_OK


def _reconstruct_argv(manifest, out_dir):
    """Rebuild the command line recorded in a manifest, redirected to out_dir.

    ``arguments`` holds every flag of the original invocation keyed by its
    argparse destination, so the mapping back to flags is mechanical.
    """
    argv = manifest["command"].split() + ["--out", out_dir]
    for key, value in manifest["arguments"].items():
        if value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        argv += [flag] if value is True else [flag, str(value)]
    if manifest.get("master_seed") is not None:
        argv += ["--seed", str(manifest["master_seed"])]
    return argv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oponoise",
        description="Quantum noise covariance of a triply resonant OPO with phonon phase noise",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="key-value configuration file")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("spectrum", help="single-frequency covariance with components")
    common(p)
    p.add_argument("--sigma", type=float, required=True, help="pump ratio P_in/P_th")
    p.add_argument("--freq-hz", type=float, required=True, help="analysis frequency in Hz")
    p.add_argument("--eta-file", help="eta coupling file (omitted: no phonon noise)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="covariance table along one axis")
    common(p)
    p.add_argument("--axis", required=True, help="name:start:stop:count "
                   "(pump_ratio | frequency | temperature | crystal_z)")
    p.add_argument("--sigma", type=float, help="pump ratio (fixed axes)")
    p.add_argument("--freq-hz", type=float, help="analysis frequency in Hz (fixed axes)")
    p.add_argument("--eta-file", help="eta coupling file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="Monte-Carlo estimate and analytic comparison")
    common(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--freq-hz", type=float, required=True)
    p.add_argument("--eta-file", help="eta couplings used in the simulation")
    p.add_argument("--target-eta-file", help="eta couplings for the analytic target "
                   "(defaults to --eta-file)")
    p.add_argument("--seed", type=int, help="override oracle.seed from the config")
    p.add_argument("--tolerance", type=float, default=3.0, help="z-score pass threshold")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--free-cavity", action="store_true",
                   help="passive-cavity drift instead of the oscillator")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fit", help="parameter recovery from data files")
    fit_sub = p.add_subparsers(dest="fit_command", required=True)
    q = fit_sub.add_parser("eta-diag", help="diagonal coupling from variance vs power")
    common(q)
    q.add_argument("--data", required=True, help="CSV: power_w, power_ref, var_p, var_q[, sigma_var]")
    q.add_argument("--mode", type=int, required=True, choices=(0, 1, 2))
    q.add_argument("--freq-hz", type=float, required=True)
    q.set_defaults(func=cmd_fit)
    q = fit_sub.add_parser("eta-cross", help="cross coupling from covariance vs powers")
    common(q)
    q.add_argument("--data", required=True, help="CSV: power_j_w, power_k_w, cov_q[, sigma]")
    q.add_argument("--modes", required=True, help="mode pair, e.g. 1,2")
    q.add_argument("--freq-hz", type=float, required=True)
    q.add_argument("--power-ref", help="per-mode power references, e.g. intracavity,intracavity")
    q.set_defaults(func=cmd_fit)
    q = fit_sub.add_parser("waist", help="geometry profile factor from eta00 vs crystal position")
    common(q)
    q.add_argument("--data", required=True, help="CSV: z_m, eta_00")
    q.set_defaults(func=cmd_fit)
    q = fit_sub.add_parser("temp", help="linear temperature law from eta00 vs temperature")
    common(q, config=False)
    q.add_argument("--data", required=True, help="CSV: temp_k, eta_00[, sigma]")
    q.set_defaults(func=cmd_fit)

    p = sub.add_parser("replay", help="re-run a manifest and verify byte-identical outputs")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
