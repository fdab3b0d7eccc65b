"""Command-line entry point.

Subcommands: spectrum, trajectory, ensemble, sweep, collapse, oracle-check.
Run parameters come from a key=value config file, with command-line flags
taking precedence.  Every run echoes its effective configuration into the
output directory, and all outputs are byte-stable across reruns.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 oracle
mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import ed, ensemble as ens, fileio, lattice, trajectory as traj

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_ORACLE = 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- parsing


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {s!r}") from exc


def _parse_int(s: str) -> int:
    try:
        return int(s)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {s!r}") from exc


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_theta(s: str) -> float:
    """Accept raw radians or multiples of pi ('pi', '0.5pi')."""
    low = s.strip().lower()
    if low.endswith("pi"):
        head = low[:-2].strip()
        factor = 1.0 if head in ("", "+") else _parse_float(head)
        return factor * math.pi
    return _parse_float(s)


def _parse_bc(s: str) -> str:
    low = s.strip().lower()
    if low in (lattice.OBC, lattice.PBC):
        return low
    raise ConfigError(f"bc must be 'obc' or 'pbc', got {s!r}")


def _parse_pattern(s: str):
    low = s.strip().lower()
    if low in ("domainwall", "neel"):
        return low
    if low and set(low) <= {"0", "1"}:
        return low
    raise ConfigError(
        f"initial_pattern must be 'domainwall', 'neel' or a 0/1 string, got {s!r}"
    )


def _parse_format(s: str) -> str:
    low = s.strip().lower()
    if low in ("csv", "json"):
        return low
    raise ConfigError(f"format must be 'csv' or 'json', got {s!r}")


def _list_of(item_parser):
    def parse(s: str):
        return [item_parser(tok) for tok in s.split(",") if tok.strip() != ""]

    return parse


_LATTICE_KEYS = {
    "L": _parse_int,
    "p": _parse_float,
    "t": _parse_float,
    "gamma": _parse_float,
    "theta": _parse_theta,
    "bc": _parse_bc,
}

_TRAJECTORY_KEYS = {
    **_LATTICE_KEYS,
    "dt": _parse_float,
    "t_max": _parse_float,
    "initial_pattern": _parse_pattern,
    "seed": _parse_int,
    "trajectory_index": _parse_int,
    "record_every": _parse_int,
    "record_density": _parse_bool,
    "format": _parse_format,
}

_ENSEMBLE_KEYS = {
    **_TRAJECTORY_KEYS,
    "n_traj": _parse_int,
    "steady_window_fraction": _parse_float,
    "workers": _parse_int,
}

_SPECTRUM_KEYS = {
    "L": _list_of(_parse_int),
    "p": _parse_float,
    "t": _parse_float,
    "gamma": _parse_float,
    "bc": _list_of(_parse_bc),
    "with_dissipation": _parse_bool,
    "format": _parse_format,
}

_SWEEP_KEYS = {
    **{k: v for k, v in _ENSEMBLE_KEYS.items() if k not in ("L", "gamma", "p", "dt", "theta", "bc")},
    "L": _list_of(_parse_int),
    "gamma": _list_of(_parse_float),
    "p": _list_of(_parse_float),
    "dt": _list_of(_parse_float),
    "theta": _list_of(_parse_theta),
    "bc": _list_of(_parse_bc),
}

_COLLAPSE_KEYS = {
    "points": str,
    "format": _parse_format,
}

_ORACLE_KEYS = {
    **_TRAJECTORY_KEYS,
    "tol": _parse_float,
}


def parse_config(text: str, allowed: dict, overrides: dict) -> dict:
    """Merge key=value config text with flag overrides, strictly validated."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        try:
            values[key] = allowed[key](value.strip())
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: key '{key}': {exc}") from exc
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}'")
        values[key] = allowed[key](value) if isinstance(value, str) else value
    return values


def _resolve_pattern(name, L: int):
    if name is None or name == "domainwall":
        return traj.domain_wall_pattern(L)
    if name == "neel":
        return traj.neel_pattern(L)
    bits = tuple(int(c) for c in name)
    if len(bits) != L:
        raise ConfigError(
            f"initial_pattern has {len(bits)} sites but L={L}"
        )
    return bits


def _lattice_params(values: dict) -> lattice.LatticeParams:
    try:
        return lattice.LatticeParams(
            L=values.get("L", 64),
            p=values.get("p", 2.0),
            t=values.get("t", 1.0),
            gamma=values.get("gamma", 0.0),
            theta=values.get("theta", math.pi),
            bc=values.get("bc", lattice.OBC),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _trajectory_config(values: dict) -> traj.TrajectoryConfig:
    params = _lattice_params(values)
    try:
        return traj.TrajectoryConfig(
            lattice=params,
            dt=values.get("dt", 0.01),
            t_max=values.get("t_max", 10.0),
            initial_pattern=_resolve_pattern(values.get("initial_pattern"), params.L),
            seed=values.get("seed", 0),
            trajectory_index=values.get("trajectory_index", 0),
            record_every=values.get("record_every", 10),
            record_density=values.get("record_density", False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _echo_values(config: traj.TrajectoryConfig, extra: dict = None) -> dict:
    p = config.lattice
    values = {
        "L": p.L,
        "p": p.p,
        "t": p.t,
        "gamma": p.gamma,
        "theta": p.theta,
        "bc": p.bc,
        "dt": config.dt,
        "t_max": config.t_max,
        "initial_pattern": "".join(str(b) for b in config.initial_pattern),
        "seed": config.seed,
        "trajectory_index": config.trajectory_index,
        "record_every": config.record_every,
        "record_density": config.record_density,
    }
    if extra:
        values.update(extra)
    return values


# ---------------------------------------------------------------- commands


def _load_text(path) -> str:
    if path is None:
        return ""
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def _overrides(args, keys) -> dict:
    return {k: getattr(args, k.replace("-", "_"), None) for k in keys}


def cmd_spectrum(args) -> int:
    values = parse_config(_load_text(args.config), _SPECTRUM_KEYS, _overrides(args, _SPECTRUM_KEYS))
    Ls = values.get("L", [64])
    bcs = values.get("bc", [lattice.OBC, lattice.PBC])
    p = values.get("p", 2.0)
    t = values.get("t", 1.0)
    gamma = values.get("gamma", 0.0)
    with_dissipation = values.get("with_dissipation", False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for L in Ls:
        for bc in bcs:
            params = _wrap_validation(
                lambda: lattice.LatticeParams(L=L, p=p, t=t, gamma=gamma, bc=bc)
            )
            h = lattice.build_h_eff(params, drop_overall_dissipation=not with_dissipation)
            for ev in lattice.spectrum(h):
                rows.append([ev.real, ev.imag, bc, L, p, gamma])
    fileio.write_table(out / "spectrum", ["re", "im", "bc", "L", "p", "gamma"], rows,
                       values.get("format", "csv"))
    fileio.write_config_echo(out / "config.echo", {
        "L": ",".join(str(x) for x in Ls),
        "bc": ",".join(bcs),
        "p": p, "t": t, "gamma": gamma,
        "with_dissipation": with_dissipation,
        "format": values.get("format", "csv"),
    })
    return EXIT_OK


def _wrap_validation(fn):
    try:
        return fn()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_trajectory_outputs(out: Path, record: traj.TrajectoryRecord, output_format: str) -> None:
    header = ["time", "S_ent", "S_cl", "delta_n", "J"]
    rows = [
        [s.time, s.S_ent, s.S_cl, s.delta_n, s.current_J] for s in record.snapshots
    ]
    fileio.write_table(out / "observables", header, rows, output_format)
    if record.density_history is not None:
        L = record.config.lattice.L
        dens_header = ["time"] + [f"n_{i}" for i in range(L)]
        dens_rows = [
            [s.time] + list(row)
            for s, row in zip(record.snapshots, record.density_history)
        ]
        fileio.write_table(out / "density", dens_header, dens_rows, output_format)
    fileio.write_json(out / "run.json", {
        "config": {k: fileio.fmt(v) for k, v in _echo_values(record.config).items()},
        "jump_log": [[int(s), int(b)] for s, b in record.jump_log],
        "n_jumps": len(record.jump_log),
    })


def cmd_trajectory(args) -> int:
    values = parse_config(_load_text(args.config), _TRAJECTORY_KEYS, _overrides(args, _TRAJECTORY_KEYS))
    values.setdefault("record_density", True)
    config = _trajectory_config(values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = traj.run_trajectory(config)
    _write_trajectory_outputs(out, record, values.get("format", "csv"))
    fileio.write_config_echo(out / "config.echo", _echo_values(config))
    return EXIT_OK


def _ensemble_config(values: dict) -> ens.EnsembleConfig:
    base = _trajectory_config(values)
    try:
        return ens.EnsembleConfig(
            base=base,
            n_traj=values.get("n_traj", 10),
            steady_window_fraction=values.get("steady_window_fraction", 0.25),
            n_workers=values.get("workers"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_ensemble_outputs(out: Path, record: ens.EnsembleRecord, output_format: str) -> None:
    names = [("S_ent", "S_ent"), ("S_cl", "S_cl"), ("delta_n", "delta_n"), ("current_J", "J")]
    header = ["time"]
    for key, label in names:
        header += [f"{label}_mean", f"{label}_err"]
    rows = []
    for i, t in enumerate(record.times):
        row = [t]
        for key, _ in names:
            row += [record.mean[key][i], record.stderr[key][i]]
        rows.append(row)
    fileio.write_table(out / "timeseries", header, rows, output_format)

    L = record.density_mean.shape[1]
    fileio.write_table(
        out / "density_mean",
        ["time"] + [f"n_{i}" for i in range(L)],
        [[t] + list(r) for t, r in zip(record.times, record.density_mean)],
        output_format,
    )
    fileio.write_table(
        out / "density_profile",
        ["site", "n_mean", "n_err"],
        [
            [i, record.steady.density_profile[i], record.steady.density_profile_err[i]]
            for i in range(L)
        ],
        output_format,
    )
    fileio.write_json(out / "summary.json", {
        "steady_mean": {k: record.steady.mean[k] for k, _ in names},
        "steady_err": {k: record.steady.stderr[k] for k, _ in names},
        "window_snapshots": record.steady.window_snapshots,
        "n_traj": record.config.n_traj,
    })


def cmd_ensemble(args) -> int:
    values = parse_config(_load_text(args.config), _ENSEMBLE_KEYS, _overrides(args, _ENSEMBLE_KEYS))
    config = _ensemble_config(values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = ens.run_ensemble(config)
    _write_ensemble_outputs(out, record, values.get("format", "csv"))
    fileio.write_config_echo(out / "config.echo", _echo_values(config.base, {
        "n_traj": config.n_traj,
        "steady_window_fraction": config.steady_window_fraction,
    }))
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = parse_config(_load_text(args.config), _SWEEP_KEYS, _overrides(args, _SWEEP_KEYS))
    grids = {
        "L": values.get("L", [64]),
        "p": values.get("p", [2.0]),
        "gamma": values.get("gamma", [0.5]),
        "dt": values.get("dt", [0.01]),
        "theta": values.get("theta", [math.pi]),
        "bc": values.get("bc", [lattice.OBC]),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    points = []
    for L in grids["L"]:
        for p in grids["p"]:
            for gamma in grids["gamma"]:
                for dt in grids["dt"]:
                    for theta in grids["theta"]:
                        for bc in grids["bc"]:
                            points.append(dict(L=L, p=p, gamma=gamma, dt=dt, theta=theta, bc=bc))

    manifest_rows = []
    point_rows = []
    scalar_keys = [("S_ent", "sent"), ("S_cl", "scl"), ("delta_n", "dn"), ("current_J", "j")]
    for idx, pt in enumerate(points):
        subdir = out / f"point_{idx:04d}"
        summary_path = subdir / "summary.json"
        status = "ok"
        try:
            if summary_path.exists():
                status = "cached"
                summary = json.loads(summary_path.read_text())
            else:
                point_values = dict(values)
                point_values.update(pt)
                config = _ensemble_config(point_values)
                subdir.mkdir(parents=True, exist_ok=True)
                record = ens.run_ensemble(config)
                _write_ensemble_outputs(subdir, record, values.get("format", "csv"))
                fileio.write_config_echo(subdir / "config.echo", _echo_values(config.base, {
                    "n_traj": config.n_traj,
                    "steady_window_fraction": config.steady_window_fraction,
                }))
                summary = {
                    "steady_mean": record.steady.mean,
                    "steady_err": record.steady.stderr,
                }
            row = [idx, pt["L"], pt["p"], pt["gamma"], pt["theta"], pt["bc"], pt["dt"]]
            for key, label in scalar_keys:
                row += [summary["steady_mean"][key], summary["steady_err"][key]]
            point_rows.append(row)
        except Exception as exc:  # per-point failure: record it, keep sweeping
            status = f"failed: {exc}".replace(",", ";")  # keep the CSV intact
        manifest_rows.append(
            [idx, pt["L"], pt["p"], pt["gamma"], pt["theta"], pt["bc"], pt["dt"], status, subdir.name]
        )

    fileio.write_csv(
        out / "manifest.csv",
        ["point", "L", "p", "gamma", "theta", "bc", "dt", "status", "dir"],
        manifest_rows,
    )
    header = ["point", "L", "p", "gamma", "theta", "bc", "dt"]
    for _, label in scalar_keys:
        header += [f"{label}_mean", f"{label}_err"]
    fileio.write_csv(out / "points.csv", header, point_rows)
    fileio.write_config_echo(out / "config.echo", {
        k: ",".join(fileio.fmt(v) for v in grid) for k, grid in grids.items()
    } | {"n_traj": values.get("n_traj", 10), "t_max": values.get("t_max", 10.0)})
    if any(str(r[7]).startswith("failed") for r in manifest_rows):
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_collapse(args) -> int:
    values = parse_config(_load_text(args.config), _COLLAPSE_KEYS, _overrides(args, _COLLAPSE_KEYS))
    points_path = values.get("points")
    if points_path is None:
        raise ConfigError("collapse requires 'points' (CSV with L,gamma,scl_mean,scl_err)")
    try:
        data = np.genfromtxt(points_path, delimiter=",", names=True)
    except OSError as exc:
        raise ConfigError(f"cannot read points file {points_path}: {exc}") from exc
    data = np.atleast_1d(data)
    for col in ("L", "gamma", "scl_mean"):
        if col not in (data.dtype.names or ()):
            raise ConfigError(f"points file is missing column '{col}'")
    errs = data["scl_err"] if "scl_err" in data.dtype.names else np.zeros(len(data))
    points = [
        ens.CollapsePoint(int(L), float(g), float(s), float(e))
        for L, g, s, e in zip(data["L"], data["gamma"], data["scl_mean"], errs)
    ]
    result = _wrap_validation(lambda: ens.collapse_scan(points))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_table(
        out / "collapse",
        ["gammaL", "Scl_over_L", "err"],
        [list(r) for r in result.table],
        values.get("format", "csv"),
    )
    fileio.write_json(out / "fit.json", {
        "c": result.fit_c,
        "slope": result.slope,
        "slope_err": result.slope_err,
        "n_tail": result.n_tail,
    })
    fileio.write_config_echo(out / "config.echo", {"points": str(points_path)})
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    values = parse_config(_load_text(args.config), _ORACLE_KEYS, _overrides(args, _ORACLE_KEYS))
    values.setdefault("L", 8)
    values.setdefault("t_max", 2.0)
    config = _trajectory_config(values)
    tol = values.get("tol", 1e-8)
    try:
        dev = ed.compare_with_oracle(config)
    except ed.SectorTooLargeError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(out / "oracle.json", dev | {"tol": tol})
    fileio.write_config_echo(out / "config.echo", _echo_values(config, {"tol": tol}))
    worst = 0.0
    for key in ("G", "S_ent", "S_cl", "delta_n", "current_J"):
        print(f"{key}: max deviation {dev[key]:.3e}")
        worst = max(worst, dev[key])
    print(f"snapshots: {dev['n_snapshots']}, jumps replayed: {dev['n_jumps']}")
    if worst > tol:
        print(f"FAIL: deviation {worst:.3e} exceeds tolerance {tol:.3e}", file=sys.stderr)
        return EXIT_ORACLE
    print(f"OK: all deviations within {tol:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------- wiring


def _add_common(sub, keys) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--out", required=True, help="output directory")
    for key in keys:
        sub.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skinchain",
        description="Monitored long-range free-fermion chain: trajectories, "
        "ensembles, spectra, scaling analysis.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, keys, fn in (
        ("spectrum", _SPECTRUM_KEYS, cmd_spectrum),
        ("trajectory", _TRAJECTORY_KEYS, cmd_trajectory),
        ("ensemble", _ENSEMBLE_KEYS, cmd_ensemble),
        ("sweep", _SWEEP_KEYS, cmd_sweep),
        ("collapse", _COLLAPSE_KEYS, cmd_collapse),
        ("oracle-check", _ORACLE_KEYS, cmd_oracle_check),
    ):
        sub = subs.add_parser(name)
        _add_common(sub, keys)
        sub.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
