r"""Command-line surface: every computation and check as a scriptable run.

Subcommands: amplitude, check, evolve, series, volterra, probe-appendix-d.
Tabular output is CSV with one header row; reports are JSON documents that
embed the fully resolved configuration and the package version, so a run
can be reproduced from its report alone. Identical configuration gives
byte-identical output; wall-clock timing is only recorded under --timing.

Exit codes: 0 success / all residuals pass; 1 a check ran and failed;
2 invalid parameters or configuration.

A flat ``key = value`` config file (--config) supplies defaults for any
long flag (names with '-' written as '-' or '_'); explicit flags win.
"""
from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import time
import warnings

import numpy as np

from . import __version__
from .model import ModelParams, Regime
from .amplitude import (BoundaryData, PoleError, ReducedAmplitude,
                        b1_coefficient, lambda_from_boundary)
from .timedomain import TimeKernel, TruncationWarning, f_tau, ttilde_series
from .volterra import TimeGrid, default_grading, volterra_march
from .evolution import (GridSupportError, apply_evolution, appendix_d_probe,
                        make_gaussian_packet)
from .checks import run_check

__all__ = ["main"]


class ConfigError(ValueError):
    pass


def _parse_real(text):
    # accepts "0.1" and complex spellings like "0.1+0.2i"; the complex form
    # is validated downstream (imaginary parts are rejected with diagnostics)
    s = str(text).strip().replace("i", "j")
    try:
        val = complex(s)
    except ValueError:
        raise ConfigError(f"cannot parse number {text!r}") from None
    return val if val.imag != 0.0 else val.real


def _parse_z(text):
    parts = str(text).split(",")
    if len(parts) != 2:
        raise ConfigError(f"z must be 're,im', got {text!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise ConfigError(f"z must be 're,im', got {text!r}") from None


def _parse_floats(text):
    try:
        return [float(p) for p in str(text).split(",") if p.strip() != ""]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def _load_config(path):
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, val = line.split("=", 1)
                cfg[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return cfg


def _resolve(args, cfg, name, conv=None, default=None):
    """Flag value if given, else config-file value, else default.

    conv is applied to string values from either source; typed argparse
    values pass through untouched.
    """
    val = getattr(args, name, None)
    if val is None:
        val = cfg.get(name)
    if val is None:
        return default
    if conv is not None and isinstance(val, str):
        try:
            val = conv(val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}: {exc}") from None
    return val


def _build_model(args, cfg):
    alpha = _resolve(args, cfg, "alpha", float)
    if alpha is None:
        raise ConfigError("missing required parameter: alpha")
    c1 = _resolve(args, cfg, "c1", float, 1.0)
    mu = _resolve(args, cfg, "mu", float, 0.5)
    try:
        return ModelParams(alpha, c1, mu)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_boundary(params, args, cfg):
    a = _resolve(args, cfg, "a", float)
    g_a = _resolve(args, cfg, "ga", float)
    b2 = _resolve(args, cfg, "b2", _parse_real)
    try:
        if params.regime() == Regime.LOCAL:
            if a is None or g_a is None:
                raise ConfigError(
                    "local regime (alpha > 1/2) needs reference boundary data: --a and --ga")
            return BoundaryData.reference(a, g_a)
        if b2 is None:
            raise ConfigError(
                "nonlocal regime (alpha < 1/2) needs asymptotic boundary data: --b2")
        return BoundaryData.asymptotic(b2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _resolved_model_config(params, boundary):
    out = {"alpha": params.alpha, "c1": params.c1, "mu": params.mu,
           "regime": params.regime()}
    if boundary is not None:
        if boundary.kind == BoundaryData.LOCAL:
            out["a"] = boundary.a
            out["ga"] = boundary.g_a
        else:
            out["b2"] = boundary.b2
    return out


def _write_csv(path, header, rows):
    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)

    if path is None:
        return
    if path == "-":
        emit(sys.stdout)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def _write_json(path, doc):
    if path is None:
        return
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _rows_to_csv(rows):
    """Dict rows -> (header, value lists); keys from the first row, in order."""
    if not rows:
        return [], []
    header = list(rows[0].keys())
    return header, [[_fmt(r.get(h, "")) for h in header] for r in rows]


def _add_common(p, csv_default, json_default):
    p.add_argument("--config", help="flat key = value file supplying flag defaults")
    p.add_argument("--alpha", type=float, help="form-factor exponent, in (0, 3/2), != 1/2")
    p.add_argument("--c1", type=float, help="coupling scale (default 1)")
    p.add_argument("--mu", type=float, help="reduced mass (default 0.5)")
    p.add_argument("--a", type=float, help="reference energy (local regime)")
    p.add_argument("--ga", type=float, help="amplitude value at the reference energy")
    p.add_argument("--b2", type=str, help="asymptotic coefficient (nonlocal regime), real")
    p.add_argument("--csv", default=csv_default, metavar="PATH",
                   help="CSV output path ('-' for stdout)")
    p.add_argument("--json", default=json_default, metavar="PATH",
                   help="JSON report path ('-' for stdout)")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock runtime in the JSON report")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nltdyn",
        description="reduced amplitudes, time-domain kernels, and unitary "
                    "evolution for the separable nonlocal-in-time model")
    parser.add_argument("--version", action="version", version=f"nltdyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("amplitude", help="tabulate t(z) over a z list")
    _add_common(p, csv_default="-", json_default=None)
    p.add_argument("--z", action="append", metavar="RE,IM",
                   help="evaluation point, repeatable (default: a negative-axis scan)")

    p = sub.add_parser("check", help="run a named verification suite")
    p.add_argument("which", choices=["unitarity", "composition", "a-independence",
                                     "bridge", "riccati", "born", "volterra",
                                     "appendix-d", "continuity"])
    _add_common(p, csv_default=None, json_default="-")
    p.add_argument("--pairs", type=int, help="sample pairs (unitarity)")
    p.add_argument("--seed", type=int, help="RNG seed (unitarity)")
    p.add_argument("--tol", type=float, help="override the check's main tolerance")
    p.add_argument("--times", type=str, metavar="T2,T1,T0",
                   help="chain times (composition)")
    p.add_argument("--t", type=str, metavar="LIST", help="probe times (appendix-d, continuity)")
    p.add_argument("--nu", type=str, metavar="LIST", help="state-family scales (appendix-d)")
    p.add_argument("--gamma0", type=float, help="resonance width parameter (appendix-d)")
    p.add_argument("--nodes", type=int, help="grid size M (volterra)")

    p = sub.add_parser("evolve", help="apply the evolution map to a Gaussian packet")
    _add_common(p, csv_default="-", json_default=None)
    p.add_argument("--k0", type=float, help="packet center (default 1)")
    p.add_argument("--sigma", type=float, help="packet width (default 0.2)")
    p.add_argument("--kmin", type=float, help="grid start (default 1e-3)")
    p.add_argument("--kmax", type=float, help="grid end (default 4)")
    p.add_argument("--nk", type=int, help="grid size (default 700)")
    p.add_argument("--t", type=str, metavar="LIST", help="output times (default 0.5,1,2)")
    p.add_argument("--t0", type=float, help="initial time (default 0)")
    p.add_argument("--picture", choices=["interaction", "schroedinger"],
                   help="evolution picture (default interaction)")

    p = sub.add_parser("series", help="tabulate the transition-kernel series")
    _add_common(p, csv_default="-", json_default=None)
    p.add_argument("--tau", type=str, metavar="MIN,MAX,N",
                   help="log-spaced tau grid (default 0.05,0.5,25)")
    p.add_argument("--terms", type=int, help="series order (default 20)")

    p = sub.add_parser("volterra", help="march the time-domain equation")
    _add_common(p, csv_default="-", json_default=None)
    p.add_argument("--tau-max", dest="tau_max", type=float, help="grid end (default 0.5)")
    p.add_argument("--nodes", type=int, help="grid size M (default 400)")
    p.add_argument("--gamma", type=float, help="grading exponent (default from alpha)")
    p.add_argument("--seed-frac", dest="seed_frac", type=float,
                   help="seeded fraction of tau_max (default 0.01)")

    p = sub.add_parser("probe-appendix-d", help="scan the resonance-family matrix elements")
    _add_common(p, csv_default="-", json_default=None)
    p.add_argument("--nu", type=str, metavar="LIST", help="family scales (default 10,30,100)")
    p.add_argument("--gamma0", type=float, help="width parameter (default 0.5)")
    p.add_argument("--t", type=str, metavar="LIST", help="probe times (default 0.01,0.03,0.1)")

    return parser


def _cmd_amplitude(args, cfg):
    params = _build_model(args, cfg)
    boundary = _build_boundary(params, args, cfg)
    amp = ReducedAmplitude(params, boundary)
    z_raw = args.z if args.z else cfg.get("z", "").split(";") if cfg.get("z") else None
    if z_raw:
        zs = [_parse_z(item) for item in z_raw]
    else:
        zs = [complex(-x, 0.0) for x in np.logspace(-1.0, 2.0, 13)]
    rows = []
    for z in zs:
        try:
            t = amp.t(z)
        except (ValueError, PoleError) as exc:
            raise ConfigError(f"cannot evaluate t at z = {z}: {exc}") from None
        rows.append([_fmt(z.real), _fmt(z.imag), _fmt(t.real), _fmt(t.imag)])
    _write_csv(args.csv, ["re_z", "im_z", "re_t", "im_t"], rows)
    summary = {"version": __version__, "config": _resolved_model_config(params, boundary)}
    if boundary.kind == BoundaryData.LOCAL:
        summary["lambda"] = lambda_from_boundary(amp)
    else:
        summary["b1"] = b1_coefficient(params) if params.c1 != 0.0 else None
        summary["b2"] = boundary.b2
    _write_json(args.json, summary)
    return 0


# flag -> (check kwarg, converter for config-file strings)
_CHECK_FLAGS = {
    "unitarity": {"pairs": ("n_pairs", int), "seed": ("seed", int), "tol": ("tol", float)},
    "riccati": {"tol": ("tol_nonlocal", float)},
    "a-independence": {"b2": ("b2_strict", None), "tol": ("tol", float)},
    "born": {"tol": ("tol_equiv", float)},
    "bridge": {"b2": ("b2", None), "tol": ("tol", float)},
    "volterra": {"tol": ("tol_series", float), "nodes": ("m_nodes", int)},
    "composition": {"times": ("times_chain", _parse_floats), "tol": ("tol_comp", float)},
    "appendix-d": {"b2": ("b2", None), "nu": ("nu_list", _parse_floats),
                   "t": ("t_list", _parse_floats), "gamma0": ("gamma0", float)},
    "continuity": {"b2": ("b2", None), "t": ("t_sequence", _parse_floats)},
}


def _cmd_check(args, cfg):
    # validate whatever model flags were given, so malformed input exits 2
    # before any suite runs
    if _resolve(args, cfg, "alpha", float) is not None:
        _build_model(args, cfg)
    b2 = _resolve(args, cfg, "b2", _parse_real)
    if b2 is not None:
        try:
            b2 = BoundaryData.asymptotic(b2).b2
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    kwargs = {}
    for flag, (kw, conv) in _CHECK_FLAGS[args.which].items():
        val = b2 if flag == "b2" else _resolve(args, cfg, flag)
        if val is None:
            continue
        if conv is not None and isinstance(val, str):
            val = conv(val)
        kwargs[kw] = val

    started = time.monotonic()
    report = run_check(args.which, **kwargs)
    elapsed = time.monotonic() - started
    report["version"] = __version__
    report["config"] = {"check": args.which, **{k: (list(v) if isinstance(v, (list, tuple)) else v)
                                                for k, v in kwargs.items()}}
    report["runtime_s"] = round(elapsed, 3) if args.timing else None
    rows = report.pop("rows")
    if args.csv and rows:
        header, csv_rows = _rows_to_csv(rows)
        _write_csv(args.csv, header, csv_rows)
    _write_json(args.json, report)
    return 0 if report["passed"] else 1


def _cmd_evolve(args, cfg):
    params = _build_model(args, cfg)
    boundary = _build_boundary(params, args, cfg)
    amp = ReducedAmplitude(params, boundary)
    k0 = _resolve(args, cfg, "k0", float, 1.0)
    sigma = _resolve(args, cfg, "sigma", float, 0.2)
    kmin = _resolve(args, cfg, "kmin", float, 1e-3)
    kmax = _resolve(args, cfg, "kmax", float, 4.0)
    nk = _resolve(args, cfg, "nk", int, 700)
    t0 = _resolve(args, cfg, "t0", float, 0.0)
    picture = _resolve(args, cfg, "picture", str, "interaction")
    times = _parse_floats(_resolve(args, cfg, "t", str, "0.5,1,2"))
    if not times:
        raise ConfigError("no output times given")
    try:
        psi = make_gaussian_packet(k0, sigma, (kmin, kmax, nk))
    except (GridSupportError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    rows, norms = [], []
    for t in times:
        evolved = apply_evolution(psi, t, t0, amp, picture=picture)
        norms.append({"t": t, "norm": evolved.norm()})
        for k, v in zip(evolved.k_nodes, evolved.values):
            rows.append([_fmt(t), _fmt(k), _fmt(v.real), _fmt(v.imag), _fmt(abs(v) ** 2)])
    _write_csv(args.csv, ["t", "k", "re_psi", "im_psi", "density"], rows)
    _write_json(args.json, {
        "version": __version__,
        "config": {**_resolved_model_config(params, boundary), "k0": k0, "sigma": sigma,
                   "kmin": kmin, "kmax": kmax, "nk": nk, "t0": t0,
                   "picture": picture, "times": times},
        "norms": norms})
    return 0


def _cmd_series(args, cfg):
    params = _build_model(args, cfg)
    boundary = _build_boundary(params, args, cfg)
    if params.regime() != Regime.NONLOCAL:
        raise ConfigError("the series exists in the nonlocal regime (alpha < 1/2)")
    kernel = TimeKernel(params, boundary)
    spec = _parse_floats(_resolve(args, cfg, "tau", str, "0.05,0.5,25"))
    if len(spec) != 3 or spec[0] <= 0 or spec[1] <= spec[0]:
        raise ConfigError("--tau must be MIN,MAX,N with 0 < MIN < MAX")
    taus = np.logspace(np.log10(spec[0]), np.log10(spec[1]), int(spec[2]))
    terms = _resolve(args, cfg, "terms", int, 20)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        vals, est = ttilde_series(taus, kernel, terms, with_estimate=True)
    vals = np.asarray(vals)
    rows = []
    for tau, v in zip(taus, vals):
        two = f_tau(tau, kernel)
        rows.append([_fmt(tau), _fmt(v.real), _fmt(v.imag), _fmt(two.real), _fmt(two.imag)])
    _write_csv(args.csv, ["tau", "re_series", "im_series", "re_twoterm", "im_twoterm"], rows)
    _write_json(args.json, {
        "version": __version__,
        "config": {**_resolved_model_config(params, boundary),
                   "tau": spec, "terms": terms},
        "truncation_estimate": est,
        "truncated": bool(caught)})
    return 0


def _cmd_volterra(args, cfg):
    params = _build_model(args, cfg)
    boundary = _build_boundary(params, args, cfg)
    if params.regime() != Regime.NONLOCAL:
        raise ConfigError("the march applies to the nonlocal regime (alpha < 1/2)")
    tau_max = _resolve(args, cfg, "tau_max", float, 0.5)
    nodes = _resolve(args, cfg, "nodes", int, 400)
    gamma = _resolve(args, cfg, "gamma", float)
    if gamma is None:
        gamma = default_grading(params)
    seed_frac = _resolve(args, cfg, "seed_frac", float, 0.01)
    try:
        grid = TimeGrid(tau_max, nodes, gamma)
        f = volterra_march(params, boundary, grid, seed_frac=seed_frac)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [[_fmt(tau), _fmt(v.real), _fmt(v.imag)] for tau, v in zip(grid.nodes, f)]
    _write_csv(args.csv, ["tau", "re_f", "im_f"], rows)
    _write_json(args.json, {
        "version": __version__,
        "config": {**_resolved_model_config(params, boundary), "tau_max": tau_max,
                   "nodes": nodes, "gamma": gamma, "seed_frac": seed_frac}})
    return 0


def _cmd_probe(args, cfg):
    params = _build_model(args, cfg)
    boundary = _build_boundary(params, args, cfg)
    amp = ReducedAmplitude(params, boundary)
    nu_list = _parse_floats(_resolve(args, cfg, "nu", str, "10,30,100"))
    gamma0 = _resolve(args, cfg, "gamma0", float, 0.5)
    t_list = _parse_floats(_resolve(args, cfg, "t", str, "0.01,0.03,0.1"))
    try:
        res = appendix_d_probe(nu_list, gamma0, t_list, amp)
    except (GridSupportError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    header, rows = _rows_to_csv(res["rows"])
    _write_csv(args.csv, header, rows)
    _write_json(args.json, {
        "version": __version__,
        "config": {**_resolved_model_config(params, boundary), "nu": nu_list,
                   "gamma0": gamma0, "t": t_list},
        "summary": res["summary"]})
    return 0


_COMMANDS = {
    "amplitude": _cmd_amplitude,
    "check": _cmd_check,
    "evolve": _cmd_evolve,
    "series": _cmd_series,
    "volterra": _cmd_volterra,
    "probe-appendix-d": _cmd_probe,
}


# flags whose values may start with '-' (negative numbers, "re,im" pairs);
# argparse only auto-detects bare negative numbers, so merge into --flag=value
_SIGNED_VALUE_FLAGS = {"--z", "--t", "--times", "--nu", "--tau", "--t0"}


def _merge_signed_values(argv):
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok in _SIGNED_VALUE_FLAGS and i + 1 < len(argv)
                and re.match(r"-[\d.]", argv[i + 1])):
            out.append(tok + "=" + argv[i + 1])
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(_merge_signed_values(argv))
    except SystemExit as exc:  # argparse exits on --help/--version/bad flags
        return int(exc.code or 0)
    try:
        cfg = _load_config(args.config) if getattr(args, "config", None) else {}
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"nltdyn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
