"""Command-line front end.

Subcommands: bounds, sweep, certify, fig3, simulate, audit.  Every flag has a
config-file equivalent (flat ``key = value`` lines, ``#`` comments); flags
take precedence over the file, the file over defaults.  ``--dump-config``
writes the fully resolved configuration, and re-running from that file
reproduces the output byte for byte.

Numerical output goes to ``--out`` (default stdout); a one-line human summary
goes to stderr.  Exit status: 0 on success, 1 when a certify run misses its
claimed gap, 2 on invalid input.
"""

import argparse
import hashlib
import json
import os
import sys
from collections import namedtuple
from math import log10, sqrt

import numpy as np

from . import __version__, bounds, gaps, mc
from .errors import CcdpError
from .model import ChannelParams, decompose_states

Opt = namedtuple("Opt", "type default help")

COMMANDS = ("bounds", "sweep", "certify", "fig3", "simulate", "audit")

_GRID_OPTS = {
    "M-values": Opt("ints", (2, 3, 4, 5, 6, 7, 8), "comma list of receiver counts"),
    "P-min": Opt(float, 3.01, "power grid lower end"),
    "P-max": Opt(float, 1e4, "power grid upper end"),
    "P-points": Opt(int, 50, "log-spaced power grid points"),
    "c2-min": Opt(float, 3.01, "squared-gain grid lower end"),
    "c2-max": Opt(float, 1e6, "squared-gain grid upper end"),
    "c2-points": Opt(int, 50, "log-spaced squared-gain grid points"),
    "rho-values": Opt(str, "feasible", "'feasible' or comma list of correlations"),
    "rho-points": Opt(int, 13, "feasible correlations per M when rho-values=feasible"),
}

_POINT_OPTS = {
    "M": Opt(int, 2, "number of receivers"),
    "P": Opt(float, 10.0, "transmit power (linear)"),
    "c2": Opt(float, None, "squared state gain (primary knob)"),
    "c": Opt(float, None, "state gain; accepted and squared"),
    "rho": Opt(float, 0.0, "pairwise state correlation"),
}

_COMMON_OPTS = {
    "out": Opt(str, "-", "output path, '-' for stdout"),
    "threads": Opt(int, None, "worker threads (default: CCDP_THREADS or 1)"),
}

OPTION_TABLES = {
    "bounds": {**_POINT_OPTS, **_COMMON_OPTS,
               "format": Opt(str, "text", "text, csv or json")},
    "sweep": {**_GRID_OPTS, **_COMMON_OPTS,
              "outer-variant": Opt(str, bounds.APPENDIX_FORM,
                                   "outer bound variant for the sweep"),
              "format": Opt(str, "csv", "csv or json")},
    "certify": {**_GRID_OPTS, **_COMMON_OPTS,
                "theorem": Opt(str, None, "one of Th3, Th4, Th5, Th6"),
                "variant": Opt(str, "appendix",
                               "appendix or theorem-statement outer"),
                "rows-out": Opt(str, None, "optional CSV path for the grid rows"),
                "format": Opt(str, "json", "csv or json")},
    "fig3": {"P": Opt(float, 10.0, "transmit power"),
             "c-min": Opt(float, 0.1, "gain range lower end"),
             "c-max": Opt(float, 10.0, "gain range upper end"),
             "points": Opt(int, 200, "number of gain points"),
             **_COMMON_OPTS,
             "format": Opt(str, "csv", "csv or json")},
    "simulate": {**_POINT_OPTS, **_COMMON_OPTS,
                 "target": Opt(str, "san", "san, gp, scheme or decomposition"),
                 "alpha-bar": Opt(float, None,
                                  "pre-coded power fraction (default: optimal)"),
                 "samples": Opt(int, 1_000_000, "Monte Carlo sample count"),
                 "seed": Opt(int, 0, "stream seed"),
                 "lam": Opt(float, None, "inflation factor override (gp only)"),
                 "format": Opt(str, "json", "json")},
    "audit": {**_GRID_OPTS, **_COMMON_OPTS,
              "families": Opt(str, "optimized",
                              "'optimized', 'all' or comma list of families"),
              "format": Opt(str, "csv", "csv or json")},
}


def _parse_value(kind, text):
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind == "ints":
        return tuple(int(t) for t in text.split(",") if t.strip())
    return text


def _format_value(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def read_config_file(path):
    """Parse a flat 'key = value' config file; '#' starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CcdpError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def resolve_config(command, flag_values, file_values):
    """Merge defaults, config file and flags (flags win)."""
    table = OPTION_TABLES[command]
    unknown = set(file_values) - set(table) - {"command"}
    if unknown:
        raise CcdpError(
            f"unknown config keys {sorted(unknown)}; valid keys for "
            f"{command}: {sorted(table)}")
    resolved = {}
    for name, opt in table.items():
        if flag_values.get(name) is not None:
            resolved[name] = flag_values[name]
        elif name in file_values:
            resolved[name] = _parse_value(opt.type, file_values[name])
        else:
            resolved[name] = opt.default
    if resolved.get("threads") is None:
        resolved["threads"] = int(os.environ.get("CCDP_THREADS", "1"))
    return resolved


def dump_config_text(command, resolved):
    lines = [f"command = {command}"]
    for name in sorted(resolved):
        if resolved[name] is None:
            continue
        lines.append(f"{name} = {_format_value(resolved[name])}")
    return "\n".join(lines) + "\n"


def config_hash(command, resolved):
    # Sink paths do not affect the numbers; keep the hash invariant to them
    # so identical computations are recognizable across output locations.
    material = {k: v for k, v in resolved.items() if k not in ("out", "rows-out")}
    return hashlib.sha256(
        dump_config_text(command, material).encode()).hexdigest()[:16]


def _build_parser(command):
    parser = argparse.ArgumentParser(prog=f"ccdp {command}", description=None)
    for name, opt in OPTION_TABLES[command].items():
        kwargs = {"help": opt.help, "default": None, "dest": name}
        if opt.type in (int, float):
            kwargs["type"] = opt.type
        elif opt.type == "ints":
            kwargs["type"] = lambda t: tuple(int(x) for x in t.split(","))
        parser.add_argument(f"--{name}", **kwargs)
    parser.add_argument("--config", default=None, help="config file path")
    parser.add_argument("--dump-config", default=None, dest="dump_config",
                        help="write the resolved config to this path")
    return parser


# ---------------------------------------------------------------------------
# Output helpers.
# ---------------------------------------------------------------------------

def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _meta(command, resolved, with_seed=False):
    meta = {"tool_version": __version__,
            "config_hash": config_hash(command, resolved)}
    if with_seed:
        meta["seed"] = resolved.get("seed", 0)
    return meta


def _envelope(command, resolved, results, max_gap=None, certified=None,
              warnings=(), with_seed=False):
    cfg = {"command": command}
    cfg.update({k: (list(v) if isinstance(v, tuple) else v)
                for k, v in sorted(resolved.items())})
    cfg.update(_meta(command, resolved, with_seed))
    return json.dumps(
        {"config": cfg, "results": results, "maxGap": max_gap,
         "certified": certified, "warnings": list(warnings)},
        indent=2, allow_nan=True) + "\n"


def _params_from(opts):
    c2, c = opts.get("c2"), opts.get("c")
    if c2 is None and c is None:
        raise CcdpError("one of --c2 or --c is required")
    if c2 is not None and c is not None and abs(c * c - c2) > 1e-9:
        raise CcdpError(f"--c2 ({c2}) and --c ({c}) disagree")
    if c2 is None:
        c2 = c * c
    if c2 < 0:
        raise CcdpError(f"--c2 must be >= 0, got {c2}")
    return ChannelParams(opts["M"], opts["P"], sqrt(c2), opts["rho"])


def _grid_from(opts, outer_variant=None):
    rho_text = opts["rho-values"]
    rho_values = None if rho_text == "feasible" else tuple(
        float(t) for t in rho_text.split(",") if t.strip())
    variant = outer_variant or opts.get("outer-variant", bounds.APPENDIX_FORM)
    if variant in ("appendix", bounds.APPENDIX_LOOSENED):
        variant = bounds.APPENDIX_FORM
    return gaps.SweepGrid(
        m_values=tuple(opts["M-values"]),
        p_values=tuple(np.logspace(log10(opts["P-min"]), log10(opts["P-max"]),
                                   opts["P-points"])),
        c2_values=tuple(np.logspace(log10(opts["c2-min"]), log10(opts["c2-max"]),
                                    opts["c2-points"])),
        rho_values=rho_values,
        rho_points=opts["rho-points"],
        outer_variant=variant,
    )


def _estimate_dict(est):
    return {"value": est.value, "stderr": est.stderr, "samples": est.samples,
            "closed_form": est.closed_form, "z_score": est.z_score}


# ---------------------------------------------------------------------------
# Command implementations.
# ---------------------------------------------------------------------------

def cmd_bounds(resolved):
    params = _params_from(resolved)
    inner = bounds.ccdp_es_inner(params)
    if params.M == 2 and params.rho == 0.0:
        appendix = bounds.ccdp2_outer(params, bounds.APPENDIX_LOOSENED)
    else:
        appendix = bounds.ccdp_es_outer(params, bounds.APPENDIX_FORM)
    theorem = bounds.ccdp_es_outer(params, bounds.THEOREM)
    gap = appendix.value - inner.value

    if resolved["format"] == "json":
        results = {
            "inner": {"value": inner.value, "branch": inner.branch},
            "outer_appendix": {"value": appendix.value, "branch": appendix.branch,
                               "variant": appendix.variant},
            "outer_theorem": {"value": theorem.value, "branch": theorem.branch,
                              "variant": theorem.variant},
            "gap": gap,
        }
        _write(_envelope("bounds", resolved, results, max_gap=gap), resolved["out"])
    elif resolved["format"] == "csv":
        row = gaps.GapRow(params.M, params.P, params.c, params.rho,
                          appendix.variant, inner.value, appendix.value, gap,
                          inner.branch, appendix.branch)
        _write(gaps.rows_to_csv([row], _meta("bounds", resolved)), resolved["out"])
    else:
        _write(
            f"inner {inner.value:.6f}\n"
            f"outer(appendix) {appendix.value:.6f}\n"
            f"outer(theorem) {theorem.value:.6f}\n"
            f"gap {gap:.6f}\n",
            resolved["out"])
    print(f"bounds: M={params.M} P={params.P} c2={params.c2} rho={params.rho} "
          f"gap={gap:.6f}", file=sys.stderr)
    return 0


def cmd_sweep(resolved):
    grid = _grid_from(resolved)
    print(f"sweep: {grid.size()} grid points", file=sys.stderr)
    report = gaps.run_sweep(grid, threads=resolved["threads"])
    if resolved["format"] == "json":
        _write(_envelope("sweep", resolved, gaps.report_summary(report),
                         max_gap=report.max_gap, warnings=report.warnings),
               resolved["out"])
    else:
        _write(gaps.rows_to_csv(report.rows, _meta("sweep", resolved)),
               resolved["out"])
    print(f"sweep: maxGap={report.max_gap:.6f} at "
          f"{gaps.report_summary(report)['argmax']}", file=sys.stderr)
    return 0


def cmd_certify(resolved):
    theorem = resolved["theorem"]
    if theorem is None:
        raise CcdpError("--theorem is required (one of Th3, Th4, Th5, Th6)")
    variant = resolved["variant"]
    grid = gaps.theorem_grid(theorem, _grid_from(resolved))
    report = gaps.certify_theorem(theorem, grid, variant_kind=variant,
                                  threads=resolved["threads"])
    if resolved["rows-out"]:
        _write(gaps.rows_to_csv(report.rows, _meta("certify", resolved)),
               resolved["rows-out"])
    if resolved["format"] == "csv":
        _write(gaps.rows_to_csv(report.rows, _meta("certify", resolved)),
               resolved["out"])
    else:
        _write(_envelope("certify", resolved, gaps.report_summary(report),
                         max_gap=report.max_gap, certified=report.certified,
                         warnings=report.warnings),
               resolved["out"])
    print(f"certify {theorem} ({variant}): maxGap={report.max_gap:.6f} "
          f"certified={'true' if report.certified else 'false'}",
          file=sys.stderr)
    return 0 if report.certified else 1


def cmd_fig3(resolved):
    c_values = np.linspace(resolved["c-min"], resolved["c-max"], resolved["points"])
    rows = gaps.fig3_curve(resolved["P"], c_values)
    if resolved["format"] == "json":
        results = [{"c": c, "raw_outer": r, "optimized_outer": o}
                   for c, r, o in rows]
        _write(_envelope("fig3", resolved, results), resolved["out"])
    else:
        lines = [f"# {k}: {v}" for k, v in _meta("fig3", resolved).items()]
        lines.append("c,raw_outer,optimized_outer")
        lines += [f"{c!r},{r!r},{o!r}" for c, r, o in rows]
        _write("\n".join(lines) + "\n", resolved["out"])
    print(f"fig3: P={resolved['P']} points={resolved['points']}", file=sys.stderr)
    return 0


def cmd_simulate(resolved):
    params = _params_from(resolved)
    target = resolved["target"]
    if target not in mc.TARGETS:
        raise CcdpError(f"--target must be one of {mc.TARGETS}, got {target!r}")
    ab = resolved["alpha-bar"]
    if ab is None:
        ceff2 = params.c2 * params.rho_bar_plus
        ab = min(1.0, max(0.0, (ceff2 + 1.0 - params.M)
                          / (params.P * (params.M - 1))))
    config = mc.SimulationConfig(params=params, samples=resolved["samples"],
                                 seed=resolved["seed"], alpha_bar=ab,
                                 target=target)
    threads = resolved["threads"]
    if target == "san":
        results = _estimate_dict(mc.estimate_san_rate(config, threads=threads))
    elif target == "gp":
        results = _estimate_dict(
            mc.estimate_gp_rate(config, lam=resolved["lam"], threads=threads))
    elif target == "scheme":
        report = mc.verify_scheme_rate(config, threads=threads)
        results = {
            "combined_rate": report.combined_rate,
            "combined_stderr": report.combined_stderr,
            "closed_form": report.closed_form,
            "z_score": report.z_score,
            "per_receiver": [
                {"san": _estimate_dict(san),
                 "gp": None if gp is None else _estimate_dict(gp)}
                for san, gp in report.per_receiver],
        }
    elif target == "decomposition":
        decomp = decompose_states(params)
        err = mc.verify_decomposition_stats(decomp, resolved["samples"],
                                            resolved["seed"])
        results = {"kind": decomp.kind,
                   "coefficients": {k: float(v)
                                    for k, v in decomp.coefficients.items()},
                   "max_abs_covariance_error": err}
    results["alpha_bar"] = ab
    _write(_envelope("simulate", resolved, results, with_seed=True),
           resolved["out"])
    print(f"simulate {target}: samples={resolved['samples']} "
          f"seed={resolved['seed']}", file=sys.stderr)
    return 0


def cmd_audit(resolved):
    grid = _grid_from(resolved)
    fam_text = resolved["families"]
    if fam_text == "optimized":
        families = gaps.OPTIMIZED_FAMILIES
    elif fam_text == "all":
        families = tuple(gaps.AUDIT_FAMILIES)
    else:
        families = tuple(t.strip() for t in fam_text.split(",") if t.strip())
        unknown = set(families) - set(gaps.AUDIT_FAMILIES)
        if unknown:
            raise CcdpError(f"unknown audit families {sorted(unknown)}; "
                            f"valid: {sorted(gaps.AUDIT_FAMILIES)}")
    violations = gaps.monotonicity_audit(grid, families)
    if resolved["format"] == "json":
        results = [vars(v) if not hasattr(v, "__dataclass_fields__") else
                   {f: getattr(v, f) for f in v.__dataclass_fields__}
                   for v in violations]
        _write(_envelope("audit", resolved, results), resolved["out"])
    else:
        lines = [f"# {k}: {v}" for k, v in _meta("audit", resolved).items()]
        lines.append("family,M,P,rho,c_low,c_high,increase")
        lines += [f"{v.family},{v.M},{v.P!r},{v.rho!r},{v.c_low!r},"
                  f"{v.c_high!r},{v.increase!r}" for v in violations]
        _write("\n".join(lines) + "\n", resolved["out"])
    print(f"audit: {len(violations)} violations over {len(families)} families",
          file=sys.stderr)
    return 0


_HANDLERS = {
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
    "certify": cmd_certify,
    "fig3": cmd_fig3,
    "simulate": cmd_simulate,
    "audit": cmd_audit,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in ("-h", "--help"):
        print(f"ccdp {__version__} - capacity bound engine\n"
              f"usage: ccdp {{{','.join(COMMANDS)}}} [options]\n"
              f"       ccdp --config FILE   (command taken from the file)")
        return 0

    command, rest = None, argv
    if argv and argv[0] in COMMANDS:
        command, rest = argv[0], argv[1:]

    try:
        # Allow the command to come from a config file.
        file_values = {}
        if command is None:
            if "--config" not in argv:
                sys.stderr.write(
                    f"usage: ccdp {{{','.join(COMMANDS)}}} [options]\n")
                return 2
            path = argv[argv.index("--config") + 1]
            file_values = read_config_file(path)
            command = file_values.get("command")
            if command not in COMMANDS:
                raise CcdpError(
                    f"config file {path} must set command to one of {COMMANDS}")

        parser = _build_parser(command)
        ns = parser.parse_args(rest)
        flag_values = {name: getattr(ns, name) for name in OPTION_TABLES[command]}
        if ns.config and not file_values:
            file_values = read_config_file(ns.config)
        if file_values.get("command", command) != command:
            raise CcdpError(
                f"config file command={file_values['command']} does not match "
                f"subcommand {command}")
        resolved = resolve_config(command, flag_values, file_values)
        if ns.dump_config:
            with open(ns.dump_config, "w", encoding="utf-8") as fh:
                fh.write(dump_config_text(command, resolved))
        return _HANDLERS[command](resolved)
    except CcdpError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 2
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
