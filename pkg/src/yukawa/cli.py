"""CLI entrypoint for yukawa-majorant."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from yukawa.constants import (
    DIPOLE_COLUMNS,
    KERNEL_COLUMNS,
    RADIUS_COLUMNS,
    SPECFUN_COLUMNS,
    SUBCOMMANDS,
    THRESHOLD_COLUMNS,
    URSELL_COLUMNS,
)
from yukawa.dipole import dipole_report
from yukawa.energy import lower_bound_scan, minimize_ebar3_standard, superadditivity_minimum
from yukawa.errors import NumericalFailure
from yukawa.majorant import (
    DEFAULT_DELTAS,
    TAU_QUADRATURE,
    MajorantParams,
    Variant,
    cn_system,
    collapse_scan,
    literature_radius,
    radius_estimate,
    tau_k,
)
from yukawa.models import ChargedConfiguration, KernelKind, RunConfig, ScaleWindow
from yukawa.numerics import OdeGridSpec, QuadratureSpec, RngStream
from yukawa.potentials import euclid_hat, m_bounds, mixture_m_scaled, standard_kernel
from yukawa.specfun import bessel_k, kk_bounds, lambert_w0, p_profile
from yukawa.storage import append_log, write_csv, write_json
from yukawa.ursell import FlowContext, ursell_flow, ursell_graph_sum

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
_KINDS = tuple(kind.value for kind in KernelKind)
_FLAG_ALIASES = {"out": "output_path", "log": "log_path"}
_REAL_KEYS = ("beta", "t0", "t1", "deltas", "tol", "box", "c", "s", "x_min", "x_max")

_SUBCOMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "ursell-compare": {"beta": (2.0 * math.pi,), "t0": (1e-2,), "t1": 1.0, "n_max": 4,
                       "configs": 10},
    "majorant-radius": {"beta": (2.0 * math.pi, 5.0 * math.pi), "k": 3,
                        "t0": (1e-2, 1e-3, 1e-4)},
    "cn-flow": {"beta": (2.0 * math.pi,), "t0": (1e-3,), "t1": 1.0},
    "threshold-scan": {"beta": (3.0 * math.pi, 4.0 * math.pi), "r": (1,)},
    "dipole-scan": {"beta": (5.0 * math.pi, 7.0 * math.pi), "t0": (1e-2, 1e-3, 1e-4),
                    "samples": 20000},
}

_handler: logging.Handler | None = None


def real_value(text: str) -> float:
    """A float, or a multiple of pi written as ``5pi``, ``5*pi`` or ``pi``."""
    value = str(text).strip().lower()
    try:
        if value.endswith("pi"):
            head = value[:-2].rstrip("* ")
            return (float(head) if head else 1.0) * math.pi
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a real number: {text!r}") from None


def main() -> None:
    raise SystemExit(run())


def run(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = vars(parser.parse_args(argv))
    subcommand = args.pop("command", None)
    if subcommand is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    verbose = bool(args.pop("verbose", False))
    _configure_logging(verbose)
    try:
        config = _resolve_config(subcommand, args)
    except (OSError, json.JSONDecodeError, argparse.ArgumentTypeError, ValueError) as exc:
        print(f"yukawa {subcommand}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _log_event(config, f"start subcommand={subcommand} argv={list(argv or sys.argv[1:])}"
                       f" seed={config.seed} out={config.output_path}")
    try:
        _DISPATCH[subcommand](config)
        status = EXIT_OK
    except NumericalFailure as exc:
        print(f"yukawa {subcommand}: numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERICAL
    except ValueError as exc:
        print(f"yukawa {subcommand}: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    _log_event(config, f"finish subcommand={subcommand} status={status}")
    return status


def _configure_logging(verbose: bool) -> None:
    global _handler
    root = logging.getLogger()
    if _handler is None or _handler not in root.handlers:
        _handler = logging.StreamHandler(sys.stderr)
        _handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        root.addHandler(_handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _log_event(config: RunConfig, message: str) -> None:
    if config.log_path:
        append_log(Path(config.log_path), message)


def _load_config_file(path: str) -> dict[str, Any]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return payload


def _normalize_keys(payload: dict[str, Any]) -> dict[str, Any]:
    normalized = {}
    for key, value in payload.items():
        name = str(key).replace("-", "_")
        normalized[_FLAG_ALIASES.get(name, name)] = value
    return normalized


def _coerce_reals(payload: dict[str, Any]) -> dict[str, Any]:
    coerced = dict(payload)
    for key in _REAL_KEYS:
        value = coerced.get(key)
        if isinstance(value, str):
            coerced[key] = real_value(value)
        elif isinstance(value, list):
            coerced[key] = [real_value(v) if isinstance(v, str) else v for v in value]
    return coerced


def _resolve_config(subcommand: str, flags: dict[str, Any]) -> RunConfig:
    """Subcommand defaults, then the --config file, then explicit flags."""
    config_path = flags.pop("config", None)
    merged: dict[str, Any] = dict(_SUBCOMMAND_DEFAULTS.get(subcommand, {}))
    if config_path is not None:
        merged.update(_coerce_reals(_normalize_keys(_load_config_file(config_path))))
    merged.update(_normalize_keys(flags))
    merged["subcommand"] = subcommand
    for key in ("beta", "t0", "deltas", "r"):
        if key in merged and not isinstance(merged[key], (list, tuple)):
            merged[key] = [merged[key]]
    if "t1" in merged:
        merged["t1"] = float(merged["t1"])
    return RunConfig.from_dict(merged)


def _quadrature(config: RunConfig) -> QuadratureSpec:
    return QuadratureSpec(abs_tol=TAU_QUADRATURE.abs_tol, rel_tol=config.tol)


def _emit_table(config: RunConfig, columns: Sequence[str], rows: list[dict[str, Any]]) -> None:
    if config.resolved_format("csv") == "json":
        write_json(config.output_path, {"columns": list(columns), "rows": rows})
        return
    write_csv(config.output_path, columns, rows)


def _emit_record(config: RunConfig, payload: dict[str, Any]) -> None:
    if config.resolved_format("json") == "json":
        write_json(config.output_path, payload)
        return
    scalars = {key: value for key, value in payload.items() if not isinstance(value, (dict, list))}
    write_csv(config.output_path, sorted(scalars), [scalars])


def _sample_points(config: RunConfig) -> np.ndarray:
    return np.linspace(config.x_min, config.x_max, config.points)


def specfun_table_command(config: RunConfig) -> None:
    rows = []
    for x in _sample_points(config):
        x = float(x)
        bounds = kk_bounds(x)
        w = lambert_w0(x)
        rows.append(
            {
                "x": x,
                "K0": bessel_k(0, x),
                "K1": bessel_k(1, x),
                "p": p_profile(x),
                "K0_lower": bounds.k0_lower,
                "K0_upper": bounds.k0_upper,
                "W": w,
                "W_residual": w * math.exp(w) - x,
            }
        )
    _emit_table(config, SPECFUN_COLUMNS, rows)


def kernel_table_command(config: RunConfig) -> None:
    xs = _sample_points(config)
    masses = np.exp(-xs) * mixture_m_scaled(xs)
    rows = []
    for x, m in zip(xs, masses):
        x, m = float(x), float(m)
        bounds = m_bounds(x)
        rows.append(
            {
                "x": x,
                "h": euclid_hat(x),
                "h_tilde": standard_kernel(x),
                "m": m,
                "g": m / (2.0 * math.pi * x),
                "m_lower": bounds.lower,
                "m_upper": bounds.upper,
                "m_near_origin": bounds.near_origin,
                "m_mh": bounds.mh,
            }
        )
    _emit_table(config, KERNEL_COLUMNS, rows)


def ebar3_command(config: RunConfig) -> None:
    r1, r2, value = minimize_ebar3_standard(config.grid_max, config.grid_step)
    _emit_record(config, {"kernel": "standard_bessel", "r1": r1, "r2": r2, "value": value})


def superadd_command(config: RunConfig) -> None:
    margin, x, y = superadditivity_minimum(config.c, config.grid_max, config.grid_step)
    _emit_record(config, {"c": config.c, "margin": margin, "x": x, "y": y})


def energy_bound_scan_command(config: RunConfig) -> None:
    report = lower_bound_scan(
        config.n_max, config.samples, config.box, RngStream(config.seed), config.kernel_kind
    )
    _emit_record(config, report.to_dict())


def _random_configuration(stream: RngStream, n: int, box: float) -> ChargedConfiguration:
    rng = stream.generator()
    positions = rng.uniform(-box, box, size=(n, 2))
    charges = rng.choice(np.array([-1, 1]), size=n)
    return ChargedConfiguration(positions=positions, charges=tuple(int(c) for c in charges))


def ursell_compare_command(config: RunConfig) -> None:
    if not math.isfinite(config.t1):
        raise ValueError("ursell-compare needs a finite --t1")
    window = ScaleWindow(config.t0[0], config.t1)
    grid = OdeGridSpec(config.steps_per_decade)
    sizes = RngStream(config.seed).generator().integers(2, config.n_max + 1, size=config.configs)
    rows = []
    for index, n in enumerate(sizes):
        sample = _random_configuration(RngStream(config.seed).child(index + 1), int(n), config.box)
        ctx = FlowContext(config.beta[0], window, config.kernel_kind, sample)
        flow = ursell_flow(ctx, grid).top()
        graph = ursell_graph_sum(sample, config.beta[0], window, config.kernel_kind)
        rows.append(
            {
                "config": index,
                "n": sample.n,
                "subset": "-".join(str(i) for i in range(sample.n)),
                "flow": flow,
                "graph": graph,
                "discrepancy": abs(flow - graph),
            }
        )
    _emit_table(config, URSELL_COLUMNS, rows)


def majorant_radius_command(config: RunConfig) -> None:
    spec = _quadrature(config)
    rows = []
    for beta in config.beta:
        for t0 in config.t0:
            window = ScaleWindow(t0, config.t1)
            rows.append(
                {
                    "beta": beta,
                    "k": config.k,
                    "t0": t0,
                    "tau_k": tau_k(beta, config.k, window, spec),
                    "radius": radius_estimate(beta, config.k, window, spec),
                    "literature_radius": literature_radius(beta),
                }
            )
    _emit_table(config, RADIUS_COLUMNS, rows)


def cn_flow_command(config: RunConfig) -> None:
    if not math.isfinite(config.t1):
        raise ValueError("cn-flow needs a finite --t1")
    params = MajorantParams(
        beta=config.beta[0],
        k=config.k,
        window=ScaleWindow(config.t0[0], config.t1),
        variant=Variant(config.variant),
        n_terms=config.n_terms,
    )
    trajectory = cn_system(params, OdeGridSpec(config.steps_per_decade))
    columns = ["t"] + [f"C{n}" for n in range(1, params.n_terms + 1)]
    _emit_table(config, columns, trajectory.rows())


def threshold_scan_command(config: RunConfig) -> None:
    deltas = config.deltas or DEFAULT_DELTAS
    rows = [
        collapse_scan(beta, r, deltas).to_row() for beta in config.beta for r in config.r
    ]
    _emit_table(config, THRESHOLD_COLUMNS, rows)


def dipole_scan_command(config: RunConfig) -> None:
    stream = RngStream(config.seed)
    rows = []
    points = [(beta, t0) for beta in config.beta for t0 in config.t0]
    for index, (beta, t0) in enumerate(points):
        report = dipole_report(beta, t0, stream.child(index), s=config.s, samples=config.samples)
        rows.append(report.to_row())
    _emit_table(config, DIPOLE_COLUMNS, rows)


_DISPATCH: dict[str, Callable[[RunConfig], None]] = {
    "specfun-table": specfun_table_command,
    "kernel-table": kernel_table_command,
    "ebar3": ebar3_command,
    "superadd": superadd_command,
    "energy-bound-scan": energy_bound_scan_command,
    "ursell-compare": ursell_compare_command,
    "majorant-radius": majorant_radius_command,
    "cn-flow": cn_flow_command,
    "threshold-scan": threshold_scan_command,
    "dipole-scan": dipole_scan_command,
}


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", dest="output_path", help="Output file, '-' for stdout.")
    parser.add_argument("--format", choices=("csv", "json"), help="Output format.")
    parser.add_argument("--seed", type=int, help="Base seed of the random streams.")
    parser.add_argument("--tol", type=real_value, help="Relative quadrature tolerance.")
    parser.add_argument("--config", help="JSON file of flag values; explicit flags win.")
    parser.add_argument("--log", dest="log_path", help="Append a run log to this file.")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")


def _add_range_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x-min", type=real_value)
    parser.add_argument("--x-max", type=real_value)
    parser.add_argument("--points", type=int)


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-max", type=real_value)
    parser.add_argument("--grid-step", type=real_value)


def _add_beta(parser: argparse.ArgumentParser, many: bool = True) -> None:
    parser.add_argument(
        "--beta",
        type=real_value,
        nargs="+" if many else 1,
        help="Inverse temperature(s), e.g. 5pi.",
    )


def _add_window(parser: argparse.ArgumentParser, many: bool = True) -> None:
    parser.add_argument("--t0", type=real_value, nargs="+" if many else 1)
    parser.add_argument("--t1", type=real_value)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yukawa", description="Scale decompositions and Mayer majorants for the 2D Yukawa gas."
    )
    subparsers = parser.add_subparsers(dest="command")
    helps = {
        "specfun-table": "K0, K1, p(x), Bessel envelopes and Lambert W on a grid.",
        "kernel-table": "Euclid's hat, w K1(w), m(s), g(s) and the m envelopes on a grid.",
        "ebar3": "Minimal three-particle energy for the standard kernel.",
        "superadd": "Superadditivity margin of w K1(w) - c.",
        "energy-bound-scan": "Random configurations against the Euclid's-hat lower bound.",
        "ursell-compare": "Ursell flow against the connected-graph sum.",
        "majorant-radius": "tau_k and the majorant radius of convergence.",
        "cn-flow": "Coefficient trajectory of the majorant flow.",
        "threshold-scan": "Collapse exponents of neutral clusters.",
        "dipole-scan": "A2 bound and its Monte-Carlo value across the collapse interval.",
    }
    sub = {}
    for name in SUBCOMMANDS:
        sub[name] = subparsers.add_parser(
            name, help=helps[name], argument_default=argparse.SUPPRESS
        )
        _add_common_flags(sub[name])

    _add_range_flags(sub["specfun-table"])
    _add_range_flags(sub["kernel-table"])
    _add_grid_flags(sub["ebar3"])
    _add_grid_flags(sub["superadd"])
    sub["superadd"].add_argument("--c", type=real_value)

    scan = sub["energy-bound-scan"]
    scan.add_argument("--n-max", type=int)
    scan.add_argument("--samples", type=int)
    scan.add_argument("--box", type=real_value)
    scan.add_argument("--kind", choices=_KINDS)

    compare = sub["ursell-compare"]
    _add_beta(compare, many=False)
    _add_window(compare, many=False)
    compare.add_argument("--n-max", type=int)
    compare.add_argument("--configs", type=int)
    compare.add_argument("--box", type=real_value)
    compare.add_argument("--kind", choices=_KINDS)
    compare.add_argument("--steps-per-decade", type=int)

    radius = sub["majorant-radius"]
    _add_beta(radius)
    _add_window(radius)
    radius.add_argument("--k", type=int)

    flow = sub["cn-flow"]
    _add_beta(flow, many=False)
    _add_window(flow, many=False)
    flow.add_argument("--k", type=int)
    flow.add_argument("--variant", choices=tuple(v.value for v in Variant))
    flow.add_argument("--n-terms", type=int)
    flow.add_argument("--steps-per-decade", type=int)

    threshold = sub["threshold-scan"]
    _add_beta(threshold)
    threshold.add_argument("--r", type=int, nargs="+")
    threshold.add_argument("--deltas", type=real_value, nargs="+")

    dipole = sub["dipole-scan"]
    _add_beta(dipole)
    dipole.add_argument("--t0", type=real_value, nargs="+")
    dipole.add_argument("--s", type=real_value)
    dipole.add_argument("--samples", type=int)
    return parser


if __name__ == "__main__":
    main()
