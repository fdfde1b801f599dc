"""Command-line interface: tables, figure data and Monte Carlo verdicts.

Every command writes one envelope, a metadata record plus columnar payload,
as CSV (a ``# metadata: {json}`` line, a header row, then rows at full double
precision) or JSON (``{"metadata": ..., "payload": ...}``). Exit codes:
0 success, 1 usage or internal error, 2 statistical failure (``simulate``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .interferometer import DETECTORS, Detector, ExperimentConfig, SingularWeakValueError, bare_probability, weak_value
from .lhv import (
    UndefinedWeightsError,
    classify_convex_weights,
    convex_weights,
    factorized_solutions,
    histogram_overlap,
    negative_interval,
    negative_region_onset,
    scan_violations,
    split_weights,
    verify_bivariate_constraints,
    weight_histogram,
    weight_range,
    wigner_model,
)
from .numerics import DEFAULT_QUADRATURE, RNG_ALGORITHM, BracketError, Grid1D, RngStream
from .phasespace import default_scan_grids, negativity_scan, wigner_closed_form
from .pointer import POSITION, WAVENUMBER, Basis, default_grid, density, quadrature
from .simulate import (
    BasisPolicy,
    EinsteinConfig,
    WheelerConfig,
    committed_distribution_strategy,
    committed_outcome_strategy,
    compare,
    compare_counts,
    einstein_strategy,
    phi_zero_strategy,
    quantum_sampler,
    run_strategy,
    wheeler_probabilities,
    wheeler_strategy,
)

EXIT_OK, EXIT_USAGE, EXIT_STAT_FAIL = 0, 1, 2
SEED_ENV = "WEAKMZI_SEED"
FIGURES = ("fig2", "fig3", "fig4", "fig7")
STRATEGIES = ("quantum", "phi-zero", "committed-distribution", "committed-outcome-x", "committed-outcome-k",
              "wheeler", "einstein")


class UsageError(Exception):
    """Bad command-line input."""


# ---------------------------------------------------------------------------
# envelope


@dataclass
class OutputEnvelope:
    """Metadata plus equal-length columns. ``metadata["columns"]`` records each column's dtype."""

    format: str
    metadata: dict
    payload: dict

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ValueError(f"unknown format {self.format!r}")
        cols = {k: np.asarray(v) for k, v in self.payload.items()}
        lengths = {v.shape[0] for v in cols.values()}
        if len(lengths) > 1:
            raise ValueError("payload columns must have equal length")
        self.payload = cols
        self.metadata = dict(self.metadata)
        self.metadata["columns"] = {k: _dtype_name(v) for k, v in cols.items()}

    def equals(self, other: "OutputEnvelope") -> bool:
        """Exact equality of metadata and every payload value (NaN matches NaN)."""
        if self.metadata != other.metadata or list(self.payload) != list(other.payload):
            return False
        for k, a in self.payload.items():
            b = other.payload[k]
            if a.shape != b.shape:
                return False
            if a.dtype.kind == "f":
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif not np.array_equal(a, b):
                return False
        return True


def _dtype_name(a: np.ndarray) -> str:
    if a.dtype.kind == "b":
        return "bool"
    if a.dtype.kind in "iu":
        return "int"
    if a.dtype.kind == "f":
        return "float"
    return "str"


def _cast(values: list, dtype: str) -> np.ndarray:
    if dtype == "bool":
        return np.array([v in (True, "1", "true", "True") for v in values], dtype=bool)
    if dtype == "int":
        return np.array([int(v) for v in values], dtype=np.int64)
    if dtype == "float":
        return np.array([float(v) for v in values], dtype=float)
    return np.array([str(v) for v in values], dtype=str)


def _fmt(v, dtype: str) -> str:
    if dtype == "float":
        return "%.17g" % v
    if dtype == "bool":
        return "1" if v else "0"
    return str(v)


def emit(env: OutputEnvelope) -> str:
    """Serialise an envelope in its own format."""
    if env.format == "json":
        payload = {k: v.tolist() for k, v in env.payload.items()}
        return json.dumps({"metadata": env.metadata, "payload": payload}, indent=1) + "\n"
    buf = io.StringIO()
    buf.write("# metadata: " + json.dumps(env.metadata, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = list(env.payload)
    writer.writerow(names)
    dtypes = [env.metadata["columns"][n] for n in names]
    cols = [env.payload[n] for n in names]
    rows = len(cols[0]) if cols else 0
    for i in range(rows):
        writer.writerow([_fmt(c[i], t) for c, t in zip(cols, dtypes)])
    return buf.getvalue()


def parse(text: str, fmt: Optional[str] = None) -> OutputEnvelope:
    """Inverse of :func:`emit`; the format is sniffed when not given."""
    fmt = fmt or ("csv" if text.startswith("# metadata:") else "json")
    if fmt == "json":
        obj = json.loads(text)
        meta = obj["metadata"]
        payload = {k: _cast(v, meta["columns"][k]) for k, v in obj["payload"].items()}
        return OutputEnvelope("json", meta, payload)
    first, _, rest = text.partition("\n")
    meta = json.loads(first[len("# metadata:"):])
    rows = list(csv.reader(io.StringIO(rest)))
    header, body = rows[0], rows[1:]
    payload = {name: _cast([r[i] for r in body], meta["columns"][name]) for i, name in enumerate(header)}
    return OutputEnvelope("csv", meta, payload)


# ---------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, g_default: float = 1.0):
    p.add_argument("--phi", type=float, default=None, help="Bob's phase in radians (default pi/2)")
    p.add_argument("--phi-degrees", type=float, default=None, help="Bob's phase in degrees")
    p.add_argument("--g", type=float, default=g_default, help="meter coupling strength")
    p.add_argument("--sigma", type=float, default=1.0, help="initial meter width")
    p.add_argument("--L", dest="arm_length", type=float, default=1.0, help="arm length")
    p.add_argument("--v", dest="speed", type=float, default=1.0, help="particle speed in units of c")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", default=None, help="write here instead of stdout")
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (falls back to ${SEED_ENV}, then 0)")


def _phi(args) -> float:
    if args.phi is not None and args.phi_degrees is not None:
        raise UsageError("give --phi or --phi-degrees, not both")
    if args.phi_degrees is not None:
        return math.radians(args.phi_degrees)
    return math.pi / 2 if args.phi is None else args.phi


def _config(args) -> ExperimentConfig:
    try:
        return ExperimentConfig(phi=_phi(args), g=args.g, sigma=args.sigma, arm_length_L=args.arm_length,
                                particle_speed_v=args.speed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None


def _basis(text: str) -> Basis:
    try:
        return Basis.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _detector(text: str) -> Detector:
    try:
        return Detector.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _metadata(args, command: str, config: Optional[ExperimentConfig] = None, **extra) -> dict:
    meta = {
        "command": command,
        "version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "seed": _seed(args),
        "quadrature": {
            "method": DEFAULT_QUADRATURE.method,
            "abs_tol": DEFAULT_QUADRATURE.abs_tol,
            "max_subdivisions": DEFAULT_QUADRATURE.max_subdivisions,
            "node_count": DEFAULT_QUADRATURE.node_count,
        },
    }
    if config is not None:
        meta["config"] = config.as_dict()
    meta.update(extra)
    return meta


def _grid_meta(grid: Grid1D) -> dict:
    return {"min": grid.min, "max": grid.max, "points": grid.points}


# ---------------------------------------------------------------------------
# commands; each returns (envelope, exit code)


def _sweep(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise UsageError(f"--sweep-phi expects start:stop:count, got {text!r}") from None
    if n < 1:
        raise UsageError(f"--sweep-phi needs a count of at least 1, got {n}")
    return np.linspace(a, b, n)


def cmd_weakvalue(args) -> tuple[OutputEnvelope, int]:
    if args.sweep_phi is not None:
        if args.phi is not None or args.phi_degrees is not None:
            raise UsageError("give a single phase or --sweep-phi, not both")
        phis = _sweep(args.sweep_phi)
        config = _config(argparse.Namespace(**{**vars(args), "phi": float(phis[0])}))
        extra = {"sweep": {"start": float(phis[0]), "stop": float(phis[-1]), "count": int(phis.size)}}
    else:
        config = _config(args)
        phis = np.array([config.phi])
        extra = {}
    dets = DETECTORS if args.detector.lower() == "all" else (_detector(args.detector),)
    rows = {"phi": [], "detector": [], "re": [], "im": [], "modulus_squared": [], "bare_probability": []}
    for phi in phis:
        for d in dets:
            try:
                w = weak_value(d, float(phi))
                re, im, m2 = w.re, w.im, w.modulus_squared
            except SingularWeakValueError:
                if phis.size == 1:
                    raise UsageError(f"weak value of {d.value} is undefined at phi={phi!r}") from None
                re = im = m2 = float("nan")
            rows["phi"].append(float(phi))
            rows["detector"].append(d.value)
            rows["re"].append(re)
            rows["im"].append(im)
            rows["modulus_squared"].append(m2)
            rows["bare_probability"].append(bare_probability(d, float(phi)))
    payload = {k: np.array(v, dtype=str if k == "detector" else float) for k, v in rows.items()}
    meta = _metadata(args, "weakvalue", config, **extra)
    return OutputEnvelope(args.format, meta, payload), EXIT_OK


def cmd_distributions(args) -> tuple[OutputEnvelope, int]:
    config = _config(args)
    basis = _basis(args.basis)
    dets = DETECTORS if args.detector.lower() == "all" else (_detector(args.detector),)
    grid = default_grid(config, basis, args.points)
    payload = {"lambda": grid.values}
    masses = {}
    for d in dets:
        dist = density(config, d, basis, method=args.method)
        payload[f"Phi_{d.index}"] = dist(grid.values)
        masses[d.value] = dist.mass
    meta = _metadata(args, "distributions", config, basis=basis.label, grid=_grid_meta(grid), mass=masses,
                     method=args.method)
    return OutputEnvelope(args.format, meta, payload), EXIT_OK


_WIGNER_ALIASES = {"WA": "W_A", "WB": "W_B", "WPLUS": "W_plus", "W+": "W_plus", "W1": "W_1", "W2": "W_2"}


def _wigner_label(text: str) -> str:
    key = text.replace("_", "").upper()
    if key not in _WIGNER_ALIASES:
        raise UsageError(f"unknown Wigner function {text!r}; choose from W_A, W_B, W_plus, W_1, W_2")
    return _WIGNER_ALIASES[key]


def _grid_payload(fields, gx: Grid1D, gk: Grid1D) -> dict:
    xx, kk = np.meshgrid(gx.values, gk.values, indexing="ij")
    payload = {"x": xx.ravel(), "k": kk.ravel()}
    for f in fields:
        payload[f.label] = f.on_grid(gx, gk).ravel()
    return payload


def cmd_wigner(args) -> tuple[OutputEnvelope, int]:
    config = _config(args)
    labels = [_wigner_label(w) for w in args.which]
    fields = [wigner_closed_form(lab, config) for lab in labels]
    gx, gk = default_scan_grids(config, args.points)
    grids = {"x": _grid_meta(gx), "k": _grid_meta(gk)}
    if args.report == "negativity":
        reports = [negativity_scan(f, gx, gk) for f in fields]
        payload = {
            "which": np.array(labels, dtype=str),
            "min_value": np.array([r.min_value for r in reports]),
            "argmin_x": np.array([r.argmin[0] for r in reports]),
            "argmin_k": np.array([r.argmin[1] for r in reports]),
            "negative_mass": np.array([r.negative_mass for r in reports]),
        }
    else:
        payload = _grid_payload(fields, gx, gk)
    return OutputEnvelope(args.format, _metadata(args, "wigner", config, grids=grids), payload), EXIT_OK


def _lhv_convex(args, config):
    grid = default_grid(config, POSITION, args.points)
    payload = {"x": grid.values}
    classes = {}
    for d in (Detector.D1, Detector.D2):
        try:
            w = convex_weights(config, d, _basis(args.basis))
        except UndefinedWeightsError as exc:
            return {"detector": np.array([d.value]), "defined": np.array([False])}, {"reason": str(exc)}
        payload[f"w_A_{d.index}"] = w(grid.values)
        c = classify_convex_weights(w, grid)
        classes[d.value] = {"min": c.min_value, "max": c.max_value, "below_zero": c.below_zero,
                            "above_one": c.above_one}
    return payload, {"grid": _grid_meta(grid), "classification": classes}


def _lhv_onset(args, config):
    rows = {"detector": [], "onset_phi": [], "interval_lo": [], "interval_hi": []}
    for d in (Detector.D1, Detector.D2):
        try:
            onset = negative_region_onset(config, d)
        except BracketError:
            onset = float("nan")
        iv = negative_interval(config, d) or (float("nan"), float("nan"))
        rows["detector"].append(d.value)
        rows["onset_phi"].append(onset)
        rows["interval_lo"].append(iv[0])
        rows["interval_hi"].append(iv[1])
    return {k: np.array(v, dtype=str if k == "detector" else float) for k, v in rows.items()}, {}


def _lhv_split(args, config):
    basis = _basis(args.basis)
    grid = default_grid(config, basis, args.points)
    payload = {"lambda": grid.values}
    ranges = {}
    for d in (Detector.D1, Detector.D2):
        w = split_weights(config, d, basis)
        payload[f"w_{d.index}"] = w.raw(grid.values)
        ranges[d.value] = list(weight_range(w))
    return payload, {"basis": basis.label, "grid": _grid_meta(grid), "range": ranges}


def _lhv_histogram(args, config):
    basis = _basis(args.basis)
    h = weight_histogram(config, _detector(args.detector), basis, bins=args.bins, mode=args.mode)
    payload = {"bin_lo": h.edges[:-1], "bin_hi": h.edges[1:], "value": h.values, "component_mass": h.component_mass}
    return payload, {"basis": basis.label, "detector": h.detector.value, "support": list(h.support),
                     "mode": h.mode}


def _lhv_overlap(args, config):
    d = _detector(args.detector)
    hx = weight_histogram(config, d, POSITION, bins=args.bins)
    hk = weight_histogram(config, d, WAVENUMBER, bins=args.bins)
    rec = histogram_overlap(hx, hk)
    payload = {"bin_lo": hx.edges[:-1], "p_x": hx.p, "p_k": hk.p, "overlap": rec.overlap,
               "remainder_x": rec.remainder_x, "remainder_k": rec.remainder_k}
    return payload, {"remainder_mass": list(rec.remainder_mass), "split_mass": list(rec.split_mass),
                     "remainders_equal": rec.remainders_equal, "precondition_ok": rec.precondition_ok}


def _lhv_factorized(args, config):
    rows = {"solution": [], "max_residual": [], "weight_min": [], "weight_max": [], "admissible": []}
    for which in ("solution1", "solution2"):
        sol = factorized_solutions(config, which)
        rows["solution"].append(which)
        rows["max_residual"].append(max(sol.residuals.values()))
        rows["weight_min"].append(sol.weight_min)
        rows["weight_max"].append(sol.weight_max)
        rows["admissible"].append(sol.admissible)
    types = {"solution": str, "admissible": bool}
    return {k: np.array(v, dtype=types.get(k, float)) for k, v in rows.items()}, {}


def _lhv_scan(args, config):
    payload = {}
    for which in ("solution1", "solution2"):
        scan = scan_violations(config, which, points=args.points)
        payload["phi"] = scan.phis
        payload[f"{which}_min"] = scan.weight_min
        payload[f"{which}_max"] = scan.weight_max
    return payload, {}


def _lhv_constraints(args, config):
    if args.model == "wigner":
        model = wigner_model(config)
    else:
        model = factorized_solutions(config, args.model).model
    verdict = verify_bivariate_constraints(model, config)
    payload = {
        "check": np.array([c.name for c in verdict.checks], dtype=str),
        "passed": np.array([c.passed for c in verdict.checks], dtype=bool),
        "residual": np.array([c.residual for c in verdict.checks], dtype=float),
    }
    return payload, {"model": model.name, "passed": verdict.passed}


_LHV_REPORTS = {
    "convex-weights": _lhv_convex,
    "onset": _lhv_onset,
    "split-weights": _lhv_split,
    "histogram": _lhv_histogram,
    "overlap": _lhv_overlap,
    "factorized": _lhv_factorized,
    "scan": _lhv_scan,
    "constraints": _lhv_constraints,
}


def cmd_lhv(args) -> tuple[OutputEnvelope, int]:
    config = _config(args)
    payload, extra = _LHV_REPORTS[args.report](args, config)
    return OutputEnvelope(args.format, _metadata(args, f"lhv {args.report}", config, **extra), payload), EXIT_OK


def cmd_figures(args) -> tuple[OutputEnvelope, int]:
    which = args.which
    if which not in FIGURES:
        raise UsageError(f"unknown figure {which!r}; choose from {', '.join(FIGURES)}")
    if args.g is None:
        args.g = 10.0 if which == "fig4" else 1.0
    config = _config(args)
    extra: dict = {"figure": which}
    if which == "fig2":
        grid = default_grid(config, POSITION, args.points)
        payload = {"x": grid.values}
        for d in (Detector.D1, Detector.D2):
            payload[f"w_B_{d.index}"] = convex_weights(config, d).complement()(grid.values)
        extra["grid"] = _grid_meta(grid)
    elif which == "fig3":
        bases = (POSITION, WAVENUMBER, quadrature(1.0, 1.0), quadrature(0.1, 1.0))
        cols = {"basis": [], "lambda": [], "w_1": [], "w_2": []}
        for b in bases:
            grid = default_grid(config, b, args.points)
            cols["basis"].extend([b.label] * grid.points)
            cols["lambda"].extend(grid.values)
            for d in (Detector.D1, Detector.D2):
                cols[f"w_{d.index}"].extend(split_weights(config, d, b).raw(grid.values))
        payload = {k: np.array(v, dtype=str if k == "basis" else float) for k, v in cols.items()}
        extra["bases"] = [b.label for b in bases]
    elif which == "fig4":
        gx, gk = default_scan_grids(config, args.points)
        fields = [wigner_closed_form(lab, config) for lab in ("W_1", "W_2")]
        payload = _grid_payload(fields, gx, gk)
        extra["grids"] = {"x": _grid_meta(gx), "k": _grid_meta(gk)}
        extra["min"] = {f.label: float(payload[f.label].min()) for f in fields}
    else:
        cols = {"basis": [], "bin_lo": [], "bin_hi": [], "p": [], "component_mass": []}
        supports = {}
        for b in (POSITION, WAVENUMBER):
            h = weight_histogram(config, Detector.D1, b, bins=args.bins)
            cols["basis"].extend([b.label] * h.bins)
            cols["bin_lo"].extend(h.edges[:-1])
            cols["bin_hi"].extend(h.edges[1:])
            cols["p"].extend(h.p)
            cols["component_mass"].extend(h.component_mass)
            supports[b.label] = list(h.support)
        payload = {k: np.array(v, dtype=str if k == "basis" else float) for k, v in cols.items()}
        extra["support"] = supports
    return OutputEnvelope(args.format, _metadata(args, "figures", config, **extra), payload), EXIT_OK


def _policy(text: str, eta: Sequence[float]) -> BasisPolicy:
    if text in ("x", "k", "eta"):
        return BasisPolicy("fixed", (text,), tuple(eta))
    if text in ("random", "alternating"):
        return BasisPolicy(text, ("x", "k"), tuple(eta))
    raise UsageError(f"unknown basis policy {text!r}")


def cmd_simulate(args) -> tuple[OutputEnvelope, int]:
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    seed = _seed(args)
    stream = RngStream(seed)
    strategy = args.strategy
    extra: dict = {"strategy": strategy, "runs": args.runs}
    if strategy in ("wheeler", "einstein"):
        if strategy == "wheeler":
            wcfg = WheelerConfig(args.phi1, args.phi2, not args.no_b2, args.arm_length, args.speed)
            probs = wheeler_probabilities(wcfg)
            records = run_strategy(wheeler_strategy(), wcfg, args.runs, rng=stream)
            extra["wheeler"] = {"phi1": wcfg.phi1, "phi2": wcfg.phi2, "b2_present": wcfg.b2_present}
        else:
            records = run_strategy(einstein_strategy(), EinsteinConfig(args.arm_length, args.speed), args.runs,
                                   rng=stream)
            probs = (0.5, 0.5)
        verdict = compare_counts(records, probs, args.significance)
        config = None
    else:
        config = _config(args)
        policy = _policy(args.basis_policy, args.eta)
        extra["basis_policy"] = args.basis_policy
        if strategy == "quantum":
            records = quantum_sampler(config, args.runs, stream, policy, meter_on_d3=args.meter_on_d3)
        else:
            factory = {
                "phi-zero": lambda: phi_zero_strategy(config),
                "committed-distribution": lambda: committed_distribution_strategy(config),
                "committed-outcome-x": lambda: committed_outcome_strategy(config, "x"),
                "committed-outcome-k": lambda: committed_outcome_strategy(config, "k"),
            }[strategy]
            records = run_strategy(factory(), config, args.runs, rng=stream, basis_policy=policy,
                                   meter_on_d3=args.meter_on_d3)
        verdict = compare(records, config, args.significance)
    extra["passed"] = verdict.passed
    extra["counts"] = records.counts().tolist()
    extra["skipped_cells"] = list(verdict.skipped)
    if args.emit == "records":
        payload = {k: v for k, v in records.columns().items()}
    else:
        payload = {
            "test": np.array([t.name for t in verdict.tests], dtype=str),
            "statistic": np.array([t.statistic for t in verdict.tests]),
            "p_value": np.array([t.p_value for t in verdict.tests]),
            "threshold": np.array([t.threshold for t in verdict.tests]),
            "n": np.array([t.n for t in verdict.tests], dtype=np.int64),
            "passed": np.array([t.passed for t in verdict.tests], dtype=bool),
        }
    env = OutputEnvelope(args.format, _metadata(args, "simulate", config, **extra), payload)
    return env, EXIT_OK if verdict.passed else EXIT_STAT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weakmzi", description="Weak values and hidden-variable tests in a nested interferometer.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("weakvalue", help="weak values and bare click probabilities")
    _common(p)
    p.add_argument("--detector", default="all", help="D1, D2, D3 or all")
    p.add_argument("--sweep-phi", default=None, metavar="START:STOP:N", help="evenly spaced phases, inclusive")
    p.set_defaults(func=cmd_weakvalue)

    p = sub.add_parser("distributions", help="post-selected pointer densities on a grid")
    _common(p)
    p.add_argument("--detector", default="all")
    p.add_argument("--basis", default="x", help="x, k or eta:a,b")
    p.add_argument("--points", type=int, default=2048)
    p.add_argument("--method", choices=("closed-form", "born"), default="closed-form")
    p.set_defaults(func=cmd_distributions)

    p = sub.add_parser("wigner", help="Wigner functions on a grid or their negativity")
    _common(p)
    p.add_argument("--which", nargs="+", default=["W_1", "W_2"])
    p.add_argument("--report", choices=("grid", "negativity"), default="grid")
    p.add_argument("--points", type=int, default=512)
    p.set_defaults(func=cmd_wigner)

    p = sub.add_parser("lhv", help="hidden-variable weight analyses")
    _common(p)
    p.add_argument("--report", choices=tuple(_LHV_REPORTS), default="convex-weights")
    p.add_argument("--detector", default="D1")
    p.add_argument("--basis", default="x")
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--mode", choices=("discrete", "density"), default="discrete")
    p.add_argument("--points", type=int, default=2048)
    p.add_argument("--model", choices=("wigner", "solution1", "solution2"), default="wigner")
    p.set_defaults(func=cmd_lhv)

    p = sub.add_parser("figures", help="data arrays behind the standard figures")
    _common(p, g_default=None)
    p.add_argument("--which", required=True, help="fig2, fig3, fig4 or fig7")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--bins", type=int, default=100)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("simulate", help="Monte Carlo runs and a statistical verdict")
    _common(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="quantum")
    p.add_argument("--runs", type=int, default=1_000_000)
    p.add_argument("--basis-policy", default="random", help="x, k, eta, random or alternating")
    p.add_argument("--eta", type=float, nargs=2, default=(1.0, 1.0), metavar=("A", "B"))
    p.add_argument("--meter-on-d3", action="store_true", help="also read the meter when D3 clicks")
    p.add_argument("--significance", type=float, default=0.01)
    p.add_argument("--emit", choices=("verdict", "records"), default="verdict")
    p.add_argument("--phi1", type=float, default=0.0, help="Wheeler setup: phase on path 1")
    p.add_argument("--phi2", type=float, default=0.0, help="Wheeler setup: phase on path 2")
    p.add_argument("--no-b2", action="store_true", help="Wheeler setup: remove the second beam splitter")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "points", 0) is None:
            args.points = 512 if args.which == "fig4" else 2048
        env, code = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # internal failure: report and use the documented exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = emit(env)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code == EXIT_STAT_FAIL:
        print(f"statistical verdict: FAIL ({', '.join(t for t in _failed(env))})", file=sys.stderr)
    return code


def _failed(env: OutputEnvelope) -> list[str]:
    if "passed" in env.payload and "test" in env.payload:
        return [str(t) for t, ok in zip(env.payload["test"], env.payload["passed"]) if not ok]
    return []


if __name__ == "__main__":
    sys.exit(main())
