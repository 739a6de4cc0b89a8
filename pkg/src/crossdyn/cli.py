"""Command-line interface: fit, surrogate, simulate, validate, intervene.

Every command is deterministic given its inputs, flags and seed; the seed
is echoed into all outputs. Files are written atomically (temp file then
rename); CSVs carry a header row; JSON outputs carry a schema version.
Errors print one machine-parsable ``ERROR:<CODE>: message`` line to
stderr and exit nonzero.
"""

import argparse
import csv
import json
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import CrossdynError, NoAttractorFound, ParseError, SchemaError
from .kde import DensityModel
from .landscape import EnergyLandscape, find_features
from .markov import LangevinModel
from .intervene import occupancy_fraction, relative_effort, relative_effort_model, tilted_landscape
from .pipeline import fit_model
from .sde import ForceTable, count_transitions, simulate
from .surrogate import LandauSpec, sample_landau
from .validate import (
    LongitudinalPair,
    StandardizationRecord,
    cluster_by_category,
    displacement_histogram,
    filter_range,
    validate_cohort,
)

MODEL_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

BMI_BOUNDARIES = (18.5, 25.0, 30.0)
BMI_LABELS = ("underweight", "normal", "overweight", "obese")


@dataclass
class RunConfig:
    """Tunables shared by the commands; overridable from a JSON file."""

    fineness: int = 10
    sigma_lo: float = 0.05
    sigma_hi: float = 10.0
    rel_tol: float = 1e-3
    min_cluster_size: int = 20
    delta_t_lo: int = 1
    delta_t_hi: int = 100
    null_repetitions: int = 1000
    bootstrap_repetitions: int = 1000
    quad_epsrel: float = 1e-10
    zero_displacement_policy: str = "exclude"
    standardize: bool = True
    ddof: int = 1
    fixed_grid: bool = False
    delta_t_unit: float | None = None

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
        cfg = cls()
        for key, value in raw.items():
            if not hasattr(cfg, key):
                raise ParseError(f"unknown config key {key!r} in {path}")
            setattr(cfg, key, value)
        return cfg


# ---------------------------------------------------------------------------
# File helpers
# ---------------------------------------------------------------------------


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, payload):
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _csv_cell(value):
    if isinstance(value, float):
        return repr(float(value))  # full precision; plain even for numpy scalars
    return str(value)


def read_cross_section_csv(path):
    """Read a one-column (``value``) or two-column (``id,value``) CSV."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip().lower() for h in header]
        if header == ["value"]:
            value_col, id_col = 0, None
        elif header == ["id", "value"]:
            value_col, id_col = 1, 0
        else:
            raise ParseError(
                f"{path}: header must be 'value' or 'id,value', got {','.join(header)!r}"
            )
        values, ids = [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values.append(float(row[value_col]))
            except (ValueError, IndexError):
                raise ParseError(
                    f"{path}: row {row_no}, column {value_col + 1}: "
                    f"expected a number, got {row!r}"
                ) from None
            ids.append(row[id_col] if id_col is not None else str(row_no - 2))
    # Too-few rows is a data property, not a parse failure; CrossSection
    # raises DegenerateData downstream.
    return np.asarray(values), ids


def read_longitudinal_csv(path):
    """Read ``id,baseline,<label_1>,...,<label_k>`` rows into pairs."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 3 or header[0].lower() != "id" or header[1].lower() != "baseline":
            raise ParseError(
                f"{path}: header must be 'id,baseline,<label>,...', got {','.join(header)!r}"
            )
        labels = header[2:]
        cohort = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {row_no}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                baseline = float(row[1])
                follows = tuple((labels[j], float(row[2 + j])) for j in range(len(labels)))
            except ValueError:
                raise ParseError(
                    f"{path}: row {row_no}: non-numeric value in {row!r}"
                ) from None
            cohort.append(LongitudinalPair(id=row[0], baseline=baseline, followups=follows))
    if not cohort:
        raise ParseError(f"{path}: no data rows")
    return cohort, labels


# ---------------------------------------------------------------------------
# Model persistence
# ---------------------------------------------------------------------------


def save_model(path, fit_output, config, seed=None):
    model = fit_output.model
    diag = fit_output.diagnostics
    grid = diag.chain.grid
    payload = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "label": fit_output.data.label,
        "seed": seed,
        "standardization": {
            "median": fit_output.record.median,
            "std": fit_output.record.std,
        },
        "kde": {
            "bandwidth": model.landscape.density.bandwidth,
            "samples": model.landscape.density.values.tolist(),
        },
        "sigma": model.sigma,
        "beta": model.beta,
        "grid": {
            "x_min": grid.x_min,
            "x_max": grid.x_max,
            "fineness": grid.fineness,
            "dt": grid.dt,
            "dx": grid.dx,
            "n_points": grid.n_points,
        },
        "fit": {
            "cost": diag.cost,
            "bracket": list(diag.bracket),
            "n_evaluations": diag.n_evaluations,
            "sigma_bounds": [config.sigma_lo, config.sigma_hi],
        },
    }
    _write_json(path, payload)


def load_model(path):
    """Load a model file: returns (LangevinModel, StandardizationRecord, meta)."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read model file {path}: {exc}") from exc
    version = raw.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: unsupported schema_version {version!r} "
            f"(this build reads {MODEL_SCHEMA_VERSION})"
        )
    try:
        density = DensityModel(
            values=np.asarray(raw["kde"]["samples"], dtype=np.float64),
            bandwidth=float(raw["kde"]["bandwidth"]),
            label=raw.get("label"),
        )
        model = LangevinModel(
            landscape=EnergyLandscape(density),
            sigma=float(raw["sigma"]),
            beta=float(raw.get("beta", 1.0)),
        )
        record = StandardizationRecord(
            median=float(raw["standardization"]["median"]),
            std=float(raw["standardization"]["std"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed model file ({exc})") from exc
    return model, record, raw


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_fit(args, config):
    values, _ = read_cross_section_csv(args.input)
    out = fit_model(
        values,
        label=os.path.basename(args.input),
        standardize_data=config.standardize,
        ddof=config.ddof,
        fineness=config.fineness,
        sigma_bounds=(config.sigma_lo, config.sigma_hi),
        rel_tol=config.rel_tol,
        fixed_grid=config.fixed_grid,
    )
    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, "model.json")
    save_model(model_path, out, config, seed=args.seed)

    chain = out.diagnostics.chain
    grid = chain.grid
    density = out.model.landscape.density
    xs = grid.points
    rows = zip(
        xs.tolist(),
        out.record.invert(xs).tolist(),
        density.pdf(xs).tolist(),
        out.model.landscape.energy(xs).tolist(),
        out.model.landscape.force(xs).tolist(),
        (chain.stationary / grid.dx).tolist(),
    )
    curves_path = os.path.join(args.out, "curves.csv")
    _write_csv(
        curves_path,
        ["x", "x_raw", "pdf", "energy", "force", "stationary_density"],
        rows,
    )
    print(f"sigma = {out.model.sigma:.6g}  (squared-Hellinger cost {out.diagnostics.cost:.3e})")
    print(f"wrote {model_path}")
    print(f"wrote {curves_path}")
    return 0


def cmd_surrogate(args, config):
    spec = LandauSpec(a=args.a, b=args.b, n=args.n, seed=args.seed)
    data = sample_landau(spec)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, args.name)
    _write_csv(path, ["id", "value"], ((i, float(v)) for i, v in enumerate(data.values)))
    print(f"wrote {path} ({args.n} samples, a={args.a:g}, b={args.b:g}, seed={args.seed})")
    return 0


def cmd_simulate(args, config):
    model, record, meta = load_model(args.model)
    dt = args.dt if args.dt is not None else model.grid_dt()
    table = ForceTable(model.landscape)
    traj = simulate(
        model, x0=args.x0, steps=args.steps, dt=dt, seed=args.seed, force_table=table
    )
    os.makedirs(args.out, exist_ok=True)
    traj_path = os.path.join(args.out, "trajectory.csv")
    stride = max(1, args.thin)
    _write_csv(
        traj_path,
        ["time", "state"],
        zip(traj.times[::stride].tolist(), traj.states[::stride].tolist()),
    )

    if args.tipping is not None:
        tips = [args.tipping]
    else:
        lo, hi = model.data_range()
        try:
            tips = list(find_features(model.landscape, lo, hi).tipping_points)
        except NoAttractorFound:
            tips = []
    stats = [
        {
            "tipping_point": tp,
            **_stats_dict(count_transitions(traj, tipping_point=tp)),
        }
        for tp in tips
    ]
    stats_path = os.path.join(args.out, "transition_stats.json")
    _write_json(
        stats_path,
        {
            "schema_version": REPORT_SCHEMA_VERSION,
            "seed": args.seed,
            "x0": args.x0,
            "dt": dt,
            "steps": args.steps,
            "transitions": stats,
        },
    )
    print(f"wrote {traj_path}")
    print(f"wrote {stats_path}")
    return 0


def _stats_dict(stats):
    return {
        "transition_count": stats.transition_count,
        "total_time": stats.total_time,
        "mean_time_between": stats.mean_time_between,
    }


def cmd_validate(args, config):
    cohort, labels = read_longitudinal_csv(args.input)
    followups = [args.followup] if args.followup else labels

    if args.range:
        lo, hi = _parse_range(args.range)
        cohort = filter_range(cohort, lo, hi)
        if not cohort:
            raise ParseError(f"no individuals in range [{lo}, {hi})")

    groups = [("pooled", cohort, False)]
    if args.clusters == "bmi":
        for cluster in cluster_by_category(
            cohort, BMI_BOUNDARIES, BMI_LABELS, min_size=config.min_cluster_size
        ):
            groups.append((cluster.label, list(cluster.members), cluster.disregarded))

    preloaded = None
    if args.model:
        preloaded = load_model(args.model)

    reports, hist_rows = [], []
    for name, members, disregarded in groups:
        entry = {"cluster": name, "n": len(members), "disregarded": disregarded}
        if disregarded or len(members) < 2:
            entry["skipped"] = True
            reports.append(entry)
            continue
        baselines = np.array([p.baseline for p in members])
        if name == "pooled" and preloaded is not None:
            model, record, _ = preloaded
        else:
            fit = fit_model(
                baselines,
                standardize_data=config.standardize,
                ddof=config.ddof,
                fineness=config.fineness,
                sigma_bounds=(config.sigma_lo, config.sigma_hi),
                rel_tol=config.rel_tol,
                fixed_grid=config.fixed_grid,
            )
            model, record = fit.model, fit.record
        for label in followups:
            try:
                report = validate_cohort(
                    model,
                    members,
                    followup_label=label,
                    record=record,
                    dt_unit=config.delta_t_unit,
                    scan=(config.delta_t_lo, config.delta_t_hi),
                    null_repetitions=config.null_repetitions,
                    bootstrap_repetitions=config.bootstrap_repetitions,
                    seed=args.seed,
                    zero_policy=config.zero_displacement_policy,
                    label=name,
                )
            except CrossdynError as exc:
                print(f"warning: cluster {name!r}, follow-up {label!r}: "
                      f"{exc.code}: {exc}", file=sys.stderr)
                reports.append(
                    {"cluster": name, "n": len(members), "followup_label": label,
                     "warning": exc.code, "message": str(exc)}
                )
                continue
            reports.append({"cluster": name, "n": len(members), **report.to_dict()})
            follow = np.array([p.followup(label) for p in members])
            for hbin in displacement_histogram(baselines, follow - baselines,
                                               bin_width=args.bin_width):
                hist_rows.append(
                    (name, label, hbin.lower, hbin.positive, hbin.negative, hbin.relative)
                )

    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "validation_report.json")
    _write_json(
        report_path,
        {"schema_version": REPORT_SCHEMA_VERSION, "seed": args.seed, "reports": reports},
    )
    hist_path = os.path.join(args.out, "displacement_histogram.csv")
    _write_csv(
        hist_path,
        ["cluster", "followup_label", "bin_lower", "positive", "negative", "relative"],
        hist_rows,
    )
    print(f"wrote {report_path}")
    print(f"wrote {hist_path}")
    return 0


def _parse_range(text):
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise ParseError(f"--range expects 'lo:hi', got {text!r}") from None


def cmd_intervene(args, config):
    os.makedirs(args.out, exist_ok=True)
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "c": args.c,
        "t": args.t,
        "threshold": args.threshold,
    }
    if args.model:
        model, record, _ = load_model(args.model)
        sigma = args.sigma if args.sigma is not None else model.sigma
        scaled = LangevinModel(landscape=model.landscape, sigma=sigma)
        payload["source"] = {"model": args.model, "sigma": sigma}
        payload["r"] = relative_effort_model(scaled, args.c, args.t, epsrel=config.quad_epsrel)
        tilted = tilted_landscape(model.landscape, args.c)
        lo, hi = model.data_range()
        try:
            feats = find_features(tilted, lo, hi)
            payload["tilted_attractors"] = list(feats.attractors)
            payload["tilted_tipping_points"] = list(feats.tipping_points)
        except NoAttractorFound:
            payload["tilted_attractors"] = []
            payload["tilted_tipping_points"] = []
        payload["occupancy_below_threshold"] = _model_occupancy(
            model, args.c, args.threshold
        )
    else:
        if args.a is None or args.b is None:
            raise ParseError("intervene needs either --model or both --a and --b")
        sigma = args.sigma
        if sigma is None:
            raise ParseError("intervene with --a/--b needs --sigma")
        payload["source"] = {"a": args.a, "b": args.b, "sigma": sigma}
        payload["r"] = relative_effort(
            args.a, args.b, args.c, args.t, sigma, epsrel=config.quad_epsrel
        )
        payload["occupancy_below_threshold"] = occupancy_fraction(
            args.a, args.b, args.c, threshold=args.threshold, epsrel=config.quad_epsrel
        )
        payload["tilted_attractors"] = _landau_tilted_attractors(args.a, args.b, args.c)

    path = os.path.join(args.out, "intervention.json")
    _write_json(path, payload)
    print(f"r = {payload['r']:.6g}")
    print(f"occupancy below {args.threshold:g} = {payload['occupancy_below_threshold']:.6g}")
    print(f"wrote {path}")
    return 0


def _landau_tilted_attractors(a, b, c):
    """Real minima of G = -a x^2 + b x^4 + c x (roots of G' with G'' > 0)."""
    roots = np.roots([4.0 * b, 0.0, -2.0 * a, c])
    real = roots[np.abs(roots.imag) < 1e-9].real
    minima = [float(x) for x in sorted(real) if -2.0 * a + 12.0 * b * x * x > 0.0]
    return minima


def _model_occupancy(model, c, threshold):
    """Mass below threshold of exp(-G) for the tilted KDE landscape."""
    density = model.landscape.density
    lo, hi = model.data_range()
    pad = 8.0 * density.bandwidth
    xs = np.linspace(lo - pad, hi + pad, 20001)
    weight = density.pdf(xs) * np.exp(-c * xs)
    total = np.trapezoid(weight, xs)
    mask = xs <= threshold
    left = np.trapezoid(weight[mask], xs[mask])
    return float(left / total)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="crossdyn",
        description="Infer and exercise Langevin dynamics from cross-sectional data.",
    )
    parser.add_argument("--version", action="version", version=f"crossdyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--config", default=None, help="JSON config file")

    p_fit = sub.add_parser("fit", parents=[common], help="fit a model to a cross-section CSV")
    p_fit.add_argument("input", help="CSV with a 'value' or 'id,value' header")
    p_fit.add_argument("--seed", type=int, default=None,
                       help="echoed into the model file (the fit itself is deterministic)")

    p_sur = sub.add_parser("surrogate", parents=[common], help="generate a synthetic cross-section")
    p_sur.add_argument("--a", type=float, required=True)
    p_sur.add_argument("--b", type=float, required=True)
    p_sur.add_argument("--n", type=int, required=True)
    p_sur.add_argument("--seed", type=int, required=True)
    p_sur.add_argument("--name", default="surrogate.csv", help="output file name")

    p_sim = sub.add_parser("simulate", parents=[common], help="integrate a fitted model")
    p_sim.add_argument("model", help="model JSON from 'fit'")
    p_sim.add_argument("--x0", type=float, required=True)
    p_sim.add_argument("--steps", type=int, required=True)
    p_sim.add_argument("--dt", type=float, default=None, help="override the grid time step")
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--thin", type=int, default=1, help="write every k-th state")
    p_sim.add_argument("--tipping", type=float, default=None,
                       help="tipping point for transition stats (default: detected)")

    p_val = sub.add_parser("validate", parents=[common], help="score a model against follow-ups")
    p_val.add_argument("input", help="CSV with 'id,baseline,<label>,...' header")
    p_val.add_argument("--model", default=None, help="model JSON (default: refit from baselines)")
    p_val.add_argument("--refit", action="store_true",
                       help="force refit even if --model is given")
    p_val.add_argument("--followup", default=None, help="validate one follow-up label only")
    p_val.add_argument("--clusters", choices=["bmi"], default=None,
                       help="also validate per standard BMI category")
    p_val.add_argument("--range", default=None, metavar="LO:HI",
                       help="restrict to lo <= baseline < hi")
    p_val.add_argument("--bin-width", type=float, default=1.0)
    p_val.add_argument("--seed", type=int, required=True)

    p_int = sub.add_parser("intervene", parents=[common], help="tilted-landscape analysis")
    p_int.add_argument("--model", default=None, help="model JSON from 'fit'")
    p_int.add_argument("--a", type=float, default=None)
    p_int.add_argument("--b", type=float, default=None)
    p_int.add_argument("--c", type=float, required=True, help="tilt strength")
    p_int.add_argument("--t", type=float, required=True, help="horizon for the effort ratio")
    p_int.add_argument("--sigma", type=float, default=None)
    p_int.add_argument("--threshold", type=float, default=0.0)

    return parser


_COMMANDS = {
    "fit": cmd_fit,
    "surrogate": cmd_surrogate,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "intervene": cmd_intervene,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "refit", False):
        args.model = None
    try:
        config = RunConfig.load(args.config) if args.config else RunConfig()
        return _COMMANDS[args.command](args, config)
    except CrossdynError as exc:
        print(f"ERROR:{exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
