"""Command-line front end.

Subcommands: select, sweep, stability, expand-interactions, bench, replot.
Exit codes: 0 on success, 2 for usage or validation errors, 3 for numerical
failures.  Every file written starts with ``#``-prefixed header lines recording
the version, command line, seed, input hash and resolved configuration.

The Lasso objective is ``||y - X b||^2 + lam * sum |b_j|`` on centered,
unit-norm columns, so the path starts at ``lam_max = 2 max |x_j'y|``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import shlex
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import DEFAULT_B_SUB, DEFAULT_FRAC, DEFAULT_PI, stability_selection
from .core import REAL_DATA_GRID, acsel_sweep, confidence_indicators
from .errors import AcselError, NumericalError, ValidationError
from .geometry import Dataset, standardize
from .plots import bench_figures, replot, sweep_figures
from .selectors import Selector, lasso_path
from .simbench import (config_from_scenario, file_sha256, header_lines, load_scenario, parse_grid,
                       run_experiment, scenario_text, write_csv)

log = logging.getLogger("acsel")

# per-command defaults; a --config file may override any of them, flags override both
DEFAULTS = {
    "select": {"selector": "lasso", "criterion": "bic", "seed": 0},
    "sweep": {"selector": "lasso", "criterion": "bic", "grouping": "naive",
              "c0_grid": ",".join(f"{c:g}" for c in REAL_DATA_GRID), "B": 500, "threshold": 0.95, "seed": 0},
    "stability": {"selector": "lasso", "criterion": "bic", "B_sub": DEFAULT_B_SUB, "frac": DEFAULT_FRAC,
                  "pi": DEFAULT_PI, "seed": 0},
    "bench": {"seed": 0, "jobs": 1},
    "expand-interactions": {},
    "replot": {},
}
TYPES = {"seed": int, "B": int, "B_sub": int, "jobs": int, "replicates": int, "threshold": float,
         "frac": float, "pi": float, "snr": float}


# ------------------------------------------------------------------- input ---

def read_table(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header row plus numeric body; errors name the offending line."""
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: file is empty") from None
        if len(set(header)) != len(header) or any(not h for h in header):
            raise ValidationError(f"{path}:1: column names must be nonempty and unique")
        rows = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(i for i, c in enumerate(row) if not _is_float(c))
                raise ValidationError(f"{path}:{lineno}: non-numeric value {row[bad].strip()!r} "
                                      f"in column {header[bad]!r}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return header, np.array(rows)


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_dataset(path: str, response: str | None) -> Dataset:
    if not response:
        raise ValidationError("--response is required")
    header, table = read_table(path)
    if response not in header:
        raise ValidationError(f"{path}: response column {response!r} not found in header")
    j = header.index(response)
    keep = [i for i in range(len(header)) if i != j]
    if not keep:
        raise ValidationError(f"{path}: no predictor columns")
    return Dataset(table[:, keep], table[:, j], tuple(header[i] for i in keep))


def read_config(path: str | None) -> dict:
    """``key = value`` lines; keys use the long flag names (``c0-grid`` or ``c0_grid``)."""
    if not path:
        return {}
    cfg = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read config ({exc.strerror})") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def resolve(args: argparse.Namespace) -> dict:
    """Flags override the config file, which overrides the command defaults."""
    defaults = DEFAULTS[args.command]
    file_cfg = read_config(getattr(args, "config", None))
    unknown = set(file_cfg) - set(defaults) - set(OPTIONAL.get(args.command, ()))
    if unknown:
        raise ValidationError(f"unknown config keys for {args.command}: {', '.join(sorted(unknown))}")
    out = {}
    for key in set(defaults) | set(file_cfg) | set(OPTIONAL.get(args.command, ())):
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_cfg:
            try:
                out[key] = TYPES.get(key, str)(file_cfg[key])
            except ValueError:
                raise ValidationError(f"config value for {key!r} is not a valid {TYPES[key].__name__}") from None
        elif key in defaults:
            out[key] = defaults[key]
    return out


OPTIONAL = {"bench": ("selector", "criterion", "grouping", "c0_grid", "B", "threshold", "snr", "replicates")}


def selector_of(cfg: dict) -> Selector:
    spec = cfg["selector"]
    if ":" not in spec and cfg.get("criterion"):
        spec = f"{spec}:{cfg['criterion']}"
    return Selector.parse(spec)


def header_for(cfg: dict, argv: list[str], inputs: list[str]) -> dict:
    meta = {"acsel_version": __version__, "command": "acsel " + shlex.join(argv), "seed": cfg.get("seed", "")}
    for i, path in enumerate(inputs):
        meta[f"input_sha256{'' if i == 0 else i}"] = file_sha256(path)
    for key in sorted(cfg):
        if key != "seed":
            meta[f"config.{key}"] = cfg[key]
    return meta


def _fmt(v: float) -> str:
    return f"{v:.10g}"


# ---------------------------------------------------------------- commands ---

def cmd_select(args, argv) -> int:
    cfg = resolve(args)
    data = load_dataset(args.data, args.response)
    sd = standardize(data)
    sel = selector_of(cfg)
    fit = sel.fit(sd)
    intercept, slopes = sd.original_coefficients(fit.coef)
    meta = header_for(cfg, argv, [args.data])
    meta["selector"] = sel.name
    for key in ("lambda", "score"):
        if key in fit.info:
            meta[key] = _fmt(float(fit.info[key]))
    lines = ["variable,selected,coef_standardized,coef"]
    lines += [f"{n},{int(m)},{_fmt(c)},{_fmt(s)}" for n, m, c, s in zip(data.names, fit.mask, fit.coef, slopes)]
    lines.append(f"(intercept),1,0,{_fmt(intercept)}")
    text = header_lines(meta) + "\n".join(lines) + "\n"
    _emit(text, args.out)
    chosen = [n for n, m in zip(data.names, fit.mask) if m]
    print(f"{sel.name}: {len(chosen)} of {data.n_vars} selected: {' '.join(chosen) or '(none)'}", file=sys.stderr)
    return 0


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_sweep(args, argv) -> int:
    cfg = resolve(args)
    data = load_dataset(args.data, args.response)
    sd = standardize(data)
    sel = selector_of(cfg)
    grid = parse_grid(str(cfg["c0_grid"]))
    res = acsel_sweep(sd, sel, grid, cfg["B"], cfg["threshold"], cfg["seed"], grouping=cfg["grouping"])
    gamma = confidence_indicators(res)
    out = Path(args.out or "acsel_sweep")
    out.mkdir(parents=True, exist_ok=True)
    meta = header_for(cfg, argv, [args.data])
    meta.update({"selector": sel.name, "criterion": sel.criterion.value, "grouping": cfg["grouping"],
                 "B": cfg["B"], "threshold": cfg["threshold"]})

    rows = [{"c0": f"{c0:g}", "variable": name, "zeta": float(res.zeta[i, j]), "selected": int(res.masks[i, j])}
            for i, c0 in enumerate(res.grid) for j, name in enumerate(data.names)]
    write_csv(out / "sweep.csv", rows, meta)
    order = sorted(range(data.n_vars), key=lambda j: (-gamma[j], -res.masks[:, j].sum(), j))
    write_csv(out / "gamma.csv", [{"variable": data.names[j], "gamma": float(gamma[j]),
                                   "selected_at_c0_1": int(res.masks[0, j])} for j in order], meta)
    path = lasso_path(sd, max_df=sd.n_obs - 1)
    write_csv(out / "path.csv", [{"lambda": float(path.lambdas[k]), "variable": name, "coef": float(path.coefs[j, k])}
                                 for k in range(len(path)) for j, name in enumerate(data.names)], meta)
    sweep_figures(out)

    counts = res.selected_counts()
    for c0, n in zip(res.grid, counts):
        names = [data.names[j] for j in np.flatnonzero(res.masks[list(res.grid).index(c0)])]
        shown = " ".join(names) if n <= 8 else f"{' '.join(names[:8])} ..."
        print(f"c0={c0:<5g} selected={n:<3d} {shown}", file=sys.stderr)
    print(f"wrote {out}/sweep.csv, gamma.csv, path.csv, sweep_zeta.svg, coef_path.svg", file=sys.stderr)
    return 0


def cmd_stability(args, argv) -> int:
    cfg = resolve(args)
    data = load_dataset(args.data, args.response)
    sd = standardize(data)
    sel = selector_of(cfg)
    res = stability_selection(sd, sel, cfg["B_sub"], cfg["frac"], cfg["pi"], cfg["seed"])
    meta = header_for(cfg, argv, [args.data])
    meta["selector"] = sel.name
    lines = ["variable,probability,selected"]
    lines += [f"{n},{_fmt(p)},{int(m)}" for n, p, m in zip(data.names, res.probs, res.mask)]
    _emit(header_lines(meta) + "\n".join(lines) + "\n", args.out)
    return 0


def expand_interactions(header: list[str], table: np.ndarray, response: str | None,
                        exclude=(), center: bool = False) -> tuple[list[str], np.ndarray]:
    """Append every product ``a:b`` (a before or equal to b in column order).

    The response column, if named, is carried through untouched.  With
    ``center`` the base columns are centered before multiplying, which makes
    products less collinear with their factors (and changes the design).
    """
    base = [i for i, h in enumerate(header) if h != response]
    if len(base) < 2:
        raise ValidationError("need at least two predictor columns to form interactions")
    known = {f"{header[a]}:{header[b]}" for ia, a in enumerate(base) for b in base[ia:]}
    missing = [e for e in exclude if e not in known]
    if missing:
        raise ValidationError(f"--exclude names unknown interaction(s): {', '.join(missing)}")
    x = table[:, base]
    xc = x - x.mean(axis=0) if center else x
    names, cols = list(header), [table]
    for ia in range(len(base)):
        for ib in range(ia, len(base)):
            name = f"{header[base[ia]]}:{header[base[ib]]}"
            if name in exclude:
                continue
            names.append(name)
            cols.append((xc[:, ia] * xc[:, ib])[:, None])
    return names, np.hstack(cols)


def cmd_expand(args, argv) -> int:
    header, table = read_table(args.data)
    if args.response and args.response not in header:
        raise ValidationError(f"{args.data}: response column {args.response!r} not found in header")
    exclude = [e.strip() for chunk in args.exclude for e in chunk.split(",") if e.strip()]
    names, wide = expand_interactions(header, table, args.response, exclude, center=args.center)
    lines = [",".join(names)] + [",".join(repr(float(v)) for v in row) for row in wide]
    meta = {"acsel_version": __version__, "command": "acsel " + shlex.join(argv),
            "input_sha256": file_sha256(args.data)}
    text = header_lines(meta) + "\n".join(lines) + "\n" if args.header else "\n".join(lines) + "\n"
    _emit(text, args.out)
    n_pred = len(names) - (1 if args.response else 0)
    print(f"{n_pred} predictor columns", file=sys.stderr)
    return 0


def cmd_bench(args, argv) -> int:
    cfg = resolve(args)
    scenario = load_scenario(args.scenario)
    if cfg.get("snr") is not None:
        scenario = replace(scenario, snr=cfg["snr"])
    if getattr(args, "external_matrix", None):
        scenario = replace(scenario, external_matrix=args.external_matrix)
    selectors = None
    if cfg.get("selector"):
        specs = [s.strip() for s in str(cfg["selector"]).split(",") if s.strip()]
        crit = cfg.get("criterion")
        selectors = tuple(Selector.parse(s if ":" in s or not crit else f"{s}:{crit}").name for s in specs)
    bench = config_from_scenario(
        scenario, selectors=selectors,
        grid=parse_grid(str(cfg["c0_grid"])) if cfg.get("c0_grid") else None,
        n_boot=cfg.get("B"), threshold=cfg.get("threshold"), grouping=cfg.get("grouping"),
        seed=cfg["seed"], replicates=cfg.get("replicates"), stability=not args.no_stability, jobs=cfg["jobs"])
    text, _ = scenario_text(args.scenario)
    meta = {"acsel_version": __version__, "command": "acsel " + shlex.join(argv), "seed": cfg["seed"],
            "input_sha256": _sha256_text(text)}
    out = Path(args.out or f"bench_{scenario.name}")
    n = bench.n_replicates

    def progress(r):
        if args.verbose:
            print(f"replicate {r + 1}/{n} done", file=sys.stderr)

    run_experiment(bench, out, header=meta, resume=args.resume, progress=progress)
    figs = bench_figures(out)
    print(f"wrote {out}/masks.csv, results.csv, confidence.csv and {len(figs)} figures", file=sys.stderr)
    return 0


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cmd_replot(args, argv) -> int:
    figs = replot(args.dir)
    if not figs:
        raise ValidationError(f"{args.dir}: no results.csv/masks.csv or sweep.csv to plot")
    for f in figs:
        print(f, file=sys.stderr)
    return 0


# ------------------------------------------------------------------ parser ---

def _selector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--selector", help="lasso or stepwise, optionally with ':criterion' (default lasso)")
    p.add_argument("--criterion", choices=["bic", "bic2", "aicc", "gcv"], help="model-choice criterion (default bic)")


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", help="CSV with a header row; all columns except the response are predictors")
    p.add_argument("--response", help="name of the response column")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out", help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acsel", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"acsel {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="run the base selector once")
    _data_flags(p)
    _selector_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("sweep", help="AcSel over a c0 grid with confidence indicators and plots")
    _data_flags(p)
    _selector_flags(p)
    p.add_argument("--grouping", choices=["naive", "community", "community-lp"])
    p.add_argument("--c0-grid", dest="c0_grid", help="'1,0.9,...' or 'start:stop:step' (default 1:0.35:0.05)")
    p.add_argument("--B", type=int, help="perturbed designs per c0 (default 500)")
    p.add_argument("--threshold", type=float, help="selection threshold on zeta (default 0.95)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stability", help="stability selection over half subsamples")
    _data_flags(p)
    _selector_flags(p)
    p.add_argument("--B-sub", dest="B_sub", type=int, help=f"subsamples (default {DEFAULT_B_SUB})")
    p.add_argument("--frac", type=float, help=f"subsample fraction (default {DEFAULT_FRAC})")
    p.add_argument("--pi", type=float, help=f"selection-probability threshold (default {DEFAULT_PI})")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("expand-interactions", help="append all pairwise products a:b, squares included")
    p.add_argument("data")
    p.add_argument("--response", help="column to carry through without expanding")
    p.add_argument("--exclude", action="append", default=[], help="interaction names to drop, e.g. sex:sex")
    p.add_argument("--center", action="store_true", help="center base columns before multiplying")
    p.add_argument("--header", action="store_true", help="prefix the output with '#' metadata lines")
    p.add_argument("--out")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("bench", help="simulation benchmark from a scenario file or built-in name")
    p.add_argument("scenario", help="scenario file path or built-in name (situation1..situation4)")
    _selector_flags(p)
    p.add_argument("--grouping", choices=["naive", "community", "community-lp"])
    p.add_argument("--c0-grid", dest="c0_grid")
    p.add_argument("--B", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--snr", type=float, help="override the scenario's signal-to-noise ratio")
    p.add_argument("--replicates", type=int)
    p.add_argument("--external-matrix", dest="external_matrix", help="matrix file for external scenarios")
    p.add_argument("--no-stability", action="store_true", help="skip the stability-selection comparator")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes (outputs do not depend on it)")
    p.add_argument("--config")
    p.add_argument("--resume", action="store_true", help="keep complete replicate blocks of a previous run")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replot", help="regenerate figures from the CSVs of a run directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_replot)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    try:
        return args.func(args, argv)
    except ValidationError as exc:
        print(f"acsel: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"acsel: numerical failure: {exc}", file=sys.stderr)
        return 3
    except AcselError as exc:
        print(f"acsel: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
