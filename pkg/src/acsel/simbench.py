"""Simulation scenarios, evaluation metrics, and the replicated benchmark driver.

Scenario files are ``key = value`` text.  Recognized keys::

    name, n_obs, n_vars, beta ("first_q=5" or a comma list), covariance
    (identity | constant | external), rho, entries ("i,j,v; ..." 1-based
    off-diagonal overrides), snr, replicates, external_matrix, c0_grid,
    B, threshold, selectors, grouping

The benchmark writes a per-replicate mask log (``masks.csv``), from which
every aggregate (``results.csv``, ``confidence.csv``) is a pure function.
"""

from __future__ import annotations

import csv
import hashlib
import io
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

from .baselines import DEFAULT_B_SUB, DEFAULT_FRAC, DEFAULT_PI, stability_selection
from .core import acsel_sweep, check_grid, confidence_from_masks, naive_acsel
from .errors import ExternalMatrixMissing, NotPSD, ValidationError, ZeroSignal
from .geometry import Dataset, standardize
from .grouping import correlation, make_groups
from .seeding import derive, rng_for
from .selectors import Selector

METRICS = ("recall", "precision", "fscore", "emptiness")
N_BOOTSTRAP = 1000


@dataclass(frozen=True)
class SimScenario:
    name: str
    n_obs: int
    n_vars: int
    beta: np.ndarray
    covariance: str = "identity"
    rho: float = 0.0
    entries: tuple = ()
    snr: float = 5.0
    replicates: int = 200
    external_matrix: str | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (self.n_vars,):
            raise ValidationError(f"beta has length {beta.size}, expected n_vars={self.n_vars}")
        if not self.snr > 0:
            raise ValidationError("snr must be positive")
        if self.covariance not in ("identity", "constant", "external"):
            raise ValidationError(f"unknown covariance kind {self.covariance!r}")
        object.__setattr__(self, "beta", beta)

    @property
    def truth(self) -> np.ndarray:
        return np.flatnonzero(self.beta)


@dataclass(frozen=True)
class MetricsRecord:
    recall: float
    precision: float
    fscore: float
    emptiness: float
    n_nonempty: int


def _parse_beta(value: str, n_vars: int) -> np.ndarray:
    value = value.strip()
    if value.startswith("first_q"):
        q = int(value.split("=")[1])
        beta = np.zeros(n_vars)
        beta[:q] = 1.0
        return beta
    return np.array([float(v) for v in value.replace(";", ",").split(",") if v.strip()])


def parse_grid(text: str) -> tuple[float, ...]:
    """``"1,0.9,0.8"`` or ``"start:stop:step"`` (inclusive of stop)."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        n = int(round((start - stop) / step)) + 1
        return tuple(float(v) for v in np.round(start - step * np.arange(n), 10))
    return tuple(float(t) for t in text.split(",") if t.strip())


def parse_scenario(text: str, base_dir: Path | None = None) -> SimScenario:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"scenario line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        kv[key.strip().lower()] = value.strip()
    try:
        n_vars = int(kv.pop("n_vars"))
        n_obs = int(kv.pop("n_obs"))
        beta = _parse_beta(kv.pop("beta", "first_q=5"), n_vars)
    except KeyError as exc:
        raise ValidationError(f"scenario is missing required key {exc.args[0]!r}") from None
    entries = []
    for chunk in kv.pop("entries", "").split(";"):
        if chunk.strip():
            i, j, v = chunk.split(",")
            entries.append((int(i), int(j), float(v)))
    ext = kv.pop("external_matrix", None)
    if ext and base_dir is not None and not Path(ext).is_absolute():
        ext = str(base_dir / ext)
    return SimScenario(
        name=kv.pop("name", "scenario"), n_obs=n_obs, n_vars=n_vars, beta=beta,
        covariance=kv.pop("covariance", "identity"), rho=float(kv.pop("rho", 0.0)),
        entries=tuple(entries), snr=float(kv.pop("snr", 5.0)),
        replicates=int(kv.pop("replicates", 200)), external_matrix=ext, extras=kv,
    )


def builtin_scenarios() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("acsel.scenarios").iterdir() if p.name.endswith(".txt"))


def scenario_text(name_or_path: str) -> tuple[str, Path | None]:
    path = Path(name_or_path)
    if path.is_file():
        return path.read_text(encoding="utf-8"), path.parent
    res = resources.files("acsel.scenarios") / f"{name_or_path}.txt"
    if res.is_file():
        return res.read_text(encoding="utf-8"), None
    raise ValidationError(f"no scenario file or built-in scenario named {name_or_path!r} "
                          f"(built-ins: {', '.join(builtin_scenarios())})")


def load_scenario(name_or_path: str) -> SimScenario:
    text, base = scenario_text(name_or_path)
    return parse_scenario(text, base)


def covariance_matrix(s: SimScenario) -> np.ndarray:
    p = s.n_vars
    if s.covariance == "constant":
        sigma = np.full((p, p), s.rho)
        np.fill_diagonal(sigma, 1.0)
    else:
        sigma = np.eye(p)
    for i, j, v in s.entries:
        sigma[i - 1, j - 1] = sigma[j - 1, i - 1] = v
    return sigma


def _sqrt_psd(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(sigma)
        if vals.min() < -1e-10 * max(1.0, vals.max()):
            raise NotPSD(f"covariance has a negative eigenvalue ({vals.min():.3g})") from None
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def noise_variance_for_snr(signal: np.ndarray, snr: float) -> float:
    """Noise variance giving Var(signal) / sigma^2 = snr (empirical variance over rows)."""
    var = float(np.var(signal))
    if var <= 0:
        raise ZeroSignal("signal X beta has zero variance")
    return var / snr


def load_matrix(path: str | Path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    delim = "," if "," in text.splitlines()[0] else None
    try:
        return np.loadtxt(io.StringIO(text), delimiter=delim, ndmin=2)
    except ValueError:
        return np.loadtxt(io.StringIO(text), delimiter=delim, ndmin=2, skiprows=1)


def gen_scenario(s: SimScenario, rng: np.random.Generator, _cache: dict = {}) -> Dataset:
    """One simulated dataset.  External scenarios draw n_vars columns at random."""
    if s.covariance == "external":
        if not s.external_matrix or not Path(s.external_matrix).is_file():
            raise ExternalMatrixMissing("this scenario needs external_matrix = <file> (rows are observations)")
        key = str(Path(s.external_matrix).resolve())
        if key not in _cache:
            _cache[key] = load_matrix(key)
        pool = _cache[key]
        if pool.shape[1] < s.n_vars:
            raise ValidationError(f"external matrix has {pool.shape[1]} columns, need {s.n_vars}")
        cols = rng.choice(pool.shape[1], size=s.n_vars, replace=False)
        x = pool[:, cols]
        x = (x - x.mean(axis=0)) / x.std(axis=0)
    else:
        root = _sqrt_psd(covariance_matrix(s))
        x = rng.standard_normal((s.n_obs, s.n_vars)) @ root.T
    signal = x @ s.beta
    sigma2 = noise_variance_for_snr(signal, s.snr)
    y = signal + rng.normal(0.0, np.sqrt(sigma2), size=x.shape[0])
    return Dataset(x, y)


def replicate_metrics(truth, masks) -> dict[str, np.ndarray]:
    """Per-mask recall/precision/fscore (NaN for empty masks) and empty flags."""
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    in_truth = np.zeros(masks.shape[1], dtype=bool)
    in_truth[np.asarray(truth, dtype=np.int64)] = True
    hits = (masks & in_truth).sum(axis=1).astype(float)
    size = masks.sum(axis=1).astype(float)
    empty = size == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        recall = np.where(empty, np.nan, hits / max(in_truth.sum(), 1))
        precision = np.where(empty, np.nan, hits / size)
        total = recall + precision
        fscore = np.where(empty, np.nan, np.where(total > 0, 2 * recall * precision / total, 0.0))
    return {"recall": recall, "precision": precision, "fscore": fscore, "emptiness": empty.astype(float)}


def compute_metrics(truth, masks) -> MetricsRecord:
    m = replicate_metrics(truth, masks)
    nonempty = ~m["emptiness"].astype(bool)

    def avg(v):
        return float(v[nonempty].mean()) if nonempty.any() else float("nan")

    return MetricsRecord(avg(m["recall"]), avg(m["precision"]), avg(m["fscore"]),
                         float(m["emptiness"].mean()), int(nonempty.sum()))


def bootstrap_band(values: np.ndarray, rng: np.random.Generator, n_boot: int = N_BOOTSTRAP) -> tuple[float, float]:
    """Percentile 95% interval of the mean over replicate-level values."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


# ---------------------------------------------------------------- benchmark ---

@dataclass(frozen=True)
class BenchConfig:
    scenario: SimScenario
    selectors: tuple[str, ...] = ("lasso:bic",)
    grid: tuple[float, ...] = (1.0, 0.9, 0.8, 0.7)
    n_boot: int = 100
    threshold: float = 1.0
    grouping: str = "naive"
    seed: int = 0
    replicates: int | None = None
    stability: bool = True
    b_sub: int = DEFAULT_B_SUB
    frac: float = DEFAULT_FRAC
    pi_thr: float = DEFAULT_PI
    jobs: int = 1

    @property
    def n_replicates(self) -> int:
        return self.scenario.replicates if self.replicates is None else self.replicates

    def rows_per_replicate(self) -> int:
        return len(self.selectors) * (2 * len(self.grid) + int(self.stability))

    def metadata(self) -> dict:
        s = self.scenario
        return {
            "scenario": s.name, "n_obs": s.n_obs, "n_vars": s.n_vars, "covariance": s.covariance,
            "rho": s.rho, "entries": ";".join(f"{i},{j},{v}" for i, j, v in s.entries), "snr": s.snr,
            "snr_definition": "Var(X beta)/sigma^2", "truth": ";".join(map(str, s.truth)),
            "selectors": ",".join(self.selectors), "c0_grid": ",".join(f"{c:g}" for c in self.grid),
            "B": self.n_boot, "threshold": self.threshold, "grouping": self.grouping,
            "replicates": self.n_replicates, "seed": self.seed,
            "stability": f"B_sub={self.b_sub},frac={self.frac},pi={self.pi_thr}" if self.stability else "off",
            "criteria": "BIC=N log(rss/N)+log(N)df; AICc=N log(rss/N)+2df+2df(df+1)/(N-df-1); "
                        "GCV=rss/(N(1-df/N)^2); BIC2=rss/s2+log(N)df, s2=rss2/(N-3)",
        }


def config_from_scenario(s: SimScenario, **overrides) -> BenchConfig:
    ex = s.extras
    base = {}
    if "c0_grid" in ex:
        base["grid"] = parse_grid(ex["c0_grid"])
    if "b" in ex:
        base["n_boot"] = int(ex["b"])
    if "threshold" in ex:
        base["threshold"] = float(ex["threshold"])
    if "selectors" in ex:
        base["selectors"] = tuple(t.strip() for t in ex["selectors"].split(",") if t.strip())
    if "grouping" in ex:
        base["grouping"] = ex["grouping"]
    base.update({k: v for k, v in overrides.items() if v is not None})
    cfg = BenchConfig(s, **base)
    check_grid(cfg.grid)
    for name in cfg.selectors:
        Selector.parse(name)
    return cfg


def scenario_key(s: SimScenario) -> int:
    return zlib.crc32(s.name.encode("utf-8"))


def _fmt_c0(c0) -> str:
    return "" if c0 is None else f"{c0:g}"


def run_replicate(cfg: BenchConfig, r: int) -> list[str]:
    """All mask-log lines of replicate ``r``; a pure function of (cfg, r)."""
    key = scenario_key(cfg.scenario)
    data = gen_scenario(cfg.scenario, rng_for(cfg.seed, key, r, 0))
    sd = standardize(data)
    corr = correlation(sd)
    lines = []
    for k, name in enumerate(cfg.selectors):
        sel = Selector.parse(name)
        sweep = acsel_sweep(sd, sel, cfg.grid, cfg.n_boot, cfg.threshold, derive(cfg.seed, key, r, 1, k),
                            grouping=cfg.grouping)
        base = sweep.masks[0]
        for c0, mask in zip(cfg.grid, sweep.masks):
            lines.append(_log_line(r, name, "acsel", c0, mask))
        for c0 in cfg.grid:
            mask = naive_acsel(sd, sel, make_groups(corr, c0, cfg.grouping), base_mask=base)
            lines.append(_log_line(r, name, "naive", c0, mask))
        if cfg.stability:
            st = stability_selection(sd, sel, cfg.b_sub, cfg.frac, cfg.pi_thr, derive(cfg.seed, key, r, 2, k))
            lines.append(_log_line(r, name, "stability", None, st.mask))
    return lines


def _log_line(r, selector, method, c0, mask) -> str:
    return f"{r},{selector},{method},{_fmt_c0(c0)},{';'.join(map(str, np.flatnonzero(mask)))}\n"


LOG_COLUMNS = "replicate,selector,method,c0,selected\n"


def header_lines(meta: dict) -> str:
    return "".join(f"# {k}: {v}\n" for k, v in meta.items())


def read_header(path: Path) -> dict:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].strip().partition(": ")
            meta[k] = v
    return meta


def _existing_blocks(path: Path, cfg: BenchConfig) -> dict[int, list[str]]:
    """Complete replicate blocks of a previous (possibly interrupted) log."""
    blocks: dict[int, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line == LOG_COLUMNS or not line.strip():
                continue
            if not line.endswith("\n"):
                break
            blocks.setdefault(int(line.split(",", 1)[0]), []).append(line)
    want = cfg.rows_per_replicate()
    return {r: b for r, b in blocks.items() if len(b) == want}


def run_experiment(cfg: BenchConfig, out_dir: str | Path, header: dict | None = None,
                   resume: bool = False, progress=None) -> Path:
    """Run every replicate and write ``masks.csv`` plus the aggregates.

    Replicate blocks are flushed as they complete (in replicate order), so an
    interrupted run can be resumed; completed blocks are kept byte-for-byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "masks.csv"
    done = _existing_blocks(log_path, cfg) if resume and log_path.exists() else {}
    meta = dict(header or {})
    meta.update(cfg.metadata())
    todo = [r for r in range(cfg.n_replicates) if r not in done]

    with open(log_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header_lines(meta))
        fh.write(LOG_COLUMNS)
        pending = iter(_run_many(cfg, todo))
        for r in range(cfg.n_replicates):
            block = done[r] if r in done else next(pending)
            fh.writelines(block)
            fh.flush()
            if progress:
                progress(r)
    write_aggregates(out, header=header)
    return log_path


def _run_many(cfg: BenchConfig, reps: list[int]):
    if cfg.jobs <= 1 or len(reps) <= 1:
        for r in reps:
            yield run_replicate(cfg, r)
        return
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        yield from pool.map(_run_one, [(cfg, r) for r in reps])


def _run_one(args):
    return run_replicate(*args)


@dataclass
class MaskLog:
    meta: dict
    grid: tuple[float, ...]
    truth: np.ndarray
    n_vars: int
    # (selector, method) -> {c0 or None -> {replicate -> mask}}
    entries: dict

    def masks(self, selector, method, c0) -> np.ndarray:
        reps = self.entries[(selector, method)][c0]
        return np.array([reps[r] for r in sorted(reps)], dtype=bool).reshape(len(reps), self.n_vars)

    def pairs(self):
        return sorted(self.entries)


def read_mask_log(path: str | Path) -> MaskLog:
    path = Path(path)
    meta = read_header(path)
    n_vars = int(meta["n_vars"])
    grid = tuple(float(v) for v in meta["c0_grid"].split(","))
    truth = np.array([int(v) for v in meta.get("truth", "").split(";") if v], dtype=np.int64)
    entries: dict = {}
    with open(path, encoding="utf-8") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            c0 = float(row["c0"]) if row["c0"] else None
            mask = np.zeros(n_vars, dtype=bool)
            if row["selected"]:
                mask[[int(v) for v in row["selected"].split(";")]] = True
            entries.setdefault((row["selector"], row["method"]), {}).setdefault(c0, {})[int(row["replicate"])] = mask
    return MaskLog(meta, grid, truth, n_vars, entries)


def aggregate(log: MaskLog, seed: int = 0) -> list[dict]:
    """Long-format metric rows with bootstrap bands, one per (selector, method, c0, metric)."""
    rows = []
    for selector, method in log.pairs():
        for c0 in sorted(log.entries[(selector, method)], key=lambda v: -1.0 if v is None else -v):
            masks = log.masks(selector, method, c0)
            per = replicate_metrics(log.truth, masks)
            nonempty = per["emptiness"] == 0
            rng = rng_for(seed, zlib.crc32(f"{selector}|{method}|{_fmt_c0(c0)}".encode()))
            for metric in METRICS:
                vals = per[metric] if metric == "emptiness" else per[metric][nonempty]
                value = float(vals.mean()) if vals.size else float("nan")
                lo, hi = bootstrap_band(vals, rng)
                rows.append({"scenario": log.meta.get("scenario", ""), "selector": selector, "method": method,
                             "c0": _fmt_c0(c0), "metric": metric, "value": value, "lo95": lo, "hi95": hi})
            rows.append({"scenario": log.meta.get("scenario", ""), "selector": selector, "method": method,
                         "c0": _fmt_c0(c0), "metric": "n_nonempty", "value": float(nonempty.sum()),
                         "lo95": float("nan"), "hi95": float("nan")})
    return rows


def confidence_records(log: MaskLog, selector: str) -> tuple[np.ndarray, np.ndarray]:
    """(gamma, is_true) for every variable selected at some grid point, pooled over replicates."""
    by_c0 = log.entries[(selector, "acsel")]
    grid = np.array(sorted(by_c0, reverse=True))
    reps = sorted(by_c0[grid[0]])
    in_truth = np.zeros(log.n_vars, dtype=bool)
    in_truth[log.truth] = True
    gammas, truths = [], []
    for r in reps:
        masks = np.array([by_c0[c][r] for c in grid])
        ever = masks.any(axis=0)
        gammas.append(confidence_from_masks(grid, masks)[ever])
        truths.append(in_truth[ever])
    return np.concatenate(gammas), np.concatenate(truths)


def confidence_table(log: MaskLog, selector: str) -> list[dict]:
    gamma, truth = confidence_records(log, selector)
    rows = []
    for g in np.unique(np.round(gamma, 10)):
        sel = np.isclose(gamma, g)
        rows.append({"selector": selector, "gamma": float(g), "n_selected": int(sel.sum()),
                     "n_true": int(truth[sel].sum()), "fraction_true": float(truth[sel].mean())})
    return rows


def calibration_test(log: MaskLog, selector: str) -> tuple[float, float]:
    """Spearman correlation between gamma and being a true-support variable; one-sided p-value."""
    gamma, truth = confidence_records(log, selector)
    res = stats.spearmanr(gamma, truth.astype(float), alternative="greater")
    return float(res.statistic), float(res.pvalue)


def _fmt(v: float) -> str:
    return "nan" if v != v else f"{v:.6f}"


def write_csv(path: Path, rows: list[dict], header: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header:
            fh.write(header_lines(header))
        if not rows:
            return
        fh.write(",".join(rows[0]) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row.values()) + "\n")


def read_csv_rows(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def write_aggregates(out: Path, header: dict | None = None) -> None:
    log = read_mask_log(out / "masks.csv")
    meta = dict(log.meta)
    write_csv(out / "results.csv", aggregate(log, int(meta.get("seed", 0))), meta)
    conf = []
    for selector, method in log.pairs():
        if method == "acsel":
            conf.extend(confidence_table(log, selector))
    write_csv(out / "confidence.csv", conf, meta)


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def with_replicates(s: SimScenario, n: int) -> SimScenario:
    return replace(s, replicates=n)
