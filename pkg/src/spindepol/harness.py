"""Parameter scans, scaling fits and result files.

Scan rows are long-format: one row per (n, state, rates, quantity, bipartition,
time). Every file written here carries ``"schema": "1"`` (JSON) or a leading
``# schema: 1`` line (CSV).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import NumericalError, RateSet, evolve, qsl_bounds
from .entanglement import negativity, t_npt, t_p, t_rmax
from .mpb import from_multipoles, purity
from .states import parse_state

SCHEMA = "1"
QUANTITIES = ("R", "r", "negativity", "t_npt", "t_p", "t_rmax", "qsl")
TIME_RESOLVED = {"R", "r", "negativity"}
PER_CUT = {"negativity", "t_npt"}
ROW_FIELDS = ("n", "state", "gx", "gy", "gz", "omega", "quantity", "q", "t", "value", "error")
MODELS = ("powerlaw", "affine", "affine-sqrt", "const")


class ConfigError(ValueError):
    """Invalid scan configuration."""


class FitError(ArithmeticError):
    """Data cannot support the requested fit."""


def fmt(x) -> str:
    """17 significant digits, so files round-trip bit for bit."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def bipartitions(n: int, selector) -> list[int]:
    """Cut sizes ``q`` for a selector; ``(q, n-q)`` and ``(n-q, q)`` are the same cut."""
    if isinstance(selector, (int, np.integer)):
        qs = [int(selector)]
    elif isinstance(selector, (list, tuple)):
        qs = [int(q) for q in selector]
    elif selector == "balanced":
        qs = [n // 2]
    elif selector == "one-vs-rest":
        qs = [1]
    elif selector == "all":
        qs = list(range(1, n // 2 + 1))
    elif selector in ("none", None):
        qs = []
    else:
        raise ConfigError(f"unknown bipartition selector {selector!r}")
    bad = [q for q in qs if not 1 <= q <= n - 1]
    if bad:
        raise ConfigError(f"bipartition sizes {bad} invalid for n={n}")
    return qs


def parse_bipartition_arg(text: str):
    if text in ("balanced", "one-vs-rest", "all", "none"):
        return text
    try:
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad bipartition list {text!r}") from exc


@dataclass(frozen=True)
class ScanSpec:
    n_list: tuple
    states: tuple
    rates: tuple
    quantities: tuple
    times: tuple = (0.0,)
    bipartition: object = "balanced"
    seed: int = 0

    def __post_init__(self):
        for name in ("n_list", "states", "rates", "quantities"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        unknown = set(self.quantities) - set(QUANTITIES)
        if unknown:
            raise ConfigError(f"unknown quantities {sorted(unknown)}")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError("time grid must be strictly increasing")
        if any(t < 0 for t in self.times):
            raise ConfigError("times must be >= 0")

    @classmethod
    def from_json(cls, data: dict) -> "ScanSpec":
        if str(data.get("schema", SCHEMA)) != SCHEMA:
            raise ConfigError(f"unsupported schema {data.get('schema')!r}")
        try:
            rates = tuple(_parse_rates(r) for r in data["rates"])
            times = data.get("times", [0.0])
            if isinstance(times, dict):
                times = np.linspace(0.0, float(times["tmax"]), int(times["steps"]) + 1).tolist()
            return cls(
                n_list=tuple(int(n) for n in data["n"]),
                states=tuple(data["states"]),
                rates=rates,
                quantities=tuple(data["quantities"]),
                times=tuple(float(t) for t in times),
                bipartition=data.get("bipartition", "balanced"),
                seed=int(data.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed scan config: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "n": list(self.n_list),
            "states": list(self.states),
            "rates": [{"gx": r.gx, "gy": r.gy, "gz": r.gz, "omega": r.omega} for r in self.rates],
            "quantities": list(self.quantities),
            "times": list(self.times),
            "bipartition": self.bipartition,
            "seed": self.seed,
        }

    @classmethod
    def load(cls, path) -> "ScanSpec":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_json(data)


def _parse_rates(r) -> RateSet:
    if isinstance(r, (int, float)):
        return RateSet.isotropic(float(r))
    if "isotropic" in r:
        return RateSet.isotropic(float(r["isotropic"]), float(r.get("omega", 0.0)))
    if "gperp" in r:
        return RateSet.anisotropic(float(r["gperp"]), float(r["gz"]), float(r.get("omega", 0.0)))
    return RateSet(float(r["gx"]), float(r["gy"]), float(r["gz"]), float(r.get("omega", 0.0)))


@dataclass(frozen=True)
class _Job:
    n: int
    state: str
    rates: RateSet
    quantity: str
    times: tuple
    qs: tuple


def _row(job: _Job, quantity=None, q=None, t=None, value=None, error="") -> dict:
    return {
        "n": job.n, "state": job.state, "gx": job.rates.gx, "gy": job.rates.gy,
        "gz": job.rates.gz, "omega": job.rates.omega, "quantity": quantity or job.quantity,
        "q": q, "t": t, "value": value, "error": error,
    }


def _run_job(job: _Job) -> list[dict]:
    try:
        return _compute(job)
    except (ValueError, ArithmeticError, NumericalError) as exc:
        return [_row(job, error=f"{type(exc).__name__}: {exc}")]


def _compute(job: _Job) -> list[dict]:
    psi = parse_state(job.state, job.n)
    v0 = psi.multipoles()
    rows = []
    if job.quantity in TIME_RESOLVED:
        for t in job.times:
            v = evolve(v0, job.rates, t)
            if job.quantity == "R":
                rows.append(_row(job, t=t, value=purity(v)))
            elif job.quantity == "r":
                rows.append(_row(job, t=t, value=math.sqrt(max(purity(v) - 1 / (job.n + 1), 0.0))))
            else:
                rho = from_multipoles(v)
                rows += [_row(job, q=q, t=t, value=negativity(rho, q)) for q in job.qs]
    elif job.quantity == "t_npt":
        rows += [_row(job, q=q, value=t_npt(psi, job.rates, q)) for q in job.qs]
    elif job.quantity == "t_p":
        rows.append(_row(job, value=t_p(psi, job.rates)))
    elif job.quantity == "t_rmax":
        rows.append(_row(job, value=t_rmax(psi, job.rates)))
    elif job.quantity == "qsl":
        for t in job.times:
            b = qsl_bounds(job.n, job.rates, v0, t)
            for name in ("campaioli", "uzdin_R_lower", "tmin", "tes_lower"):
                rows.append(_row(job, quantity=f"qsl_{name}", t=t, value=getattr(b, name)))
    return rows


def _jobs(spec: ScanSpec) -> list[_Job]:
    jobs = []
    for n in spec.n_list:
        qs = tuple(bipartitions(n, spec.bipartition))
        for state in spec.states:
            for rates in spec.rates:
                for quantity in spec.quantities:
                    jobs.append(_Job(n, state, rates, quantity, spec.times, qs))
    return jobs


def resolve_threads(threads: int | None) -> int:
    env = os.environ.get("DEPOL_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError as exc:
            raise ConfigError(f"DEPOL_THREADS={env!r} is not an integer") from exc
    threads = 1 if threads is None else threads
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def run_scan(spec: ScanSpec, threads: int | None = None) -> list[dict]:
    """Evaluate every (n, state, rates, quantity) job; rows come back in spec order."""
    threads = resolve_threads(threads)
    jobs = _jobs(spec)
    if threads == 1 or len(jobs) == 1:
        chunks = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_job, jobs))
    return [row for chunk in chunks for row in chunk]


# --- files ----------------------------------------------------------------


def rows_to_csv(rows, fields=ROW_FIELDS) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([fmt(row.get(f)) for f in fields])
    return buf.getvalue()


def _parse_cell(text: str):
    if text == "":
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(lines)]


def write_text(path, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1, sort_keys=False) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        # JSON has no inf or nan
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# --- fits -----------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    r_squared: float
    npoints: int
    group: dict = field(default_factory=dict)

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.params.get("a"), self.params.get("b")
        if self.model == "powerlaw":
            return a * x ** b
        if self.model == "affine":
            return a + b * x
        if self.model == "affine-sqrt":
            return a + b * np.sqrt(x)
        return np.full_like(x, a)

    def to_json(self) -> dict:
        return {"model": self.model, "params": self.params, "r_squared": self.r_squared,
                "npoints": self.npoints, **({"group": self.group} if self.group else {})}


def fit_scaling(x, y, model: str) -> FitResult:
    """Least squares in the model's linear coordinates.

    ``powerlaw`` is ``a x^b`` (fit in log-log), ``affine`` is ``a + b x``,
    ``affine-sqrt`` is ``a + b sqrt(x)`` and ``const`` is ``a``.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 3:
        raise FitError(f"need at least 3 finite points, got {x.size}")
    if model == "powerlaw":
        if np.any(x <= 0) or np.any(y <= 0):
            raise FitError("power-law fit needs positive data")
        u, w = np.log(x), np.log(y)
    elif model == "affine-sqrt":
        if np.any(x < 0):
            raise FitError("sqrt model needs x >= 0")
        u, w = np.sqrt(x), y
    else:
        u, w = x, y
    if model != "const" and np.ptp(u) == 0:
        raise FitError("all abscissae are equal")
    if model == "const":
        a = float(w.mean())
        pred = np.full_like(w, a)
        params = {"a": a}
    else:
        b, a = np.polyfit(u, w, 1)
        pred = a + b * u
        params = {"a": float(math.exp(a) if model == "powerlaw" else a), "b": float(b)}
    ss_tot = float(((w - w.mean()) ** 2).sum())
    ss_res = float(((w - pred) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return FitResult(model, params, float(min(max(r2, 0.0), 1.0)), int(x.size))


GROUP_KEYS = ("state", "gx", "gy", "gz", "quantity", "q", "t")


def fit_rows(rows, model: str, xkey: str = "n", shift: float = 0.0) -> list[FitResult]:
    """Fit ``value`` against ``xkey + shift`` separately for each group of scan rows."""
    groups: dict[tuple, list] = {}
    for row in rows:
        if row.get("error"):
            continue
        key = tuple(row.get(k) for k in GROUP_KEYS)
        groups.setdefault(key, []).append(row)
    if not groups:
        raise FitError("no usable rows")
    out = []
    for key, members in groups.items():
        x = [float(r[xkey]) + shift for r in members]
        y = [float(r["value"]) for r in members]
        res = fit_scaling(x, y, model)
        group = {k: v for k, v in zip(GROUP_KEYS, key) if v is not None}
        out.append(FitResult(res.model, res.params, res.r_squared, res.npoints, group))
    return out
