"""Parameter sweeps: bound curves, information loss, NRMSE and their CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from fisherbound.bound import BoundPoint, RegularizationPolicy, bound_from_triple
from fisherbound.errors import DomainError, EmptyCurveError, FisherBoundError, RunFailedError, ValidationError
from fisherbound.models import CUBIC_SETUPS, ModelSpec, make_model
from fisherbound.moments import default_step, group_blocks, merge_triple, triple_blocks, tree_merge, MomentTriple
from fisherbound.oracle import crlb
from fisherbound.transforms import parse_transform_spec, standard_transform_set

CSV_COLUMNS = ("theta", "bound", "input_fisher", "loss_db", "crlb", "nrmse", "effective_rank", "cond", "error")
LOSS_FLOOR_DB = -300.0
MAX_FLAGGED_FRACTION = 0.2
DEFAULT_N = 1_000_000
DEFAULT_SEED = 1
FULL_BANK = standard_transform_set().spec

# (min, max, steps) per model, matching the case-study chart axes
DEFAULT_GRIDS = {
    "saleh": (0.1, 4.0, 40),
    "rician": (0.1, 2.0, 39),
    "cubic": (0.1, 1.0, 19),
}
REFERENCE_GRID = (0.5, 2.0, 4)


def information_loss_db(bound_value: float, input_fisher: float) -> float:
    """``10 log10(bound / F_x)``; a zero bound maps to the -300 dB floor marker."""
    if not input_fisher > 0:
        raise DomainError(f"input Fisher information must be positive, got {input_fisher!r}")
    if bound_value <= 0.0:
        return LOSS_FLOOR_DB
    return 10.0 * math.log10(bound_value / input_fisher)


def nrmse(crlb_value: float, theta: float) -> float:
    if theta == 0:
        raise DomainError("NRMSE is undefined at theta = 0")
    return math.sqrt(crlb_value) / abs(theta)


@dataclass
class ExperimentConfig:
    model: str = "saleh"
    a: Optional[float] = None
    b: Optional[float] = None
    sigma2: Optional[float] = None
    angle: Optional[float] = None
    transforms: str = FULL_BANK
    theta_min: Optional[float] = None
    theta_max: Optional[float] = None
    theta_steps: Optional[int] = None
    theta_grid: Optional[Sequence[float]] = None
    n_samples: int = DEFAULT_N
    seed: int = DEFAULT_SEED
    fd_step: Optional[float] = None
    reg_mode: str = "truncated"
    reg_tol: float = 1e-10
    equilibrate: bool = True
    workers: int = 1
    bootstrap_groups: int = 16
    bootstrap_resamples: int = 100
    csv: Optional[str] = None
    svg: Optional[str] = None

    def build_model(self) -> ModelSpec:
        return make_model(self.model, a=self.a, b=self.b, sigma2=self.sigma2, angle=self.angle)

    @property
    def policy(self) -> RegularizationPolicy:
        return RegularizationPolicy(self.reg_mode, self.reg_tol, self.equilibrate)

    def grid(self) -> np.ndarray:
        if self.theta_grid is not None:
            grid = np.asarray(self.theta_grid, dtype=float)
        else:
            lo, hi, steps = DEFAULT_GRIDS.get(self.model, REFERENCE_GRID)
            lo = lo if self.theta_min is None else self.theta_min
            hi = hi if self.theta_max is None else self.theta_max
            steps = steps if self.theta_steps is None else self.theta_steps
            if steps < 1:
                raise ValidationError("theta_steps must be >= 1")
            grid = np.array([lo]) if steps == 1 else np.linspace(lo, hi, steps)
            # round away linspace noise so CSV thetas read cleanly
            grid = np.round(grid, 12)
        if grid.size == 0:
            raise ValidationError("empty theta grid")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValidationError("theta grid must be strictly increasing")
        return grid

    def validate(self) -> None:
        model = self.build_model()
        parse_transform_spec(self.transforms)
        self.policy  # raises on a bad mode or tolerance
        if self.n_samples < 2:
            raise ValidationError("n_samples must be >= 2")
        for theta in self.grid():
            model.check_theta(float(theta))
            if self.fd_step is not None:
                model.check_theta(float(theta) - self.fd_step, "theta-h")
                model.check_theta(float(theta) + self.fd_step, "theta+h")

    def echo(self) -> dict:
        out = asdict(self)
        out["theta_grid"] = [float(t) for t in self.grid()]
        for key in ("csv", "svg", "workers"):
            out.pop(key)
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.echo(), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()


@dataclass
class BoundCurve:
    points: list
    rows: list
    meta: dict = field(default_factory=dict)
    label: str = ""

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    @property
    def flagged(self) -> int:
        return sum(1 for r in self.rows if r["error"])


def bootstrap_rel_se(
    blocks: Sequence[tuple],
    theta: float,
    h: float,
    policy: RegularizationPolicy,
    value: float,
    groups: int = 16,
    resamples: int = 100,
    seed: int = 0,
) -> float:
    """Relative standard error of the bound by resampling contiguous sample groups."""
    grouped = group_blocks(blocks, groups)
    if len(grouped) < 2 or not value > 0:
        return math.nan
    gen = np.random.default_rng(seed)
    values = []
    for _ in range(resamples):
        pick = gen.integers(0, len(grouped), len(grouped))
        sel = [grouped[i] for i in pick]
        parts = [tree_merge([g[j] for g in sel]) for j in range(3)]
        triple = MomentTriple(parts[0].finalize(theta - h), parts[1].finalize(theta), parts[2].finalize(theta + h), h)
        try:
            values.append(bound_from_triple(triple, policy).value)
        except FisherBoundError:
            continue
    if len(values) < 2:
        return math.nan
    return float(np.std(values, ddof=1)) / value


def evaluate_point(
    model: ModelSpec,
    tset,
    theta: float,
    config: ExperimentConfig,
    workers: int = 1,
) -> BoundPoint:
    h = config.fd_step if config.fd_step is not None else default_step(model, theta)
    blocks = triple_blocks(model, tset, theta, h, config.n_samples, config.seed, workers)
    point = bound_from_triple(merge_triple(blocks, theta, h), config.policy)
    if config.bootstrap_resamples > 0:
        point.rel_se = bootstrap_rel_se(
            blocks, theta, h, config.policy, point.value,
            config.bootstrap_groups, config.bootstrap_resamples, config.seed,
        )
    point.extra["h"] = h
    return point


def _derived_row(model: ModelSpec, point: BoundPoint) -> dict:
    theta = point.theta
    row = dict.fromkeys(CSV_COLUMNS)
    row.update(theta=theta, bound=point.value, effective_rank=point.effective_rank, cond=point.cond, error=point.error)
    if point.error:
        return row
    if model.input_fisher is not None:
        fx = float(model.input_fisher(theta))
        row["input_fisher"] = fx
        row["loss_db"] = information_loss_db(point.value, fx)
    if point.value > 0:
        row["crlb"] = crlb(point.value, 1)
        if theta != 0:
            row["nrmse"] = nrmse(row["crlb"], theta)
    else:
        row["crlb"] = math.inf
        row["nrmse"] = math.inf
        row["error"] = "zero-bound"
    return row


def run_experiment(config: ExperimentConfig, write: bool = True) -> BoundCurve:
    """Sweep the grid and return the bound curve.

    Failing grid points are recorded in the ``error`` column and the sweep goes
    on; more than 20% failures raises :class:`RunFailedError` (after writing).
    """
    config.validate()
    model = config.build_model()
    tset = parse_transform_spec(config.transforms)
    grid = [float(t) for t in config.grid()]

    def one(theta):
        try:
            return evaluate_point(model, tset, theta, config)
        except FisherBoundError as exc:
            nan = math.nan
            return BoundPoint(theta, nan, np.full(len(tset), nan), np.full(len(tset), nan), nan, 0,
                              error=f"{type(exc).__name__}: {exc}")

    if config.workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            points = list(pool.map(one, grid))
    else:
        points = [one(t) for t in grid]

    rows = [_derived_row(model, p) for p in points]
    meta = {"config": config.echo(), "fingerprint": config.fingerprint(), "model": model.describe()}
    curve = BoundCurve(points, rows, meta, label=model.describe())
    if write and config.csv:
        emit_csv(curve, config.csv)
    if write and config.svg:
        from fisherbound.plotting import emit_svg

        emit_svg(curve, config.svg, "nrmse" if model.input_fisher is None else "loss_db")
    if curve.flagged > MAX_FLAGGED_FRACTION * len(rows):
        err = RunFailedError(f"{curve.flagged} of {len(rows)} grid points failed")
        err.curve = curve
        raise err
    return curve


def run_cubic_setups(config: ExperimentConfig, setups=CUBIC_SETUPS, write: bool = True) -> list[BoundCurve]:
    """One curve per input setup ``(a, b)``; output paths get an ``_a{a}_b{b}`` suffix."""
    curves = []
    for a, b in setups:
        cfg = replace(config, model="cubic", a=a, b=b, svg=None)
        if config.csv:
            cfg.csv = suffixed_path(config.csv, a, b)
        curves.append(run_experiment(cfg, write=write))
    if write and config.svg:
        from fisherbound.plotting import plot_curves

        plot_curves(curves, config.svg, "nrmse", labels=[f"a={a:g}, b={b:g}" for a, b in setups])
    return curves


def suffixed_path(path: str, a: float, b: float) -> str:
    stem, dot, ext = path.rpartition(".")
    if not dot:
        stem, ext = path, ""
    tag = f"_a{a:g}_b{b:g}"
    return f"{stem}{tag}.{ext}" if ext else f"{stem}{tag}"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.9g}"


def curve_to_csv(curve: BoundCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in curve.rows:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def emit_csv(curve: BoundCurve, path) -> None:
    text = curve_to_csv(curve)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list[dict]:
    """Parse a curve CSV back into rows of floats (``error`` stays a string)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValidationError(f"unexpected CSV header {reader.fieldnames}")
        rows = []
        for raw in reader:
            row = {}
            for key in CSV_COLUMNS:
                val = raw[key]
                if key == "error":
                    row[key] = val or None
                elif val == "":
                    row[key] = None
                elif key == "effective_rank":
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            rows.append(row)
        return rows


def empty_curve() -> BoundCurve:
    return BoundCurve([], [], {})


def require_points(curve: BoundCurve) -> None:
    if not curve.rows:
        raise EmptyCurveError("curve has no points")
