"""Batch experiments: game instances x independent runs, metrics and persistence.

Every run draws its randomness from ``SeedSequence([seed, instance, run])`` and
every instance from ``SeedSequence([seed, instance, attempt])``, so a config
reproduces its output bit for bit regardless of worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from sbg import games, solvers, spitfire
from sbg.errors import NumericError, ParameterError
from sbg.games import FiniteGame, GameSimulator, Simulator
from sbg.gp import KernelSpec, ProfileGrid, sample_utility

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

ALGORITHMS = ("m_gp_lucb", "gp_se", "m_g_lucb", "m_lucb")
SOURCES = ("random_gp", "spitfire", "file")
RECORD_FIELDS = ("instance", "run", "algorithm", "rounds_used", "terminated", "x_index", "y_index",
                 "correct", "eps_hat", "error")
SUMMARY_KEYS = ("t_delta_mean", "pct_end", "pct_opt", "eps_hat_mean", "n_runs", "n_failed")
MAX_REDRAWS = 100


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment. Defaults follow the desk-scale protocol."""

    source: str = "random_gp"
    kernel: str = "se"
    length_scale: float = 0.1
    nu: float | None = None
    n: int = 3
    m: int = 3
    instances: int = 30
    game_path: str | None = None
    k_eps: int = 8
    algorithm: str = "m_gp_lucb"
    delta: float = 0.1
    eps: float = 0.0
    round_cap: int = 30_000
    budget: int | None = None
    noise: float = 0.01
    runs: int = 100
    seed: int = 0
    reference_points: int = 100
    a: float | None = None
    b: float | None = None
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ParameterError(f"source must be one of {SOURCES}")
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"algorithm must be one of {ALGORITHMS}")
        if self.runs < 1 or self.instances < 1:
            raise ParameterError("runs and instances must be at least 1")
        if self.source == "file":
            if not self.game_path or not os.path.exists(self.game_path):
                raise ParameterError(f"game file {self.game_path!r} does not exist")
        if self.algorithm == "gp_se" and self.budget is None:
            raise ParameterError("gp_se needs a budget")

    def kernel_spec(self) -> KernelSpec:
        if self.kernel == "matern":
            return KernelSpec.matern(self.length_scale, self.nu if self.nu is not None else 2.5)
        return KernelSpec(self.kernel, self.length_scale, self.nu)

    def smoothness(self) -> tuple[float, float]:
        a, b = games.smoothness_constants(self.kernel_spec())
        return (self.a if self.a is not None else a, self.b if self.b is not None else b)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a TOML document; tables are flattened, so ``[solver] delta = 0.1`` and
    ``delta = 0.1`` are equivalent."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    flat = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    flat.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**flat)


@dataclass
class RunRecord:
    instance: int
    run: int
    algorithm: str
    rounds_used: int
    terminated: bool
    x_index: int
    y_index: int
    correct: bool | None = None
    eps_hat: float | None = None
    error: str | None = None
    wall_seconds: float = field(default=0.0, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None


def summarize(records: Sequence[RunRecord]) -> dict:
    """Aggregate metrics over the non-failed runs.

    ``t_delta_mean`` averages rounds over the runs that stopped before the cap
    only; ``pct_end`` and ``pct_opt`` are percentages of all non-failed runs.
    """
    ok = [r for r in records if not r.failed]
    done = [r for r in ok if r.terminated]
    judged = [r for r in ok if r.correct is not None]
    eps = [r.eps_hat for r in ok if r.eps_hat is not None]
    return {
        "t_delta_mean": float(np.mean([r.rounds_used for r in done])) if done else None,
        "pct_end": 100.0 * len(done) / len(ok) if ok else None,
        "pct_opt": 100.0 * sum(r.correct for r in judged) / len(judged) if judged else None,
        "eps_hat_mean": float(np.mean(eps)) if eps else None,
        "n_runs": len(ok),
        "n_failed": len(records) - len(ok),
    }


# ---------------------------------------------------------------------------
# instances


@dataclass
class Instance:
    game: FiniteGame
    reference: FiniteGame | None = None


def _draw_gp_game(cfg: ExperimentConfig, instance: int) -> FiniteGame:
    grid = ProfileGrid.equally_spaced(cfg.n, cfg.m)
    spec = cfg.kernel_spec()
    for attempt in range(MAX_REDRAWS):
        seq = np.random.SeedSequence([cfg.seed, instance, attempt])
        game = FiniteGame(grid, sample_utility(grid, spec, seq))
        if games.is_nondegenerate(game):
            return game
        log.info("instance %d draw %d is degenerate; redrawing", instance, attempt)
    raise NumericError(f"no non-degenerate draw for instance {instance} after {MAX_REDRAWS} attempts")


def build_instance(cfg: ExperimentConfig, instance: int) -> Instance:
    if cfg.source == "random_gp":
        return Instance(_draw_gp_game(cfg, instance))
    if cfg.source == "file":
        return Instance(FiniteGame.load(cfg.game_path))
    params = spitfire.SpitfireParams()
    grid = ProfileGrid.equally_spaced(cfg.k_eps)
    ref = ProfileGrid.equally_spaced(cfg.reference_points)
    return Instance(spitfire.expected_damage_game(params, grid), spitfire.expected_damage_game(params, ref))


def _simulator(cfg: ExperimentConfig, inst: Instance, seed) -> Simulator:
    if cfg.source == "spitfire":
        return spitfire.as_simulator(seed=seed)
    return GameSimulator(inst.game, cfg.noise, seed)


def solve(cfg: ExperimentConfig, game: FiniteGame, sim: Simulator) -> solvers.SolverResult:
    grid = game.grid
    spec = cfg.kernel_spec()
    if cfg.algorithm == "m_gp_lucb":
        return solvers.m_gp_lucb(sim, grid, cfg.eps, cfg.delta, spec, noise=cfg.noise, round_cap=cfg.round_cap)
    if cfg.algorithm == "m_g_lucb":
        return solvers.m_g_lucb(sim, grid, cfg.eps, cfg.delta, noise=cfg.noise, round_cap=cfg.round_cap)
    if cfg.algorithm == "m_lucb":
        spread = float(game.u.max() - game.u.min()) or 1.0
        return solvers.m_lucb(sim, grid, cfg.eps, cfg.delta, spread, round_cap=cfg.round_cap)
    return solvers.gp_se(sim, grid, cfg.budget, spec, noise=cfg.noise)


def is_correct(game: FiniteGame, x_index: int, tol: float = 1e-12) -> bool:
    """Whether the first-player strategy attains the maximin value of ``game``."""
    return bool(game.u[x_index].min() >= games.brute_force_maximin(game).value - tol)


def _run_one(cfg: ExperimentConfig, instance: int, run: int, inst: Instance) -> RunRecord:
    seed = np.random.SeedSequence([cfg.seed, instance, run])
    start = time.perf_counter()
    try:
        res = solve(cfg, inst.game, _simulator(cfg, inst, seed))
    except (ParameterError, NumericError, np.linalg.LinAlgError) as exc:
        return RunRecord(instance, run, cfg.algorithm, 0, False, -1, -1, error=f"{type(exc).__name__}: {exc}",
                         wall_seconds=time.perf_counter() - start)
    x, y = res.profile
    eps = games.eps_hat(res.point[0], inst.reference) if inst.reference is not None else None
    return RunRecord(instance, run, cfg.algorithm, res.rounds_used, res.terminated, x, y,
                     is_correct(inst.game, x), eps, wall_seconds=time.perf_counter() - start)


def run_instance(cfg: ExperimentConfig, instance: int) -> list[RunRecord]:
    inst = build_instance(cfg, instance)
    return [_run_one(cfg, instance, run, inst) for run in range(cfg.runs)]


def run_experiment(cfg: ExperimentConfig) -> tuple[list[RunRecord], dict]:
    """Execute every (instance, run) pair and summarize.

    Instances are distributed over ``cfg.workers`` processes; records come back
    sorted by ``(instance, run)``.
    """
    ids = range(cfg.instances if cfg.source == "random_gp" else 1)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(run_instance, [cfg] * len(ids), ids))
    else:
        chunks = [run_instance(cfg, i) for i in ids]
    records = sorted((r for chunk in chunks for r in chunk), key=lambda r: (r.instance, r.run))
    return records, summarize(records)


# ---------------------------------------------------------------------------
# discretization experiments


@dataclass(frozen=True)
class EpsPoint:
    k_eps: int
    eps: float
    eps_hat: float


def _union_coords(*coord_sets) -> np.ndarray:
    return np.unique(np.round(np.concatenate(coord_sets), 12))


def _restrict(table: np.ndarray, coords: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> FiniteGame:
    ix = np.searchsorted(coords, np.round(xs, 12))
    iy = np.searchsorted(coords, np.round(ys, 12))
    return FiniteGame(ProfileGrid(xs, ys), table[np.ix_(ix, iy)])


def continuous_gp_instance(spec: KernelSpec, k_list: Sequence[int], reference_points: int, seed):
    """One GP draw evaluated jointly on the reference grid and every ``K x K`` grid.

    Returns ``(reference_game, {K: game})``.
    """
    ref = np.linspace(0, 1, reference_points)
    grids = {k: np.linspace(0, 1, k) for k in k_list}
    coords = _union_coords(ref, *grids.values())
    table = sample_utility(ProfileGrid(coords, coords), spec, seed)
    return _restrict(table, coords, ref, ref), {k: _restrict(table, coords, g, g) for k, g in grids.items()}


def theoretical_eps(k: int, delta: float, a: float, b: float) -> float:
    d = 1.0 / (2.0 * (k - 1))
    return games.arbitrary_discretization_bound(delta, a, b, d, d)


def eps_table(cfg: ExperimentConfig, k_list: Sequence[int]) -> tuple[list[EpsPoint], list[dict]]:
    """Theoretical and empirical discretization error for each ``K`` in ``k_list``.

    For ``source="random_gp"`` each of ``cfg.instances`` draws is shared by every
    ``K``; for ``source="spitfire"`` the expected-damage function is used.
    Returns the averaged series and one row per run.
    """
    a, b = cfg.smoothness()
    rows: list[dict] = []
    if cfg.source == "random_gp":
        spec = cfg.kernel_spec()
        instances = [continuous_gp_instance(spec, k_list, cfg.reference_points,
                                            np.random.SeedSequence([cfg.seed, i]))
                     for i in range(cfg.instances)]
    elif cfg.source == "spitfire":
        params = spitfire.SpitfireParams()
        ref = spitfire.expected_damage_game(params, ProfileGrid.equally_spaced(cfg.reference_points))
        instances = [(ref, {k: spitfire.expected_damage_game(params, ProfileGrid.equally_spaced(k))
                            for k in k_list})]
    else:
        raise ParameterError("eps_table needs a continuous source (random_gp or spitfire)")
    series = []
    for k in k_list:
        eps_k = theoretical_eps(k, cfg.delta, a, b)
        values = []
        for i, (ref, by_k) in enumerate(instances):
            kcfg = cfg.replace(k_eps=k)
            inst = Instance(by_k[k], ref)
            for run in range(cfg.runs):
                rec = _run_one(kcfg, i * 1000 + k, run, inst)
                if rec.failed:
                    continue
                values.append(rec.eps_hat)
                rows.append({"run": run, "instance": i, "k_eps": k, "eps_theoretical": eps_k,
                             "eps_hat": rec.eps_hat, "rounds": rec.rounds_used, "terminated": rec.terminated})
        series.append(EpsPoint(k, eps_k, float(np.mean(values)) if values else math.nan))
    return series, rows


# ---------------------------------------------------------------------------
# persistence


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(records: Sequence[RunRecord], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for r in records:
        writer.writerow([_fmt(getattr(r, f)) for f in RECORD_FIELDS])


def _parse_bool(s: str) -> bool | None:
    return None if s == "" else s == "true"


def read_records(fh) -> list[RunRecord]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
        raise ParameterError("unexpected run-record header")
    out = []
    for row in reader:
        out.append(RunRecord(
            instance=int(row["instance"]), run=int(row["run"]), algorithm=row["algorithm"],
            rounds_used=int(row["rounds_used"]), terminated=_parse_bool(row["terminated"]),
            x_index=int(row["x_index"]), y_index=int(row["y_index"]),
            correct=_parse_bool(row["correct"]),
            eps_hat=float(row["eps_hat"]) if row["eps_hat"] else None,
            error=row["error"] or None,
        ))
    return out


def write_eps_series(series: Sequence[EpsPoint], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["k_eps", "eps", "eps_hat"])
    for p in series:
        writer.writerow([p.k_eps, repr(p.eps), repr(p.eps_hat)])


SPITFIRE_COLUMNS = ("run", "k_eps", "eps_theoretical", "eps_hat", "rounds", "terminated")


def write_run_rows(rows: Sequence[dict], fh, columns=SPITFIRE_COLUMNS) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])


def emit(records: Sequence[RunRecord], summary: dict, out_dir, series: Sequence[EpsPoint] | None = None) -> dict:
    """Write ``runs.csv``, ``summary.json`` and, if given, ``eps_series.csv`` into ``out_dir``.

    Returns the written paths keyed by kind.
    """
    paths = {"runs": os.path.join(out_dir, "runs.csv"), "summary": os.path.join(out_dir, "summary.json")}
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(paths["runs"], "w", newline="") as fh:
            write_records(records, fh)
        with open(paths["summary"], "w") as fh:
            json.dump({k: summary[k] for k in SUMMARY_KEYS}, fh, indent=2)
            fh.write("\n")
        if series is not None:
            paths["eps_series"] = os.path.join(out_dir, "eps_series.csv")
            with open(paths["eps_series"], "w", newline="") as fh:
                write_eps_series(series, fh)
    except OSError as exc:
        raise OSError(f"cannot write results to {out_dir}: {exc}") from exc
    return paths
