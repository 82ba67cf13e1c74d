"""Configuration, reports and the deterministic trial runner shared by all experiments."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Mapping, Sequence

import numpy as np

Z_95 = 1.959963984540054


class ExperimentError(RuntimeError):
    """An experiment could not produce a meaningful report (e.g. code search exhausted)."""


class CodeSearchError(ExperimentError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Finite-n knobs shared by the Monte Carlo experiments.

    ``params`` holds experiment-specific settings (block lengths, thresholds)
    so that a config file fully determines a run.
    """

    n: int = 256
    trials: int = 100
    seed: int = 0
    eps: float = 0.5
    rate_pad: float = 0.05
    best_of: int = 4
    workers: int = 1
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) < 8:
            raise ValueError(f"n must be at least 8, got {self.n}")
        if int(self.trials) < 1:
            raise ValueError("trials must be at least 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if int(self.best_of) < 1:
            raise ValueError("best_of must be at least 1")
        if int(self.workers) < 1:
            raise ValueError("workers must be at least 1")
        object.__setattr__(self, "params", dict(self.params))

    def param(self, name: str, default):
        return self.params.get(name, default)

    def replace(self, **changes) -> "ExperimentConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ExperimentConfig(**values)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = dict(self.params)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        return cls(**dict(d))


def mean_half_width(values: Sequence[float]) -> float:
    """95% normal-approximation half-width of the sample mean."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return math.inf
    return float(Z_95 * v.std(ddof=1) / math.sqrt(v.size))


def frequency_half_width(p: float, count: int) -> float:
    return float(Z_95 * math.sqrt(max(p * (1 - p), 0.0) / count)) if count else math.inf


@dataclass
class ExperimentReport:
    """Empirical rates and distortions with per-trial rows for CSV output."""

    experiment: str
    rates: dict[str, float]
    distortions: dict[str, float]
    stats: dict[str, float]
    config: dict
    half_widths: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    targets: dict[str, float] = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)

    def __post_init__(self):
        for k, v in self.distortions.items():
            if v < 0:
                raise ValueError(f"distortion {k} is negative")
        for k, v in self.stats.items():
            if k.endswith("_rate") or k.endswith("_frequency"):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"frequency {k}={v} outside [0, 1]")

    def to_dict(self, include_rows: bool = False) -> dict:
        out = {
            "experiment": self.experiment,
            "rates": self.rates,
            "distortions": self.distortions,
            "stats": self.stats,
            "half_widths": self.half_widths,
            "checks": self.checks,
            "targets": self.targets,
            "config": self.config,
        }
        if include_rows:
            out["rows"] = self.rows
        return out

    def csv_columns(self) -> list[str]:
        cols: list[str] = []
        for row in self.rows:
            for k in row:
                if k not in cols:
                    cols.append(k)
        return cols


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Generator for one trial; depends only on (seed, stream, trial), never on scheduling."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(trial))))


def setup_rng(seed: int, stream: int) -> np.random.Generator:
    """Generator for code construction and other per-run setup (streams disjoint from trials)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1_000_000 + int(stream),)))


def _run_chunk(task: Callable, trials: Sequence[int], batch_size: int | None) -> list[dict]:
    if batch_size is None:
        return [task(t) for t in trials]
    rows: list[dict] = []
    for start in range(0, len(trials), batch_size):
        rows.extend(task(list(trials[start : start + batch_size])))
    return rows


def run_trials(task: Callable, trials: int, workers: int = 1, batch_size: int | None = None) -> list[dict]:
    """Evaluate every trial index and return the rows in trial order.

    ``task(trial) -> row``, or with ``batch_size`` set ``task(trial_ids) -> rows``.
    A trial's row must depend only on its own index so that batching and the
    worker count never change results.  With ``workers > 1`` contiguous chunks
    go to a process pool and ``task`` must be picklable (a module-level
    function or a functools.partial of one).
    """
    ids = list(range(trials))
    if workers <= 1 or trials < 2:
        return _run_chunk(task, ids, batch_size)
    chunks = [c.tolist() for c in np.array_split(np.asarray(ids), min(workers, trials))]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [task] * len(chunks), chunks, [batch_size] * len(chunks)))
    return [row for part in parts for row in part]


def column(rows: Sequence[Mapping], key: str) -> np.ndarray:
    return np.asarray([r[key] for r in rows], dtype=float)


def summarize(rows: Sequence[Mapping], keys: Sequence[str]) -> tuple[dict[str, float], dict[str, float]]:
    """Means (numpy pairwise summation over trial order) and 95% half-widths."""
    means = {k: float(column(rows, k).mean()) for k in keys}
    widths = {k: mean_half_width(column(rows, k)) for k in keys}
    return means, widths
