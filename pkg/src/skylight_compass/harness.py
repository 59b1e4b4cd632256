"""Experiment protocol: evaluation, encoding comparison, 180 degree ambiguity analysis
and the exponential-decay (m) sweep, with their CSV and plot-data writers."""

from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd

from . import get_logger
from .encoding import angular_error, mode_errors, summarize
from .exceptions import InvalidInputError, TrainingDivergedError
from .models import (
    AmbiguityReport,
    AmbiguityRow,
    EncodingSpec,
    MetricsSummary,
    Mode,
    NetworkConfig,
    Scheme,
    SweepEntry,
    SweepResult,
    TrainConfig,
    TrainReport,
)
from .network import NetworkParams, fit, predict_batch
from .polarimg import feature_batch
from .repositories import Dataset

logger = get_logger(__name__)

Array = npt.NDArray[np.float64]

COMPARISON_COLUMNS = ["scheme", "mae_deg", "rmse_deg", "me_deg", "mode"]
SWEEP_COLUMNS = ["m", "mae_deg", "rmse_deg"]
AMBIGUITY_COLUMNS = ["index", "truth_deg", "pred_deg", "solar_alt_deg", "error_deg"]
AMBIGUITY_SUMMARY_COLUMNS = ["model", "window_lo_deg", "window_hi_deg", "n180e", "msa_deg"]
LOSS_COLUMNS = ["epoch", "loss"]


@dataclass
class Split:
    """Feature tensors, headings and solar altitudes of one dataset split."""

    features: Array
    headings: Array
    sun_altitudes: Array
    indices: list[int] = field(default_factory=list)

    @classmethod
    def from_dataset(cls, dataset: Dataset, pool_size: int) -> "Split":
        return cls(
            features=feature_batch(dataset.mosaics, pool_size),
            headings=dataset.headings,
            sun_altitudes=dataset.sun_altitudes,
            indices=dataset.indices,
        )

    def __len__(self) -> int:
        return self.headings.shape[0]


def _as_split(data: Dataset | Split, pool_size: int) -> Split:
    return data if isinstance(data, Split) else Split.from_dataset(data, pool_size)


def evaluate(
    params: NetworkParams, spec: EncodingSpec, test: Dataset | Split
) -> dict[Mode, MetricsSummary]:
    """Wrapped and folded error summaries of `params` on the test split."""
    test = _as_split(test, params.config.pool_size)
    if len(test) == 0:
        msg = "cannot evaluate on an empty dataset"
        raise InvalidInputError(msg)

    summaries = summarize(predict_batch(params, test.features, spec), test.headings)
    logger.info(
        "Evaluated",
        count=len(test),
        scheme=spec.scheme.value,
        **{mode: round(s.mae, 4) for mode, s in summaries.items()},
    )
    return summaries


@dataclass
class TrainingJob:
    train: Split
    test: Split
    train_config: TrainConfig
    network_config: NetworkConfig
    mode: Mode


@dataclass
class JobResult:
    errors: Array | None
    report: TrainReport

    @property
    def diverged(self) -> bool:
        return self.errors is None


def run_job(job: TrainingJob) -> JobResult:
    """Train one model and return its per-sample test errors, None if it diverged."""
    try:
        params, report = fit(
            job.train.features, job.train.headings, job.train_config, job.network_config
        )
    except TrainingDivergedError as e:
        logger.warning(
            "Run diverged",
            scheme=job.train_config.spec.scheme.value,
            seed=job.train_config.seed,
            epochs=e.report.epochs,
        )
        return JobResult(errors=None, report=e.report)

    predicted = predict_batch(params, job.test.features, job.train_config.spec)
    return JobResult(errors=mode_errors(predicted, job.test.headings, job.mode), report=report)


def run_jobs(jobs: Sequence[TrainingJob], workers: int = 1) -> list[JobResult]:
    """Results in job order; each job owns its seed so the outcome does not depend on
    `workers`."""
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(job) for job in jobs]

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, jobs))


def pool_results(results: Iterable[JobResult], mode: Mode, count: int) -> MetricsSummary:
    """One summary over the errors of every seed, NaN when any seed diverged."""
    results = list(results)
    if any(result.diverged for result in results):
        return MetricsSummary.diverged_run(mode, count)
    return MetricsSummary.from_errors(np.concatenate([r.errors for r in results]), mode)  # type: ignore[misc]


@dataclass
class Comparison:
    rows: dict[Scheme, MetricsSummary] = field(default_factory=dict)
    errors: dict[Scheme, Array] = field(default_factory=dict)


def compare_encodings(
    train: Dataset | Split,
    test: Dataset | Split,
    schemes: Sequence[Scheme],
    seeds: Sequence[int],
    train_config: TrainConfig,
    network_config: NetworkConfig,
    mode: Mode = "folded180",
    workers: int = 1,
) -> Comparison:
    """Train one model per (scheme, seed) on the same data with the same seeds.

    `train_config.spec` supplies j and m, its scheme is replaced per row;
    `network_config` supplies everything but the output layer."""
    if not schemes:
        msg = "at least one scheme is required"
        raise InvalidInputError(msg)
    if not seeds:
        msg = "at least one seed is required"
        raise InvalidInputError(msg)

    train = _as_split(train, network_config.pool_size)
    test = _as_split(test, network_config.pool_size)
    if len(test) == 0:
        msg = "cannot score models on an empty test set"
        raise InvalidInputError(msg)
    base = train_config.spec

    jobs = []
    for scheme in schemes:
        spec = EncodingSpec(scheme=scheme, j=base.j, m=base.m)
        net = NetworkConfig.for_spec(
            spec, **network_config.model_dump(exclude={"output_size", "output_activation"})
        )
        for seed in seeds:
            config = train_config.model_copy(update={"spec": spec, "seed": seed})
            jobs.append(TrainingJob(train, test, config, net, mode))

    results = run_jobs(jobs, workers)

    comparison = Comparison()
    for position, scheme in enumerate(schemes):
        chunk = results[position * len(seeds) : (position + 1) * len(seeds)]
        comparison.rows[scheme] = pool_results(chunk, mode, len(test) * len(seeds))
        if not comparison.rows[scheme].diverged:
            comparison.errors[scheme] = np.concatenate([r.errors for r in chunk])  # type: ignore[misc]
        logger.info("Compared", scheme=scheme.value, mae=comparison.rows[scheme].mae)

    return comparison


def ambiguity_analysis(
    params: NetworkParams,
    spec: EncodingSpec,
    test: Dataset | Split,
    window: tuple[float, float] = (170.0, 190.0),
) -> tuple[AmbiguityReport, Array]:
    """Samples whose wrapped error falls in `window`, plus every sample's wrapped error.

    Wrapped errors never exceed 180, so the default window admits [170, 180]."""
    low, high = window
    if low > high:
        msg = f"ambiguity window is empty: {window}"
        raise InvalidInputError(msg)

    test = _as_split(test, params.config.pool_size)
    if len(test) == 0:
        return AmbiguityReport(window_deg=window, rows=[]), np.zeros(0)

    predicted = predict_batch(params, test.features, spec)
    errors = np.atleast_1d(angular_error(predicted, test.headings))

    rows = [
        AmbiguityRow(
            index=test.indices[i] if test.indices else i,
            truth_deg=float(test.headings[i]),
            pred_deg=float(predicted[i]),
            solar_alt_deg=float(test.sun_altitudes[i]),
            error_deg=float(errors[i]),
        )
        for i in np.flatnonzero((errors >= low) & (errors <= high))
    ]
    report = AmbiguityReport(window_deg=window, rows=rows)
    logger.info("Ambiguity analysis", count=len(test), n180e=report.n180e, msa=report.msa)
    return report, errors


def sweep_m(
    train: Dataset | Split,
    test: Dataset | Split,
    m_values: Sequence[float],
    seeds: Sequence[int],
    train_config: TrainConfig,
    network_config: NetworkConfig,
    mode: Mode = "folded180",
    workers: int = 1,
) -> SweepResult:
    """One EXP model per (m, seed) at the j of `train_config.spec`."""
    if not seeds:
        msg = "at least one seed is required"
        raise InvalidInputError(msg)
    for m in m_values:
        if not 0 < m < 1:
            msg = f"m must lie in (0, 1), got {m}"
            raise InvalidInputError(msg)

    train = _as_split(train, network_config.pool_size)
    test = _as_split(test, network_config.pool_size)
    if len(test) == 0:
        msg = "cannot score models on an empty test set"
        raise InvalidInputError(msg)

    jobs = []
    for m in m_values:
        spec = EncodingSpec(scheme=Scheme.EXP, j=train_config.spec.j, m=m)
        net = NetworkConfig.for_spec(
            spec, **network_config.model_dump(exclude={"output_size", "output_activation"})
        )
        for seed in seeds:
            config = train_config.model_copy(update={"spec": spec, "seed": seed})
            jobs.append(TrainingJob(train, test, config, net, mode))

    results = run_jobs(jobs, workers)

    entries = []
    for position, m in enumerate(m_values):
        chunk = results[position * len(seeds) : (position + 1) * len(seeds)]
        summary = pool_results(chunk, mode, len(test) * len(seeds))
        entries.append(SweepEntry(m=m, mae=summary.mae, rmse=summary.rmse))

    result = SweepResult(entries=entries)
    logger.info("Sweep complete", m_values=list(m_values), argmin=result.argmin)
    return result


def csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, na_rep="nan", lineterminator="\n")


def _write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(frame))
    return path


def metrics_frame(rows: dict[str, MetricsSummary]) -> pd.DataFrame:
    """`rows` maps a scheme token to its summary, one CSV row each."""
    return pd.DataFrame(
        [
            {
                "scheme": scheme,
                "mae_deg": s.mae,
                "rmse_deg": s.rmse,
                "me_deg": s.me,
                "mode": s.mode,
            }
            for scheme, s in rows.items()
        ],
        columns=COMPARISON_COLUMNS,
    )


def write_metrics_csv(path: Path, rows: dict[str, MetricsSummary]) -> Path:
    return _write_csv(path, metrics_frame(rows))


def comparison_frame(comparison: Comparison) -> pd.DataFrame:
    return metrics_frame({scheme.value: s for scheme, s in comparison.rows.items()})


def write_comparison_csv(path: Path, comparison: Comparison) -> Path:
    return _write_csv(path, comparison_frame(comparison))


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    return pd.DataFrame(
        [{"m": e.m, "mae_deg": e.mae, "rmse_deg": e.rmse} for e in result.entries],
        columns=SWEEP_COLUMNS,
    )


def write_sweep_csv(path: Path, result: SweepResult) -> Path:
    return _write_csv(path, sweep_frame(result))


def write_ambiguity_csv(path: Path, report: AmbiguityReport) -> Path:
    frame = pd.DataFrame(
        [row.model_dump() for row in report.rows], columns=AMBIGUITY_COLUMNS
    )
    return _write_csv(path, frame)


def ambiguity_summary_frame(reports: dict[str, AmbiguityReport]) -> pd.DataFrame:
    """One row per model: the ~180 degree error count and the highest sun among them.
    `msa_deg` is nan when a model made no such error."""
    return pd.DataFrame(
        [
            {
                "model": name,
                "window_lo_deg": r.window_deg[0],
                "window_hi_deg": r.window_deg[1],
                "n180e": r.n180e,
                "msa_deg": r.msa,
            }
            for name, r in reports.items()
        ],
        columns=AMBIGUITY_SUMMARY_COLUMNS,
    )


def write_ambiguity_summary_csv(path: Path, reports: dict[str, AmbiguityReport]) -> Path:
    return _write_csv(path, ambiguity_summary_frame(reports))


def write_loss_csv(path: Path, report: TrainReport) -> Path:
    frame = pd.DataFrame(
        {"epoch": np.arange(report.epochs), "loss": report.epoch_loss},
        columns=LOSS_COLUMNS,
    )
    return _write_csv(path, frame)


def write_plot_data(path: Path, x, y) -> Path:
    """Two-column `x,y` file for external plotting."""
    return _write_csv(path, pd.DataFrame({"x": np.asarray(x), "y": np.asarray(y)}))
