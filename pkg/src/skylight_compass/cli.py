import functools
from pathlib import Path
from typing import Any, TypeVar

import click
import numpy as np
import orjson
import pydantic

from . import _logging, get_logger
from . import settings as settings_module
from .checkpoint import load_checkpoint, save_checkpoint
from .exceptions import DatasetError, SkylightCompassError, TrainingDivergedError
from .harness import (
    Split,
    ambiguity_analysis,
    compare_encodings,
    comparison_frame,
    csv_text,
    evaluate,
    metrics_frame,
    sweep_frame,
    sweep_m,
    write_ambiguity_csv,
    write_ambiguity_summary_csv,
    write_comparison_csv,
    write_loss_csv,
    write_metrics_csv,
    write_plot_data,
    write_sweep_csv,
)
from .models import (
    CameraRig,
    EncodingSpec,
    MosaicImage,
    NetworkConfig,
    RunManifest,
    Scheme,
    TrainConfig,
)
from .network import fit, predict_orientation
from .polarimg import extract_features, feature_batch
from .repositories import (
    Dataset,
    DatasetRepository,
    load_dataset,
    mosaic_from,
    read_pgm,
    write_pgm,
)
from .skysim import generate_dataset, uniform_headings, uniform_sun

logger = get_logger(__name__)

SectionT = TypeVar("SectionT", bound=pydantic.BaseModel)

MODES = {"wrapped": "wrapped360", "folded": "folded180"}
CHECKPOINT = "model.ckpt"
RUN_MANIFEST = "run.json"


class CompassGroup(click.Group):
    """Maps application errors onto the exit code contract: 2 for bad input, 3 for
    runtime failures. The error itself goes to stderr as one JSON line."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except SkylightCompassError as e:
            logger.debug("Command failed", exc_info=True)
            click.echo(orjson.dumps(e.as_dict()), err=True)
            ctx.exit(e.exit_code)
        except pydantic.ValidationError as e:
            error = {
                "msg": "invalid configuration",
                "code": "invalid_input",
                "exit_code": 2,
                "errors": [
                    {"loc": ".".join(str(p) for p in err["loc"]), "msg": err["msg"]}
                    for err in e.errors()
                ],
            }
            click.echo(orjson.dumps(error), err=True)
            ctx.exit(2)


def _override(section: SectionT, **values) -> SectionT:
    """The settings section with every flag that was given replacing its value."""
    updates = {key: value for key, value in values.items() if value is not None}
    if not updates:
        return section
    return type(section).model_validate({**section.model_dump(), **updates})


def _write_json(path: Path, obj: pydantic.BaseModel) -> None:
    path.write_bytes(
        orjson.dumps(
            obj.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS
        )
    )


def _write_run(
    out: Path,
    ctx: click.Context,
    config: dict[str, Any],
    seeds: list[int],
    inputs: dict[str, Path],
    outputs: dict[str, Path],
    name: str = RUN_MANIFEST,
) -> Path:
    manifest = RunManifest(
        subcommand=ctx.info_name or "",
        flags={key: _plain(value) for key, value in ctx.params.items()},
        config=config,
        seeds=seeds,
        inputs={key: str(path) for key, path in inputs.items()},
        outputs={key: str(path) for key, path in outputs.items()},
    )
    path = out / name if out.is_dir() or out.suffix == "" else out
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path, manifest)
    return path


def _plain(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, tuple | list):
        return [_plain(v) for v in value]
    return value


def _options(*decorators):
    def apply(func):
        return functools.reduce(lambda f, d: d(f), reversed(decorators), func)

    return apply


encoding_options = _options(
    click.option(
        "--scheme",
        type=click.Choice([s.value for s in Scheme]),
        default=None,
        help="Output encoding.",
    ),
    click.option("--j", "j", type=float, default=None, help="Degrees per output neuron."),
    click.option("--m", "m", type=float, default=None, help="EXP decay base, in (0, 1)."),
)

training_options = _options(
    click.option("--epochs", type=click.IntRange(min=0), default=None),
    click.option("--batch-size", type=click.IntRange(min=1), default=None),
    click.option("--lr", "learning_rate", type=float, default=None, help="Adam step size."),
    click.option("--pool-size", type=click.IntRange(min=1), default=None),
    click.option("--branch-hidden", type=(int, int), default=None),
    click.option("--fusion-hidden", type=click.IntRange(min=1), default=None),
    click.option("--dtype", type=click.Choice(["float64", "float32"]), default=None),
)

mode_option = click.option(
    "--mode",
    type=click.Choice(list(MODES)),
    default=None,
    help="wrapped: errors in [0, 180]; folded: errors near 180 count as small.",
)

dir_path = click.Path(exists=False, file_okay=False, path_type=Path)
file_path = click.Path(exists=False, dir_okay=False, path_type=Path)


def _spec(conf: settings_module.Settings, scheme, j, m) -> EncodingSpec:
    encoding = _override(conf.encoding, scheme=scheme, j=j, m=m)
    return EncodingSpec(scheme=Scheme(encoding.scheme), j=encoding.j, m=encoding.m)


def _expected_spec(conf, scheme, j, m) -> EncodingSpec | None:
    if scheme is None and j is None and m is None:
        return None
    return _spec(conf, scheme, j, m)


def _mode(conf: settings_module.Settings, mode: str | None):
    return MODES[mode] if mode else conf.harness.mode


def _load(path: Path) -> Dataset:
    dataset = load_dataset(path)
    if not len(dataset):
        msg = f"dataset {path} is empty"
        raise DatasetError(msg)
    return dataset


def _configs(
    conf: settings_module.Settings,
    dataset: Dataset,
    spec: EncodingSpec,
    seed: int | None,
    epochs,
    batch_size,
    learning_rate,
    pool_size,
    branch_hidden,
    fusion_hidden,
    dtype,
) -> tuple[TrainConfig, NetworkConfig]:
    train = _override(
        conf.train,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        seed=seed,
    )
    network = _override(
        conf.network, branch_hidden=branch_hidden, fusion_hidden=fusion_hidden, dtype=dtype
    )
    pool = _override(conf.polarimetry, pool_size=pool_size).pool_size

    shapes = {mosaic.pixels.shape for mosaic in dataset.mosaics}
    if len(shapes) != 1:
        msg = f"dataset mixes mosaic shapes {sorted(shapes)}"
        raise DatasetError(msg)
    ((height, width),) = shapes

    network_config = NetworkConfig.for_spec(
        spec,
        grid_h=(height // 2) // pool,
        grid_w=(width // 2) // pool,
        pool_size=pool,
        branch_hidden=network.branch_hidden,
        fusion_hidden=network.fusion_hidden,
        dtype=network.dtype,
    )
    train_config = TrainConfig(
        learning_rate=train.learning_rate,
        beta1=train.beta1,
        beta2=train.beta2,
        epsilon=train.epsilon,
        batch_size=train.batch_size,
        epochs=train.epochs,
        seed=train.seed,
        spec=spec,
    )
    return train_config, network_config


def _config_snapshot(train_config: TrainConfig, network_config: NetworkConfig) -> dict:
    return {
        "train": train_config.model_dump(mode="json"),
        "network": network_config.model_dump(mode="json"),
    }


def _read_mosaic(conf: settings_module.Settings, image: Path) -> MosaicImage:
    """A PGM mosaic, with bit depth and polarizer pattern from its sidecar when present."""
    if not image.exists():
        msg = f"no image at {image}"
        raise DatasetError(msg)

    pixels = read_pgm(image)
    repo = DatasetRepository(root=image.parent)
    if repo.sidecar_file(image.stem).exists():
        meta = repo.get_meta(image.stem)
        bit_depth, pattern = meta.bit_depth, meta.pattern
    else:
        bit_depth, pattern = conf.sky.bit_depth, conf.sky.pattern

    return mosaic_from(pixels, bit_depth, pattern, image)


@click.group(cls=CompassGroup)
@click.option("--debug/--no-debug", default=None, help="Human readable debug logs.")
@click.option("--log-level", default=None, help="Minimum log level, e.g. info.")
@click.pass_context
def app(ctx: click.Context, debug: bool | None, log_level: str | None):
    """Heading from polarized skylight: simulate, train, evaluate."""
    # stderr before anything logs, stdout carries command output only
    _logging.configure(debug=bool(debug), log_level=log_level)
    conf = settings_module.configure()
    _logging.configure(
        debug=conf.debug if debug is None else debug,
        log_level=log_level or conf.log_level,
    )
    ctx.obj = conf


@app.command()
@click.option("--count", type=click.IntRange(min=0), default=100, show_default=True)
@click.option("--out", type=dir_path, required=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--fov", "fov_deg", type=float, default=None)
@click.option("--dop-max", type=float, default=None)
@click.option("--noise", "noise_sigma", type=float, default=None)
@click.option("--bit-depth", type=int, default=None)
@click.option("--sun-alt-min", "sun_altitude_min_deg", type=float, default=None)
@click.option("--sun-alt-max", "sun_altitude_max_deg", type=float, default=None)
@click.option("--sun-az", "sun_azimuth_deg", type=float, default=None)
@click.option(
    "--sun-az-random",
    is_flag=True,
    default=False,
    help="Uniform solar azimuth; heading is then not recoverable from the image.",
)
@click.option("--heading-grid", "heading_grid_deg", type=float, default=None)
@click.pass_context
def gen(ctx: click.Context, count: int, out: Path, seed: int, sun_az_random: bool, **sky):
    """Render a labelled synthetic dataset."""
    conf: settings_module.Settings = ctx.obj
    sky_conf = _override(conf.sky, **sky)
    if sun_az_random:
        sky_conf = sky_conf.model_copy(update={"sun_azimuth_deg": None})

    rig = CameraRig(
        width=sky_conf.width,
        height=sky_conf.height,
        fov=sky_conf.fov_deg,
        dop_max=sky_conf.dop_max,
    )
    manifest = generate_dataset(
        count,
        out,
        seed=seed,
        heading_sampler=uniform_headings(sky_conf.heading_grid_deg),
        sun_sampler=uniform_sun(
            sky_conf.sun_altitude_min_deg,
            sky_conf.sun_altitude_max_deg,
            sky_conf.sun_azimuth_deg,
        ),
        noise_sigma=sky_conf.noise_sigma,
        rig=rig,
        bit_depth=sky_conf.bit_depth,
        pattern=sky_conf.pattern,
    )
    _write_run(
        out,
        ctx,
        config={"sky": sky_conf.model_dump(mode="json")},
        seeds=[seed],
        inputs={},
        outputs={"manifest": out / "manifest.txt"},
    )
    click.echo(f"{len(manifest)} samples written to {out}")


@app.command()
@click.option("--data", type=dir_path, required=True, help="Training dataset.")
@click.option("--out", type=dir_path, required=True)
@click.option("--validation", type=dir_path, default=None, help="Validation dataset.")
@click.option("--seed", type=click.IntRange(min=0), default=None)
@encoding_options
@training_options
@click.pass_context
def train(
    ctx: click.Context,
    data: Path,
    out: Path,
    validation: Path | None,
    seed: int | None,
    scheme,
    j,
    m,
    **training,
):
    """Train a network and write its checkpoint and loss curve."""
    conf: settings_module.Settings = ctx.obj
    spec = _spec(conf, scheme, j, m)
    dataset = _load(data)
    train_config, network_config = _configs(conf, dataset, spec, seed, **training)

    val = None
    if validation is not None:
        val_split = Split.from_dataset(_load(validation), network_config.pool_size)
        val = (val_split.features, val_split.headings)

    out.mkdir(parents=True, exist_ok=True)
    loss_csv = out / "loss.csv"
    try:
        params, report = fit(
            feature_batch(dataset.mosaics, network_config.pool_size),
            dataset.headings,
            train_config,
            network_config,
            validation=val,
        )
    except TrainingDivergedError as e:
        write_loss_csv(loss_csv, e.report)
        raise

    checkpoint = out / CHECKPOINT
    save_checkpoint(checkpoint, params, spec)
    write_loss_csv(loss_csv, report)
    outputs = {"checkpoint": checkpoint, "loss": loss_csv}
    if report.validation is not None:
        outputs["validation"] = write_metrics_csv(
            out / "validation.csv",
            {spec.scheme.value: report.validation[conf.harness.mode]},
        )

    _write_run(
        out,
        ctx,
        config=_config_snapshot(train_config, network_config),
        seeds=[train_config.seed],
        inputs={"data": data, **({"validation": validation} if validation else {})},
        outputs=outputs,
    )
    click.echo(str(checkpoint))


@app.command(name="eval")
@click.option("--checkpoint", type=file_path, required=True)
@click.option("--data", type=dir_path, required=True, help="Test dataset.")
@click.option("--out", type=dir_path, default=None)
@click.option("--window", type=(float, float), default=None, help="Ambiguity window.")
@mode_option
@encoding_options
@click.pass_context
def eval_(
    ctx: click.Context,
    checkpoint: Path,
    data: Path,
    out: Path | None,
    window,
    mode,
    scheme,
    j,
    m,
):
    """Score a checkpoint on a dataset, with the 180 degree ambiguity breakdown."""
    conf: settings_module.Settings = ctx.obj
    params, spec = load_checkpoint(checkpoint, _expected_spec(conf, scheme, j, m))
    dataset = _load(data)
    params.config.check_mosaic(dataset.mosaics[0].pixels.shape)

    test = Split.from_dataset(dataset, params.config.pool_size)
    summaries = evaluate(params, spec, test)
    selected = _mode(conf, mode)
    frame = metrics_frame({spec.scheme.value: summaries[selected]})
    click.echo(csv_text(frame), nl=False)

    if out is None:
        return

    window = window or conf.harness.ambiguity_window_deg
    report, errors = ambiguity_analysis(params, spec, test, window)
    outputs = {
        "metrics": write_metrics_csv(out / "metrics.csv", {spec.scheme.value: summaries[selected]}),
        "ambiguity": write_ambiguity_csv(out / "ambiguity.csv", report),
        "ambiguity_summary": write_ambiguity_summary_csv(
            out / "ambiguity_summary.csv", {checkpoint.stem: report}
        ),
        "ambiguity_plot": write_plot_data(
            out / "ambiguity_errors.csv", test.sun_altitudes, errors
        ),
    }
    _write_run(
        out,
        ctx,
        config={
            "encoding": spec.model_dump(mode="json"),
            "mode": selected,
            "window": list(window),
            "ambiguity": {"n180e": report.n180e, "msa": report.msa},
        },
        seeds=[],
        inputs={"checkpoint": checkpoint, "data": data},
        outputs=outputs,
    )


@app.command()
@click.option("--checkpoint", type=file_path, required=True)
@click.option("--image", type=file_path, required=True, help="PGM mosaic.")
@click.option("--manifest", type=file_path, default=None, help="Write a run manifest here.")
@encoding_options
@click.pass_context
def predict(
    ctx: click.Context, checkpoint: Path, image: Path, manifest: Path | None, scheme, j, m
):
    """Print the heading of one mosaic in decimal degrees."""
    conf: settings_module.Settings = ctx.obj
    params, spec = load_checkpoint(checkpoint, _expected_spec(conf, scheme, j, m))
    heading = predict_orientation(params, _read_mosaic(conf, image), spec)
    click.echo(f"{heading.value:.6f}")

    if manifest is not None:
        _write_run(
            manifest,
            ctx,
            config={"encoding": spec.model_dump(mode="json")},
            seeds=[],
            inputs={"checkpoint": checkpoint, "image": image},
            outputs={},
        )


def _seeds(conf: settings_module.Settings, seeds: tuple[int, ...]) -> list[int]:
    return list(seeds) or [conf.train.seed]


@app.command()
@click.option("--train", "train_dir", type=dir_path, required=True)
@click.option("--test", "test_dir", type=dir_path, required=True)
@click.option("--out", type=dir_path, required=True)
@click.option(
    "--schemes",
    default=",".join(s.value for s in Scheme),
    show_default=True,
    help="Comma separated scheme tokens.",
)
@click.option("--seed", "seeds", type=click.IntRange(min=0), multiple=True)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@mode_option
@click.option("--j", "j", type=float, default=None)
@click.option("--m", "m", type=float, default=None)
@training_options
@click.pass_context
def compare(
    ctx: click.Context,
    train_dir: Path,
    test_dir: Path,
    out: Path,
    schemes: str,
    seeds: tuple[int, ...],
    workers,
    mode,
    j,
    m,
    **training,
):
    """Train every scheme on the same data and seeds and tabulate the errors."""
    conf: settings_module.Settings = ctx.obj
    try:
        scheme_list = [Scheme(token.strip()) for token in schemes.split(",") if token.strip()]
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--schemes") from e

    seed_list = _seeds(conf, seeds)
    spec = _spec(conf, None, j, m)
    train_set = _load(train_dir)
    train_config, network_config = _configs(conf, train_set, spec, seed_list[0], **training)
    test = Split.from_dataset(_load(test_dir), network_config.pool_size)
    selected = _mode(conf, mode)

    comparison = compare_encodings(
        Split.from_dataset(train_set, network_config.pool_size),
        test,
        scheme_list,
        seed_list,
        train_config,
        network_config,
        mode=selected,
        workers=_override(conf.harness, workers=workers).workers,
    )

    outputs = {"table": write_comparison_csv(out / "compare.csv", comparison)}
    truth = np.tile(test.headings, len(seed_list))
    for scheme, errors in comparison.errors.items():
        outputs[f"errors_{scheme.value}"] = write_plot_data(
            out / f"errors_{scheme.value}.csv", truth, errors
        )

    _write_run(
        out,
        ctx,
        config=_config_snapshot(train_config, network_config) | {"mode": selected},
        seeds=seed_list,
        inputs={"train": train_dir, "test": test_dir},
        outputs=outputs,
    )
    click.echo(csv_text(comparison_frame(comparison)), nl=False)


@app.command()
@click.option("--train", "train_dir", type=dir_path, required=True)
@click.option("--test", "test_dir", type=dir_path, required=True)
@click.option("--out", type=dir_path, required=True)
@click.option(
    "--m-values",
    default="0.95,0.96,0.97,0.98,0.99",
    show_default=True,
    help="Comma separated EXP decay bases.",
)
@click.option("--seed", "seeds", type=click.IntRange(min=0), multiple=True)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@mode_option
@click.option("--j", "j", type=float, default=None)
@training_options
@click.pass_context
def sweep(
    ctx: click.Context,
    train_dir: Path,
    test_dir: Path,
    out: Path,
    m_values: str,
    seeds: tuple[int, ...],
    workers,
    mode,
    j,
    **training,
):
    """Train EXP models over a list of m and tabulate MAE and RMSE against m."""
    conf: settings_module.Settings = ctx.obj
    try:
        m_list = [float(v) for v in m_values.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--m-values") from e

    seed_list = _seeds(conf, seeds)
    spec = _spec(conf, Scheme.EXP.value, j, None)
    train_set = _load(train_dir)
    train_config, network_config = _configs(conf, train_set, spec, seed_list[0], **training)
    test = Split.from_dataset(_load(test_dir), network_config.pool_size)
    selected = _mode(conf, mode)

    result = sweep_m(
        Split.from_dataset(train_set, network_config.pool_size),
        test,
        m_list,
        seed_list,
        train_config,
        network_config,
        mode=selected,
        workers=_override(conf.harness, workers=workers).workers,
    )

    m_axis = [entry.m for entry in result.entries]
    outputs = {
        "table": write_sweep_csv(out / "sweep.csv", result),
        "mae_plot": write_plot_data(
            out / "sweep_mae.csv", m_axis, [e.mae for e in result.entries]
        ),
        "rmse_plot": write_plot_data(
            out / "sweep_rmse.csv", m_axis, [e.rmse for e in result.entries]
        ),
    }
    _write_run(
        out,
        ctx,
        config=_config_snapshot(train_config, network_config)
        | {"mode": selected, "m_values": m_list, "argmin_m": result.argmin},
        seeds=seed_list,
        inputs={"train": train_dir, "test": test_dir},
        outputs=outputs,
    )
    click.echo(csv_text(sweep_frame(result)), nl=False)
    click.echo(f"argmin m = {result.argmin}", err=True)


@app.command()
@click.option("--image", type=file_path, required=True, help="PGM mosaic.")
@click.option("--out", type=dir_path, required=True)
@click.option("--pool-size", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_context
def convert(ctx: click.Context, image: Path, out: Path, pool_size: int):
    """Write the normalized s0, dop and aop maps of a mosaic as 16-bit PGMs."""
    conf: settings_module.Settings = ctx.obj
    features = extract_features(_read_mosaic(conf, image), pool_size)

    out.mkdir(parents=True, exist_ok=True)
    maxval = np.iinfo(np.uint16).max
    outputs = {}
    for name, values in (("s0", features.s0), ("dop", features.dop), ("aop", features.aop)):
        path = out / f"{name}.pgm"
        write_pgm(path, np.rint(values * maxval).astype(np.uint16))
        outputs[name] = path

    _write_run(
        out, ctx, config={"pool_size": pool_size}, seeds=[], inputs={"image": image},
        outputs=outputs,
    )
